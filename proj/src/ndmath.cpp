#include "routeseq/ndmath.hpp"

#include "routeseq/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace routeseq {

namespace {

void require_same(Eigen::Index a, Eigen::Index b, const char* op) {
  if (a != b) {
    throw DomainError(std::string(op) + ": shape mismatch (" + std::to_string(a) + " vs " +
                      std::to_string(b) + ")");
  }
}

Vector checked(Vector v, const char* op) {
  require_finite({v.data(), static_cast<std::size_t>(v.size())}, op);
  return v;
}

}  // namespace

void require_finite(std::span<const double> values, const std::string& what) {
  for (double x : values) {
    if (!std::isfinite(x)) throw NumericalError(what + ": non-finite value");
  }
}

Vector matvec(const Matrix& w, const Vector& x) {
  require_same(w.cols(), x.size(), "matvec");
  return checked(w * x, "matvec");
}

Vector add(const Vector& a, const Vector& b) {
  require_same(a.size(), b.size(), "add");
  return checked(a + b, "add");
}

Vector hadamard(const Vector& a, const Vector& b) {
  require_same(a.size(), b.size(), "hadamard");
  return checked(a.cwiseProduct(b), "hadamard");
}

Vector affine(const Matrix& w, const Vector& x, const Vector& b) {
  require_same(w.cols(), x.size(), "affine");
  require_same(w.rows(), b.size(), "affine");
  return checked(w * x + b, "affine");
}

// ---------------------------------------------------------------------------

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) {
  std::uint64_t sm = seed;
  for (auto& word : s_) word = splitmix64(sm);
}

std::uint64_t Rng::next() {
  const std::uint64_t result = std::rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = std::rotl(s_[3], 45);
  return result;
}

double Rng::uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw DomainError("Rng::below: empty range");
  // Rejection on the top of the range keeps the draw exactly uniform.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = next();
  } while (x >= limit);
  return x % n;
}

void fill_uniform(std::span<double> out, double scale, Rng& rng) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw DomainError("init scale must be positive");
  for (double& x : out) x = rng.uniform(-scale, scale);
}

Matrix seeded_init(Eigen::Index rows, Eigen::Index cols, double scale, std::uint64_t seed) {
  if (rows < 0 || cols < 0) throw DomainError("seeded_init: negative shape");
  Matrix w(rows, cols);
  Rng rng(seed);
  fill_uniform({w.data(), static_cast<std::size_t>(w.size())}, scale, rng);
  return w;
}

// ---------------------------------------------------------------------------

void adam_step(std::span<const ParamSlot> params, AdamState& state) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t k = 0; k < params.size(); ++k) {
      state.m[k].assign(params[k].value.size(), 0.0);
      state.v[k].assign(params[k].value.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw DomainError("adam_step: parameter count changed");
  using ConstArray = Eigen::Map<const Eigen::ArrayXd>;
  using Array = Eigen::Map<Eigen::ArrayXd>;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& p = params[k];
    if (p.grad.size() != p.value.size() || state.m[k].size() != p.value.size()) {
      throw DomainError("adam_step: shape mismatch for " + p.name);
    }
    if (!ConstArray(p.grad.data(), static_cast<Eigen::Index>(p.grad.size())).allFinite()) {
      throw NumericalError("adam_step: non-finite gradient in " + p.name);
    }
  }

  const AdamConfig& cfg = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double m_scale = 1.0 / (1.0 - std::pow(cfg.beta1, t));
  const double v_scale = 1.0 / (1.0 - std::pow(cfg.beta2, t));
  const double b1 = cfg.beta1, b2 = cfg.beta2;

  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto n = static_cast<Eigen::Index>(params[k].value.size());
    Array theta(params[k].value.data(), n);
    const ConstArray g(params[k].grad.data(), n);
    Array m(state.m[k].data(), n);
    Array v(state.v[k].data(), n);
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.square();
    theta -= cfg.learning_rate * (m * m_scale) / ((v * v_scale).sqrt() + cfg.epsilon);
  }
}

// ---------------------------------------------------------------------------

Vector finite_diff_grad(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
  if (!(h > 0.0)) throw DomainError("finite_diff_grad: step must be positive");
  Vector grad(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericalError("finite_diff_grad: non-finite function value at coordinate " +
                           std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'R', 'S', 'Q', '1'};

template <typename U>
void put_le(std::ostream& out, U value) {
  unsigned char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U get_le(std::istream& in) {
  unsigned char bytes[sizeof(U)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(U));
  if (!in) throw StructuralError("checkpoint: truncated file");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

std::string get_bytes(std::istream& in, std::size_t n) {
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw StructuralError("checkpoint: truncated file");
  return s;
}

}  // namespace

const NamedTensor* TensorContainer::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void write_container(std::ostream& out, const TensorContainer& c) {
  out.write(kMagic, 4);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.metadata.size()));
  out.write(c.metadata.data(), static_cast<std::streamsize>(c.metadata.size()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& t : c.tensors) {
    if (t.data.size() != t.rows * t.cols) throw DomainError("checkpoint: bad shape for " + t.name);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put_le<std::uint64_t>(out, t.rows);
    put_le<std::uint64_t>(out, t.cols);
    for (double x : t.data) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(x));
  }
}

TensorContainer read_container(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || !std::equal(magic, magic + 4, kMagic)) throw StructuralError("checkpoint: bad magic");
  TensorContainer c;
  c.metadata = get_bytes(in, get_le<std::uint32_t>(in));
  const auto count = get_le<std::uint32_t>(in);
  c.tensors.reserve(count);
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedTensor t;
    t.name = get_bytes(in, get_le<std::uint32_t>(in));
    t.rows = get_le<std::uint64_t>(in);
    t.cols = get_le<std::uint64_t>(in);
    if (t.cols != 0 && t.rows > (std::uint64_t{1} << 40) / t.cols) {
      throw StructuralError("checkpoint: implausible shape for " + t.name);
    }
    t.data.resize(t.rows * t.cols);
    for (double& x : t.data) x = std::bit_cast<double>(get_le<std::uint64_t>(in));
    c.tensors.push_back(std::move(t));
  }
  return c;
}

void save_container(const std::string& path, const TensorContainer& c) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_container(out, c);
  if (!out) throw std::runtime_error("write failed: " + path);
}

TensorContainer load_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_container(in);
}

}  // namespace routeseq
