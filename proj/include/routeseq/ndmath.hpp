#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace routeseq {

// Dense row-major matrix and column vector, 64-bit reals throughout.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Linear kit. Every function checks shapes and rejects non-finite results.
// ---------------------------------------------------------------------------

Vector matvec(const Matrix& w, const Vector& x);
Vector add(const Vector& a, const Vector& b);
Vector hadamard(const Vector& a, const Vector& b);
// w x + b
Vector affine(const Matrix& w, const Vector& x, const Vector& b);

void require_finite(std::span<const double> values, const std::string& what);

// ---------------------------------------------------------------------------
// Random numbers
// ---------------------------------------------------------------------------

// xoshiro256** seeded through splitmix64. The output stream for a given seed
// is part of the on-disk reproducibility contract; do not change it.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  // Uniform on [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double lo, double hi);
  // Uniform integer on [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t& state);

// Fisher-Yates driven by Rng::below, so the permutation is stable across
// standard library implementations.
template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

// i.i.d. uniform on [-scale, scale]. scale must be > 0.
Matrix seeded_init(Eigen::Index rows, Eigen::Index cols, double scale, std::uint64_t seed);
void fill_uniform(std::span<double> out, double scale, Rng& rng);

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One trainable tensor: its values (updated in place) and its gradient.
struct ParamSlot {
  std::string name;
  std::span<double> value;
  std::span<const double> grad;
};

struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;  // number of updates applied so far
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// Bias-corrected Adam update of every slot. Moments are allocated on the first
// call. A non-finite gradient rejects the whole update (nothing is modified)
// and the error names the offending parameter.
void adam_step(std::span<const ParamSlot> params, AdamState& state);

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
Vector finite_diff_grad(const std::function<double(const Vector&)>& f, const Vector& x, double h);

// ---------------------------------------------------------------------------
// Checkpoint container
//
//   "RSQ1"
//   u32 metadata length, metadata bytes (UTF-8 key=value lines)
//   u32 tensor count
//   per tensor: u32 name length, name bytes, u64 rows, u64 cols,
//               rows*cols IEEE-754 binary64 values, row-major
//
// All integers and floats little-endian.
// ---------------------------------------------------------------------------

struct NamedTensor {
  std::string name;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::vector<double> data;
};

struct TensorContainer {
  std::string metadata;
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
};

void write_container(std::ostream& out, const TensorContainer& c);
TensorContainer read_container(std::istream& in);
void save_container(const std::string& path, const TensorContainer& c);
TensorContainer load_container(const std::string& path);

}  // namespace routeseq
