#include "routeseq/diffusion.hpp"

#include "routeseq/cells.hpp"
#include "routeseq/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace routeseq {

namespace {

constexpr double kPi = std::numbers::pi;

void require_sigma(double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw DomainError("sigma must be finite and >= 0");
}

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

DiffusedKind DiffusedKind::erf(double alpha) {
  if (!std::isfinite(alpha) || alpha == 0.0) throw DomainError("erf slope must be finite and nonzero");
  return {Tag::Erf, alpha};
}

std::string DiffusedKind::name() const {
  switch (tag) {
    case Tag::Erf: return "erf";
    case Tag::Tanh: return "tanh";
    case Tag::Sign: return "sign";
    case Tag::Relu: return "relu";
    case Tag::LogSoftmax: return "logsoftmax";
  }
  return "?";
}

double original_apply(const DiffusedKind& kind, double x) {
  switch (kind.tag) {
    case DiffusedKind::Tag::Erf: return std::erf(kind.alpha * x);
    case DiffusedKind::Tag::Tanh: return std::tanh(x);
    case DiffusedKind::Tag::Sign: return sign_of(x);
    case DiffusedKind::Tag::Relu: return std::max(x, 0.0);
    case DiffusedKind::Tag::LogSoftmax: break;
  }
  throw DomainError("log-softmax is a vector function");
}

double logsoftmax_kappa(double sigma) {
  require_sigma(sigma);
  if (sigma == 0.0) return 1.0;
  return (1.0 - 1.0 / kPi) * std::exp(-kPi * sigma * sigma) + 1.0 / kPi;
}

double tanh_slope(double sigma) {
  require_sigma(sigma);
  return 1.0 / std::sqrt(1.0 + 0.5 * kPi * sigma * sigma);
}

double diffused_apply(const DiffusedKind& kind, double x, double sigma) {
  require_sigma(sigma);
  if (kind.tag == DiffusedKind::Tag::LogSoftmax) throw DomainError("log-softmax is a vector function");
  if (sigma == 0.0) return original_apply(kind, x);
  switch (kind.tag) {
    case DiffusedKind::Tag::Erf: {
      const double as = kind.alpha * sigma;
      return std::erf(kind.alpha * x / std::sqrt(1.0 + 2.0 * as * as));
    }
    case DiffusedKind::Tag::Tanh: return std::tanh(x * tanh_slope(sigma));
    case DiffusedKind::Tag::Sign: return std::erf(x / (std::numbers::sqrt2 * sigma));
    case DiffusedKind::Tag::Relu: {
      const double u = x / (std::numbers::sqrt2 * sigma);
      // erfc(-u) = 1 + erf(u) without the cancellation; the two terms still
      // nearly cancel for x << 0, so keep the result on the right side of 0.
      const double value = sigma / std::sqrt(2.0 * kPi) * std::exp(-u * u) + 0.5 * x * std::erfc(-u);
      return std::max(value, 0.0);
    }
    case DiffusedKind::Tag::LogSoftmax: break;
  }
  return 0.0;
}

Vector diffused_apply(const DiffusedKind& kind, const Vector& x, double sigma) {
  if (kind.tag == DiffusedKind::Tag::LogSoftmax) {
    if (x.size() == 0) throw DomainError("log-softmax of an empty vector");
    const double kappa = logsoftmax_kappa(sigma);
    const double lse = logsumexp(x);
    return (kappa * x).array() - lse;
  }
  return x.unaryExpr([&](double v) { return diffused_apply(kind, v, sigma); });
}

// ---------------------------------------------------------------------------

QuadratureRule gauss_hermite(int n) {
  if (n < 1) throw DomainError("gauss_hermite: need at least one node");
  constexpr double kPiM4 = 0.7511255444649425;  // pi^(-1/4)
  QuadratureRule rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  const int half = (n + 1) / 2;
  double z = 0.0;
  for (int i = 0; i < half; ++i) {
    if (i == 0) z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
    else if (i == 1) z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    else if (i == 2) z = 1.86 * z - 0.86 * rule.nodes[0];
    else if (i == 3) z = 1.91 * z - 0.91 * rule.nodes[1];
    else z = 2.0 * z - rule.nodes[i - 2];

    double derivative = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      // Orthonormal Hermite recurrence.
      double p1 = kPiM4, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      derivative = std::sqrt(2.0 * n) * p2;
      const double previous = z;
      z = previous - p1 / derivative;
      if (std::abs(z - previous) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    rule.nodes[i] = z;
    rule.nodes[n - 1 - i] = -z;
    rule.weights[i] = rule.weights[n - 1 - i] = 2.0 / (derivative * derivative);
  }
  if (n % 2 == 1) rule.nodes[half - 1] = 0.0;
  return rule;
}

QuadratureRule gauss_legendre(int n) {
  if (n < 1) throw DomainError("gauss_legendre: need at least one node");
  QuadratureRule rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  const int half = (n + 1) / 2;
  for (int i = 1; i <= half; ++i) {
    double z = std::cos(kPi * (i - 0.25) / (n + 0.5));
    double derivative = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      derivative = n * (z * p1 - p2) / (z * z - 1.0);
      const double previous = z;
      z = previous - p1 / derivative;
      if (std::abs(z - previous) <= 1e-15) break;
    }
    rule.nodes[i - 1] = -z;
    rule.nodes[n - i] = z;
    rule.weights[i - 1] = rule.weights[n - i] = 2.0 / ((1.0 - z * z) * derivative * derivative);
  }
  return rule;
}

double gauss_hermite_convolve(const std::function<double(double)>& f, double x, double sigma, int nodes) {
  require_sigma(sigma);
  if (sigma == 0.0) return f(x);
  const auto rule = gauss_hermite(nodes);
  const double scale = std::numbers::sqrt2 * sigma;
  double total = 0.0;
  for (int k = 0; k < nodes; ++k) {
    const double value = f(x - scale * rule.nodes[k]);
    if (!std::isfinite(value)) throw NumericalError("quadrature: non-finite integrand sample");
    total += rule.weights[k] * value;
  }
  return total / std::sqrt(kPi);
}

double quadrature_convolve(const std::function<double(double)>& f, double x, double sigma, int nodes,
                           std::span<const double> breakpoints) {
  require_sigma(sigma);
  if (nodes < 32) throw DomainError("quadrature_convolve: use at least 32 nodes");
  if (sigma == 0.0) return f(x);

  const double reach = 12.0 * sigma;
  std::vector<double> cuts{-reach, reach};
  for (double b : breakpoints) {
    const double t = x - b;
    if (t > -reach && t < reach) cuts.push_back(t);
  }
  std::sort(cuts.begin(), cuts.end());

  const auto rule = gauss_legendre(nodes);
  const double max_panel = std::min(0.5, 0.5 * sigma);
  const double norm = 1.0 / (std::sqrt(2.0 * kPi) * sigma);
  double total = 0.0;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    const double lo = cuts[c], hi = cuts[c + 1];
    if (!(hi > lo)) continue;
    const int panels = static_cast<int>(std::ceil((hi - lo) / max_panel));
    const double width = (hi - lo) / panels;
    for (int p = 0; p < panels; ++p) {
      const double a = lo + p * width;
      const double mid = a + 0.5 * width;
      const double half = 0.5 * width;
      double panel = 0.0;
      for (int k = 0; k < nodes; ++k) {
        const double t = mid + half * rule.nodes[k];
        const double value = f(x - t);
        if (!std::isfinite(value)) throw NumericalError("quadrature: non-finite integrand sample");
        panel += rule.weights[k] * value * std::exp(-t * t / (2.0 * sigma * sigma));
      }
      total += half * panel;
    }
  }
  return total * norm;
}

// ---------------------------------------------------------------------------

DiffusionSchedule::DiffusionSchedule(std::vector<DiffusionStage> stages) : stages_(std::move(stages)) {
  if (stages_.empty()) throw DomainError("diffusion schedule needs at least one stage");
  for (std::size_t k = 0; k < stages_.size(); ++k) {
    const auto& s = stages_[k];
    if (!(s.sigma > 0.0) || !std::isfinite(s.sigma)) throw DomainError("diffusion sigma must be positive");
    if (s.epochs < 1) throw DomainError("each diffusion stage needs at least one epoch");
    if (k > 0 && !(s.sigma < stages_[k - 1].sigma)) {
      throw DomainError("diffusion sigma must strictly decrease across stages");
    }
  }
}

int DiffusionSchedule::total_epochs() const {
  int total = 0;
  for (const auto& s : stages_) total += s.epochs;
  return total;
}

DiffusionSchedule schedule_default() {
  return DiffusionSchedule({{30.0, 100}, {5.0, 100}, {1.0, 100}, {1e-4, 100}});
}

}  // namespace routeseq
