#pragma once

#include "routeseq/ndmath.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace routeseq {

// Activations with a closed-form Gaussian-smoothed (heat kernel) counterpart.
struct DiffusedKind {
  enum class Tag { Erf, Tanh, Sign, Relu, LogSoftmax };

  Tag tag = Tag::Tanh;
  double alpha = 1.0;  // Erf only: erf(alpha x)

  static DiffusedKind erf(double alpha);
  static DiffusedKind tanh() { return {Tag::Tanh, 1.0}; }
  static DiffusedKind sign() { return {Tag::Sign, 1.0}; }
  static DiffusedKind relu() { return {Tag::Relu, 1.0}; }
  static DiffusedKind log_softmax() { return {Tag::LogSoftmax, 1.0}; }

  std::string name() const;
};

// The unsmoothed function. Scalar kinds only.
double original_apply(const DiffusedKind& kind, double x);

// Smoothed value at width sigma >= 0; sigma = 0 returns the original
// function exactly. Scalar form rejects LogSoftmax.
//   erf(a x)  -> erf(a x / sqrt(1 + 2 (a sigma)^2))
//   tanh(x)   -> tanh(x / sqrt(1 + pi sigma^2 / 2))
//   sign(x)   -> erf(x / (sqrt(2) sigma))
//   relu(x)   -> sigma/sqrt(2 pi) exp(-x^2 / 2 sigma^2) + x/2 (1 + erf(x / (sqrt(2) sigma)))
double diffused_apply(const DiffusedKind& kind, double x, double sigma);
// Elementwise for scalar kinds; for LogSoftmax returns
// kappa(sigma) x - logsumexp(x).
Vector diffused_apply(const DiffusedKind& kind, const Vector& x, double sigma);

// kappa(sigma) = (1 - 1/pi) exp(-pi sigma^2) + 1/pi; exactly 1 at sigma = 0.
double logsoftmax_kappa(double sigma);
// Input scale of the smoothed tanh, 1 / sqrt(1 + pi sigma^2 / 2).
double tanh_slope(double sigma);

// ---------------------------------------------------------------------------
// Quadrature oracles for (f * K_sigma)(x) = integral f(x - t) K(t, sigma) dt.
// ---------------------------------------------------------------------------

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Physicists' Gauss-Hermite rule (weight exp(-u^2)), n >= 1.
QuadratureRule gauss_hermite(int n);
// Gauss-Legendre rule on [-1, 1], n >= 1.
QuadratureRule gauss_legendre(int n);

// Plain n-node Gauss-Hermite evaluation. Exact for polynomials of degree
// < 2n; slow to converge when f has kinks or varies faster than sigma.
double gauss_hermite_convolve(const std::function<double(double)>& f, double x, double sigma, int nodes);

// Composite Gauss rule for piecewise-smooth f. The kernel variable is cut at
// every point where x - t hits a breakpoint of f and into panels no wider
// than half of f's unit feature scale and half a kernel width, each panel
// integrated with an n-node Gauss-Legendre rule. Tails beyond 12 sigma are
// dropped (kernel mass below 1e-32). nodes >= 32.
double quadrature_convolve(const std::function<double(double)>& f, double x, double sigma, int nodes,
                           std::span<const double> breakpoints = {});

// ---------------------------------------------------------------------------
// Homotopy continuation schedule
// ---------------------------------------------------------------------------

struct DiffusionStage {
  double sigma;
  int epochs;
};

class DiffusionSchedule {
 public:
  // sigma strictly decreasing, all sigma > 0, epochs >= 1.
  explicit DiffusionSchedule(std::vector<DiffusionStage> stages);

  const std::vector<DiffusionStage>& stages() const { return stages_; }
  int total_epochs() const;

 private:
  std::vector<DiffusionStage> stages_;
};

// (30, 100), (5, 100), (1, 100), (1e-4, 100)
DiffusionSchedule schedule_default();

}  // namespace routeseq
