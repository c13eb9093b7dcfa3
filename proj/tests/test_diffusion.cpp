#include "doctest.h"
#include "support.hpp"

#include "routeseq/diffusion.hpp"
#include "routeseq/errors.hpp"

#include <numbers>

using namespace routeseq;
using namespace routeseq::testing;

namespace {

const std::vector<double> kGridX{-5, -2, -0.5, 0, 0.5, 2, 5};
const std::vector<double> kGridSigma{0.1, 1, 5};

double relu(double x) { return std::max(x, 0.0); }
double sign(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

}  // namespace

TEST_CASE("zero width returns the original function exactly") {
  for (double x : kGridX) {
    CHECK(diffused_apply(DiffusedKind::tanh(), x, 0.0) == std::tanh(x));
    CHECK(diffused_apply(DiffusedKind::erf(1.5), x, 0.0) == std::erf(1.5 * x));
    CHECK(diffused_apply(DiffusedKind::relu(), x, 0.0) == relu(x));
    CHECK(diffused_apply(DiffusedKind::sign(), x, 0.0) == sign(x));
  }
  Vector v(3);
  v << 0.3, -1.0, 2.0;
  const Vector y = diffused_apply(DiffusedKind::log_softmax(), v, 0.0);
  for (int k = 0; k < 3; ++k) CHECK(y[k] == doctest::Approx(v[k] - std::log(v.array().exp().sum())).epsilon(1e-15));
}

TEST_CASE("closed-form values") {
  for (double s : kGridSigma) CHECK(diffused_apply(DiffusedKind::sign(), 0.0, s) == 0.0);
  CHECK(diffused_apply(DiffusedKind::tanh(), 1.0, 1.0) ==
        doctest::Approx(std::tanh(1.0 / std::sqrt(1.0 + std::numbers::pi / 2.0))).epsilon(1e-15));
  CHECK(diffused_apply(DiffusedKind::tanh(), 1.0, 1.0) == doctest::Approx(0.5536893890604268).epsilon(1e-14));
  CHECK(diffused_apply(DiffusedKind::relu(), 0.0, 1.0) == doctest::Approx(0.3989422804014327).epsilon(1e-15));
  CHECK(diffused_apply(DiffusedKind::erf(2.0), 0.5, 1.0) == doctest::Approx(std::erf(1.0 / 3.0)).epsilon(1e-15));
  CHECK(diffused_apply(DiffusedKind::sign(), 1.0, 1.0) == doctest::Approx(std::erf(1.0 / std::sqrt(2.0))));
}

TEST_CASE("argument validation") {
  CHECK_THROWS_AS(diffused_apply(DiffusedKind::tanh(), 1.0, -0.1), DomainError);
  CHECK_THROWS_AS(diffused_apply(DiffusedKind::log_softmax(), 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(DiffusedKind::erf(0.0), DomainError);
  CHECK_THROWS_AS(diffused_apply(DiffusedKind::log_softmax(), Vector(), 1.0), DomainError);
  CHECK_THROWS_AS(quadrature_convolve([](double) { return 1.0; }, 0.0, 1.0, 16), DomainError);
  CHECK_THROWS_AS(quadrature_convolve([](double t) { return t > 3.0 ? std::nan("") : 0.0; }, 0.0, 1.0, 32), NumericalError);
}

TEST_CASE("log-softmax coefficient") {
  CHECK(logsoftmax_kappa(0.0) == 1.0);
  CHECK(std::abs(logsoftmax_kappa(30.0) - 1.0 / std::numbers::pi) <= 1e-12);
  CHECK(std::abs(logsoftmax_kappa(1e-4) - 1.0) <= 1e-7);
  double prev = logsoftmax_kappa(0.0);
  for (double s = 0.01; s < 3.0; s += 0.01) {
    const double k = logsoftmax_kappa(s);
    CHECK(k > 1.0 / std::numbers::pi);
    CHECK(k <= 1.0);
    CHECK(k <= prev);
    prev = k;
  }
  Vector v(4);
  v << 1.0, 2.0, -3.0, 0.5;
  const Vector y = diffused_apply(DiffusedKind::log_softmax(), v, 1.0);
  const double kappa = logsoftmax_kappa(1.0);
  for (int k = 0; k < 4; ++k) CHECK(y[k] == doctest::Approx(kappa * v[k] - std::log(v.array().exp().sum())).epsilon(1e-15));
}

TEST_CASE("quadrature rules") {
  SUBCASE("Gauss-Legendre integrates polynomials exactly") {
    const auto rule = gauss_legendre(8);
    double w = 0.0, x6 = 0.0, odd = 0.0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
      w += rule.weights[k];
      x6 += rule.weights[k] * std::pow(rule.nodes[k], 6);
      odd += rule.weights[k] * std::pow(rule.nodes[k], 7);
    }
    CHECK(w == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(x6 == doctest::Approx(2.0 / 7.0).epsilon(1e-14));
    CHECK(std::abs(odd) <= 1e-15);
  }
  SUBCASE("Gauss-Hermite moments") {
    const auto rule = gauss_hermite(20);
    double m0 = 0.0, m2 = 0.0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
      m0 += rule.weights[k];
      m2 += rule.weights[k] * rule.nodes[k] * rule.nodes[k];
    }
    CHECK(m0 == doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-13));
    CHECK(m2 == doctest::Approx(std::sqrt(std::numbers::pi) / 2.0).epsilon(1e-13));
  }
  SUBCASE("heat kernel of smooth functions has closed forms") {
    for (double s : kGridSigma) {
      for (double x : kGridX) {
        auto one = [](double) { return 1.0; };
        auto id = [](double t) { return t; };
        auto sq = [](double t) { return t * t; };
        auto cosine = [](double t) { return std::cos(t); };
        CHECK(std::abs(quadrature_convolve(one, x, s, 128) - 1.0) <= 1e-12);
        CHECK(std::abs(quadrature_convolve(id, x, s, 128) - x) <= 1e-12);
        CHECK(quadrature_convolve(sq, x, s, 128) == doctest::Approx(x * x + s * s).epsilon(1e-12));
        CHECK(std::abs(quadrature_convolve(cosine, x, s, 128) - std::exp(-s * s / 2) * std::cos(x)) <= 1e-12);
        CHECK(std::abs(gauss_hermite_convolve(one, x, s, 64) - 1.0) <= 1e-12);
        CHECK(std::abs(gauss_hermite_convolve(sq, x, s, 64) - (x * x + s * s)) <= 1e-10);
      }
    }
  }
}

TEST_CASE("closed forms match the quadrature oracle") {
  const std::vector<double> kink{0.0};
  SUBCASE("relu at the pinned points") {
    for (double x : {-2.0, 0.0, 2.0}) {
      const double q = quadrature_convolve(relu, x, 1.0, 128, kink);
      CHECK(std::abs(diffused_apply(DiffusedKind::relu(), x, 1.0) - q) <= 1e-8);
    }
  }
  SUBCASE("erf, sign and relu over the grid") {
    auto erf1 = [](double t) { return std::erf(t); };
    for (double s : kGridSigma) {
      for (double x : kGridX) {
        CAPTURE(x);
        CAPTURE(s);
        CHECK(std::abs(diffused_apply(DiffusedKind::erf(1.0), x, s) - quadrature_convolve(erf1, x, s, 128)) <= 1e-6);
        CHECK(std::abs(diffused_apply(DiffusedKind::sign(), x, s) - quadrature_convolve(sign, x, s, 128, kink)) <= 1e-6);
        CHECK(std::abs(diffused_apply(DiffusedKind::relu(), x, s) - quadrature_convolve(relu, x, s, 128, kink)) <= 1e-6);
      }
    }
  }
  SUBCASE("tanh closed form is an approximation of the true transform") {
    // tanh * K has no elementary form; the closed form replaces tanh by a
    // scaled erf. The gap is a few 1e-3 and never reaches 2e-2 on the grid.
    auto th = [](double t) { return std::tanh(t); };
    double worst = 0.0;
    for (double s : kGridSigma) {
      for (double x : kGridX) {
        worst = std::max(worst, std::abs(diffused_apply(DiffusedKind::tanh(), x, s) - quadrature_convolve(th, x, s, 128)));
      }
    }
    CHECK(worst > 1e-3);
    CHECK(worst < 2e-2);
    CHECK(quadrature_convolve(th, 1.0, 1.0, 128) == doctest::Approx(0.5504005).epsilon(1e-6));
  }
  SUBCASE("erf with a steep slope") {
    auto erf5 = [](double t) { return std::erf(5.0 * t); };
    for (double x : kGridX) {
      CHECK(std::abs(diffused_apply(DiffusedKind::erf(5.0), x, 1.0) - quadrature_convolve(erf5, x, 1.0, 128)) <= 1e-6);
    }
  }
}

TEST_CASE("smoothing properties") {
  Rng rng(31);
  for (int k = 0; k < 500; ++k) {
    const double x = rng.uniform(-10, 10), s = rng.uniform(1e-3, 10);
    CHECK(diffused_apply(DiffusedKind::relu(), x, s) >= relu(x));
    CHECK(std::abs(diffused_apply(DiffusedKind::tanh(), x, s)) <= std::abs(std::tanh(x)) + 1e-15);
  }
  double prev = tanh_slope(0.0);
  CHECK(prev == 1.0);
  for (double s = 0.05; s <= 30.0; s += 0.05) {
    CHECK(tanh_slope(s) < prev);
    prev = tanh_slope(s);
  }
  for (double x : kGridX) {
    CHECK(std::abs(diffused_apply(DiffusedKind::tanh(), x, 1e-6) - std::tanh(x)) <= 1e-5);
    CHECK(std::abs(diffused_apply(DiffusedKind::erf(1.0), x, 1e-6) - std::erf(x)) <= 1e-5);
    CHECK(std::abs(diffused_apply(DiffusedKind::relu(), x, 1e-6) - relu(x)) <= 1e-5);
    if (x != 0.0) CHECK(std::abs(diffused_apply(DiffusedKind::sign(), x, 1e-6) - sign(x)) <= 1e-5);
  }
}

TEST_CASE("diffusion schedule") {
  const auto d = schedule_default();
  REQUIRE(d.stages().size() == 4);
  CHECK(d.total_epochs() == 400);
  CHECK(d.stages()[0].sigma == 30.0);
  CHECK(d.stages()[3].sigma == 1e-4);
  CHECK(DiffusionSchedule({{1.0, 5}}).total_epochs() == 5);
  CHECK_THROWS_AS(DiffusionSchedule({{1.0, 5}, {5.0, 5}}), DomainError);
  CHECK_THROWS_AS(DiffusionSchedule({{1.0, 5}, {1.0, 5}}), DomainError);
  CHECK_THROWS_AS(DiffusionSchedule({}), DomainError);
  CHECK_THROWS_AS(DiffusionSchedule({{0.0, 5}}), DomainError);
  CHECK_THROWS_AS(DiffusionSchedule({{1.0, 0}}), DomainError);
}
