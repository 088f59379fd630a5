#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hybrid/quadrature.hpp"

using hybrid::integrate;
using hybrid::integrate_or_throw;
using hybrid::QuadratureSpec;

TEST_CASE("polynomials are integrated exactly") {
  const auto r = integrate([](double x) { return x * x; }, 0.0, 1.0);
  REQUIRE(r.converged);
  REQUIRE(std::abs(r.value - 1.0 / 3.0) < 1e-14);

  const auto r2 = integrate(
      [](double x) { return 5 * x * x * x * x - 2 * x + 7; }, -2.0, 3.0);
  // antiderivative x^5 - x^2 + 7x
  const double expect = (243.0 - 9.0 + 21.0) - (-32.0 - 4.0 - 14.0);
  REQUIRE(std::abs(r2.value - expect) < 1e-10);
}

TEST_CASE("transcendental integrands meet the default tolerances") {
  const auto r = integrate([](double x) { return std::exp(x); }, 0.0, 2.0);
  REQUIRE(r.converged);
  REQUIRE(std::abs(r.value - (std::exp(2.0) - 1.0)) < 1e-10);
}

TEST_CASE("a sharp peak inside a wide interval is refined adaptively") {
  // standard normal bump centered at 0.3 on [-50, 50]; a non-adaptive rule
  // at this width misses the peak entirely
  const double mu = 0.3, sigma = 1e-1;
  const auto r = integrate(
      [&](double x) {
        const double z = (x - mu) / sigma;
        return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * 3.14159265358979323846));
      },
      -50.0, 50.0);
  REQUIRE(r.converged);
  REQUIRE(std::abs(r.value - 1.0) < 1e-8);
}

TEST_CASE("empty interval integrates to zero") {
  const auto r = integrate([](double x) { return x; }, 2.0, 2.0);
  REQUIRE(r.converged);
  REQUIRE(r.value == 0.0);
}

TEST_CASE("orientation flips the sign") {
  const auto fwd = integrate([](double x) { return x; }, 0.0, 1.0);
  const auto bwd = integrate([](double x) { return x; }, 1.0, 0.0);
  REQUIRE(std::abs(fwd.value + bwd.value) < 1e-14);
}

TEST_CASE("integrate_or_throw returns the value on smooth input") {
  REQUIRE(std::abs(integrate_or_throw([](double x) { return std::sin(x); },
                                      0.0, 3.141592653589793) -
                   2.0) < 1e-10);
}
