#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <queue>
#include <stdexcept>
#include <vector>

namespace hybrid {

/// Tolerances for the adaptive integrator. Defaults are tight enough for the
/// payment computations built on top of it.
struct QuadratureSpec {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  int max_subdivisions = 1 << 16;
  // The interval is pre-split into this many panels before adaptive
  // refinement starts, so narrow features that a single 15-point rule would
  // sample past still register in some panel's error estimate.
  int initial_panels = 8;
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  bool converged = false;
};

namespace detail {

// 15-point Kronrod rule with embedded 7-point Gauss rule on [-1, 1].
// Abscissae are symmetric; only the nonnegative half is tabulated.
inline constexpr double kKronrodNodes[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769,
    0.741531185599394, 0.586087235467691, 0.405845151377397,
    0.207784955007898, 0.000000000000000};
inline constexpr double kKronrodWeights[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728};
inline constexpr double kGaussWeights[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469};

template <typename F>
inline void gauss_kronrod_15(const F& f, double a, double b, double* result,
                             double* error) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double fv[15];
  for (int i = 0; i < 7; ++i) {
    fv[i] = f(center - half * kKronrodNodes[i]);
    fv[14 - i] = f(center + half * kKronrodNodes[i]);
  }
  fv[7] = f(center);

  double kronrod = kKronrodWeights[7] * fv[7];
  double gauss = kGaussWeights[3] * fv[7];
  for (int i = 0; i < 7; ++i) {
    kronrod += kKronrodWeights[i] * (fv[i] + fv[14 - i]);
    if (i % 2 == 1) gauss += kGaussWeights[i / 2] * (fv[i] + fv[14 - i]);
  }
  *result = kronrod * half;
  const double diff = (kronrod - gauss) * half;
  *error = std::pow(200.0 * std::abs(diff), 1.5);
  if (!std::isfinite(*error)) *error = std::abs(diff);
}

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& other) const { return error < other.error; }
};

}  // namespace detail

/// Adaptive composite Gauss-Kronrod integration of f over [a, b].
template <typename F>
inline QuadratureResult integrate(const F& f, double a, double b,
                                  const QuadratureSpec& spec = {}) {
  QuadratureResult out;
  if (a == b) {
    out.converged = true;
    return out;
  }

  const int panels = spec.initial_panels > 0 ? spec.initial_panels : 1;
  std::priority_queue<detail::Segment> queue;
  double total = 0.0;
  double total_error = 0.0;
  for (int i = 0; i < panels; ++i) {
    detail::Segment seg{a + (b - a) * i / panels, a + (b - a) * (i + 1) / panels,
                        0.0, 0.0};
    detail::gauss_kronrod_15(f, seg.a, seg.b, &seg.value, &seg.error);
    total += seg.value;
    total_error += seg.error;
    queue.push(seg);
  }

  int subdivisions = 0;
  while (total_error > spec.abs_tol &&
         total_error > spec.rel_tol * std::abs(total) &&
         subdivisions < spec.max_subdivisions) {
    detail::Segment worst = queue.top();
    queue.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    detail::Segment left{worst.a, mid, 0.0, 0.0};
    detail::Segment right{mid, worst.b, 0.0, 0.0};
    detail::gauss_kronrod_15(f, left.a, left.b, &left.value, &left.error);
    detail::gauss_kronrod_15(f, right.a, right.b, &right.value, &right.error);
    // If the children jointly disagree with the parent, neither of their own
    // error estimates can be trusted; keep the discrepancy on the books so
    // refinement continues here instead of silently accepting either side.
    const double disc = std::abs(left.value + right.value - worst.value);
    if (disc > left.error + right.error) {
      left.error += 0.5 * disc;
      right.error += 0.5 * disc;
    }
    total += left.value + right.value - worst.value;
    total_error += left.error + right.error - worst.error;
    queue.push(left);
    queue.push(right);
    ++subdivisions;
  }

  out.value = total;
  out.error = total_error;
  out.converged = total_error <= spec.abs_tol ||
                  total_error <= spec.rel_tol * std::abs(total);
  return out;
}

/// Integration that throws on non-convergence; used where a hard accuracy
/// guarantee is needed rather than a best effort.
template <typename F>
inline double integrate_or_throw(const F& f, double a, double b,
                                 const QuadratureSpec& spec = {}) {
  const QuadratureResult r = integrate(f, a, b, spec);
  if (!r.converged) {
    throw std::runtime_error("quadrature failed to converge (error estimate " +
                             std::to_string(r.error) + ")");
  }
  return r.value;
}

}  // namespace hybrid
