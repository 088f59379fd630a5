#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "hybrid/quadrature.hpp"

namespace hybrid {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Probability mass function over a finite signal set, indexed from 0.
using Pmf = std::vector<double>;

inline void check_pmf(const Pmf& q, double tol = 1e-9) {
  double total = 0.0;
  for (double v : q) {
    if (v < 0.0 || !std::isfinite(v)) {
      throw std::invalid_argument("pmf entries must be finite and nonnegative");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > tol) {
    throw std::invalid_argument("pmf must sum to 1, got " +
                                std::to_string(total));
  }
}

inline double total_variation(const Pmf& a, const Pmf& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("total_variation: size mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return 0.5 * acc;
}

enum class ScoringRule { Log, Quadratic };

/// Score of forecast dist when outcome is realized. The log rule uses the
/// natural logarithm and returns -inf when dist(outcome) = 0; callers
/// propagate that sentinel rather than clamping it.
inline double score(ScoringRule rule, std::size_t outcome, const Pmf& dist) {
  if (outcome >= dist.size()) {
    throw std::invalid_argument("score: outcome index out of range");
  }
  switch (rule) {
    case ScoringRule::Log:
      return dist[outcome] > 0.0 ? std::log(dist[outcome]) : kNegInf;
    case ScoringRule::Quadratic: {
      double ss = 0.0;
      for (double v : dist) ss += v * v;
      return 2.0 * dist[outcome] - ss;
    }
  }
  throw std::logic_error("unreachable");
}

/// Expected score of the reported forecast when outcomes are drawn from
/// belief.
inline double expected_score(ScoringRule rule, const Pmf& belief,
                             const Pmf& reported) {
  if (belief.size() != reported.size()) {
    throw std::invalid_argument("expected_score: size mismatch");
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < belief.size(); ++k) {
    if (belief[k] == 0.0) continue;  // 0 * (-inf) contributes nothing
    const double s = score(rule, k, reported);
    if (s == kNegInf) return kNegInf;
    acc += belief[k] * s;
  }
  return acc;
}

/// KL divergence between finite distributions, natural log. Infinite when p
/// puts mass where q does not.
inline double kl_divergence(const Pmf& p, const Pmf& q) {
  if (p.size() != q.size()) {
    throw std::invalid_argument("kl_divergence: size mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) return std::numeric_limits<double>::infinity();
    acc += p[i] * std::log(p[i] / q[i]);
  }
  return acc;
}

/// KL divergence between densities on [lo, hi].
template <typename F, typename G>
inline double kl_divergence_cont(const F& p, const G& q, double lo, double hi,
                                 const QuadratureSpec& spec = {}) {
  return integrate_or_throw(
      [&](double s) {
        const double ps = p(s);
        if (ps <= 0.0) return 0.0;
        const double qs = q(s);
        if (qs <= 0.0) return std::numeric_limits<double>::infinity();
        return ps * std::log(ps / qs);
      },
      lo, hi, spec);
}

struct LogRatioBound {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

/// Checks the expected log-ratio inequality E_P[ln(Q/R)] <= E_P[ln(P/R)],
/// which is the Gibbs inequality in disguise: rhs - lhs = KL(P||Q) >= 0.
inline LogRatioBound log_ratio_bound_check(const Pmf& P, const Pmf& Q,
                                           const Pmf& R) {
  if (P.size() != Q.size() || P.size() != R.size()) {
    throw std::invalid_argument("log_ratio_bound_check: size mismatch");
  }
  LogRatioBound out;
  for (std::size_t i = 0; i < P.size(); ++i) {
    if (P[i] == 0.0) continue;
    if (R[i] == 0.0) {
      out.lhs = std::numeric_limits<double>::infinity();
      out.rhs = std::numeric_limits<double>::infinity();
      out.holds = true;  // both sides diverge together
      return out;
    }
    out.lhs += Q[i] > 0.0 ? P[i] * std::log(Q[i] / R[i]) : kNegInf;
    out.rhs += P[i] * std::log(P[i] / R[i]);
  }
  out.holds = out.lhs <= out.rhs + 1e-12;
  return out;
}

/// The convex potential G(q) = E_q[score(q, .)] extended off the simplex in
/// closed form (Log: sum q ln q, Quadratic: sum q^2). The closed forms are
/// what the diagonal-Hessian check below differentiates; the naive off-simplex
/// extension of expected_score(Q;Q) picks up spurious cross terms for the
/// quadratic rule.
inline double savage_potential(ScoringRule rule, const Pmf& q) {
  double acc = 0.0;
  switch (rule) {
    case ScoringRule::Log:
      for (double v : q) {
        if (v < 0.0) throw std::invalid_argument("potential needs q >= 0");
        if (v > 0.0) acc += v * std::log(v);
      }
      return acc;
    case ScoringRule::Quadratic:
      for (double v : q) acc += v * v;
      return acc;
  }
  throw std::logic_error("unreachable");
}

struct PsAssumptionReport {
  bool diagonal_ok = true;        // off-diagonal entries vanish
  bool positive_diagonal = true;  // strict convexity along each coordinate
  double max_off_diagonal = 0.0;
  double min_diagonal = std::numeric_limits<double>::infinity();
  int points_checked = 0;
  bool pass() const { return diagonal_ok && positive_diagonal; }
};

namespace detail {

// Enumerates interior simplex points with coordinates j/resolution, j >= 1.
inline void interior_simplex_points(int m, int resolution,
                                    std::vector<Pmf>* out) {
  Pmf q(static_cast<std::size_t>(m), 0.0);
  // recursive composition of `resolution` parts into m positive cells
  auto rec = [&](auto&& self, int cell, int remaining) -> void {
    if (cell == m - 1) {
      if (remaining >= 1) {
        q[cell] = static_cast<double>(remaining) / resolution;
        out->push_back(q);
      }
      return;
    }
    for (int j = 1; j <= remaining - (m - 1 - cell); ++j) {
      q[cell] = static_cast<double>(j) / resolution;
      self(self, cell + 1, remaining - j);
    }
  };
  rec(rec, 0, resolution);
}

}  // namespace detail

/// Verifies numerically that the rule's potential has a diagonal Hessian with
/// strictly positive entries on the interior of the m-outcome simplex, using
/// central second differences on a lattice of interior points.
inline PsAssumptionReport check_ps_assumption(ScoringRule rule, int m,
                                              int grid_resolution,
                                              double h = 1e-4,
                                              double off_diag_tol = 1e-6) {
  if (m < 2) throw std::invalid_argument("check_ps_assumption: need m >= 2");
  if (grid_resolution < m) {
    throw std::invalid_argument("check_ps_assumption: resolution too coarse");
  }
  std::vector<Pmf> points;
  detail::interior_simplex_points(m, grid_resolution, &points);

  PsAssumptionReport report;
  report.points_checked = static_cast<int>(points.size());
  for (const Pmf& q : points) {
    const std::size_t n = q.size();
    for (std::size_t i = 0; i < n; ++i) {
      Pmf qp = q, qm = q;
      qp[i] += h;
      qm[i] -= h;
      const double dii =
          (savage_potential(rule, qp) - 2.0 * savage_potential(rule, q) +
           savage_potential(rule, qm)) /
          (h * h);
      report.min_diagonal = std::min(report.min_diagonal, dii);
      if (dii <= 0.0) report.positive_diagonal = false;
      for (std::size_t j = i + 1; j < n; ++j) {
        Pmf qpp = q, qpm = q, qmp = q, qmm = q;
        qpp[i] += h; qpp[j] += h;
        qpm[i] += h; qpm[j] -= h;
        qmp[i] -= h; qmp[j] += h;
        qmm[i] -= h; qmm[j] -= h;
        const double dij =
            (savage_potential(rule, qpp) - savage_potential(rule, qpm) -
             savage_potential(rule, qmp) + savage_potential(rule, qmm)) /
            (4.0 * h * h);
        report.max_off_diagonal =
            std::max(report.max_off_diagonal, std::abs(dij));
        if (std::abs(dij) > off_diag_tol) report.diagonal_ok = false;
      }
    }
  }
  return report;
}

}  // namespace hybrid
