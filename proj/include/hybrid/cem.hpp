#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "hybrid/mechanisms.hpp"
#include "hybrid/quadrature.hpp"
#include "hybrid/scoring.hpp"
#include "hybrid/world.hpp"

namespace hybrid {

namespace detail {

/// Partial expectations of the log mixture ratio under each conditional
/// density: I_y(p) = integral f_y * ln(mix_p / mix_P). Every expert-side
/// expected payment is a belief-weighted combination of these two numbers,
/// which is what makes the verification scans cheap.
inline std::pair<double, double> log_ratio_partials(
    const HybridWorld& world, double p_report,
    const QuadratureSpec& spec = {}) {
  double i0 = 0.0, i1 = 0.0;
  // one sweep computes both components
  i0 = integrate_or_throw(
      [&](double s) {
        const double num = mixture_density(world, p_report, s);
        const double den = mixture_density(world, world.prior, s);
        return world.expert.f0(s) * std::log(num / den);
      },
      world.expert.lo(), world.expert.hi(), spec);
  i1 = integrate_or_throw(
      [&](double s) {
        const double num = mixture_density(world, p_report, s);
        const double den = mixture_density(world, world.prior, s);
        return world.expert.f1(s) * std::log(num / den);
      },
      world.expert.lo(), world.expert.hi(), spec);
  return {i0, i1};
}

}  // namespace detail

/// Expected ECGM payment of an expert whose belief is p_belief but who
/// reports a signal with posterior p_report, the peer truthful.
inline double ee_cross(const HybridWorld& world, double p_belief,
                       double p_report, const QuadratureSpec& spec = {}) {
  const auto [i0, i1] = detail::log_ratio_partials(world, p_report, spec);
  return (1.0 - p_belief) * i0 + p_belief * i1;
}

/// Truthful expert expected payment at posterior p: the KL divergence of the
/// belief mixture from the prior mixture. Nonnegative, zero iff p equals the
/// prior.
inline double ee_star(const HybridWorld& world, double p,
                      const QuadratureSpec& spec = {}) {
  return ee_cross(world, p, p, spec);
}

/// Analytic d/dp of ee_star: integral (f1 - f0) ln(mix_p / mix_P). The
/// envelope property kills the inner report derivative, leaving only the
/// belief derivative.
inline double ee_star_derivative(const HybridWorld& world, double p,
                                 const QuadratureSpec& spec = {}) {
  return integrate_or_throw(
      [&](double s) {
        const double num = mixture_density(world, p, s);
        const double den = mixture_density(world, world.prior, s);
        return (world.expert.f1(s) - world.expert.f0(s)) *
               std::log(num / den);
      },
      world.expert.lo(), world.expert.hi(), spec);
}

/// Expected SPPM payment of a group-l agent claiming element k when the
/// belief over the peer's signal is the p-mixture; affine in p.
inline double nn_line(const HybridWorld& world, int l, int k, double p,
                      ScoringRule rule = ScoringRule::Log) {
  const NonExpertGroup& g = world.group(l);
  double acc = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double w = (1.0 - p) * g.q0[j] + p * g.q1[j];
    if (w == 0.0) continue;
    acc += w * sppm_pay(world, l, k, static_cast<int>(j) + 1, rule);
  }
  return acc;
}

inline double nn_line_slope(const HybridWorld& world, int l, int k,
                            ScoringRule rule = ScoringRule::Log) {
  const NonExpertGroup& g = world.group(l);
  double acc = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double w = g.q1[j] - g.q0[j];
    if (w == 0.0) continue;
    acc += w * sppm_pay(world, l, k, static_cast<int>(j) + 1, rule);
  }
  return acc;
}

struct CemCoefficient {
  double a = 0.0;
  double b = 0.0;
  double posterior = 0.0;
  bool degenerate = false;         // q0(k) = q1(k): element carries no signal
  double tangency_residual = 0.0;  // |ee_star(p_k) - (a nn(p_k) + b)|
  double slope_residual = 0.0;     // |ee_star'(p_k) - a * slope|
  bool posterior_reachable = true; // false when no expert signal matches p_k
};

struct CemCoefficients {
  // indexed [group-1][element-1]
  std::vector<std::vector<CemCoefficient>> by_group;
  ScoringRule rule = ScoringRule::Log;
  double quad_abs_tol = 1e-10;
  double quad_rel_tol = 1e-8;
  std::vector<std::string> warnings;

  const CemCoefficient& at(int l, int k) const {
    return by_group[static_cast<std::size_t>(l - 1)]
                   [static_cast<std::size_t>(k - 1)];
  }
};

/// Per-element affine transform of the SPPM payment, tuned so the transformed
/// expected-payment line is tangent to the expert payment curve at the
/// element's posterior. Degenerate elements get the zero transform.
inline CemCoefficients compute_coefficients(
    const HybridWorld& world, ScoringRule rule = ScoringRule::Log,
    const QuadratureSpec& spec = {}) {
  CemCoefficients out;
  out.rule = rule;
  out.quad_abs_tol = spec.abs_tol;
  out.quad_rel_tol = spec.rel_tol;
  const auto [p_lo, p_hi] = expert_posterior_range(world);
  for (int l = 1; l <= world.num_groups(); ++l) {
    const NonExpertGroup& g = world.group(l);
    std::vector<CemCoefficient> row;
    for (int k = 1; k <= static_cast<int>(g.size()); ++k) {
      CemCoefficient c;
      const std::size_t ki = static_cast<std::size_t>(k - 1);
      if (std::abs(g.q0[ki] - g.q1[ki]) <= 1e-14) {
        c.degenerate = true;
        c.posterior = world.prior;
        row.push_back(c);
        continue;
      }
      c.posterior = posterior_y(world, make_discrete(l, k));
      c.posterior_reachable = c.posterior >= p_lo - 1e-12 &&
                              c.posterior <= p_hi + 1e-12;
      if (!c.posterior_reachable) {
        out.warnings.push_back(
            "group " + std::to_string(l) + " element " + std::to_string(k) +
            ": posterior " + std::to_string(c.posterior) +
            " unreachable by any expert signal; the truthfulness guarantee "
            "does not cover this element");
      }
      const double slope = nn_line_slope(world, l, k, rule);
      if (std::abs(slope) < 1e-12) {
        throw ModelError("zero payment-line slope for a non-degenerate "
                         "element (group " + std::to_string(l) +
                         ", element " + std::to_string(k) + ")");
      }
      c.a = ee_star_derivative(world, c.posterior, spec) / slope;
      const double line_at_pk = nn_line(world, l, k, c.posterior, rule);
      const double curve_at_pk = ee_star(world, c.posterior, spec);
      c.b = curve_at_pk - c.a * line_at_pk;
      c.tangency_residual =
          std::abs(curve_at_pk - (c.a * line_at_pk + c.b));
      c.slope_residual = std::abs(
          ee_star_derivative(world, c.posterior, spec) - c.a * slope);
      row.push_back(c);
    }
    out.by_group.push_back(std::move(row));
  }
  return out;
}

/// Realized CEM payment: ECGM within the expert pool, the per-element affine
/// transform of SPPM within each group pool. Pairing is always within one
/// pool.
inline double cem_pay(const HybridWorld& world, const CemCoefficients& coeffs,
                      const Report& agent, const Report& peer,
                      ScoringRule rule = ScoringRule::Log) {
  const int la = report_space(agent);
  const int lp = report_space(peer);
  if (la != lp) {
    throw std::invalid_argument(
        "cem_pay pairs agents within one report pool; got spaces " +
        std::to_string(la) + " and " + std::to_string(lp));
  }
  if (la == 0) {
    return ecgm_pay(posterior_y(world, agent), posterior_y(world, peer),
                    world.prior);
  }
  const DiscreteReport& da = std::get<DiscreteReport>(agent);
  const DiscreteReport& dp = std::get<DiscreteReport>(peer);
  const CemCoefficient& c = coeffs.at(la, da.element);
  if (c.degenerate) return 0.0;
  const double r = sppm_pay(world, la, da.element, dp.element, rule);
  if (r == kNegInf) return kNegInf;
  return c.a * r + c.b;
}

}  // namespace hybrid
