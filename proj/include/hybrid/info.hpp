#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include "hybrid/quadrature.hpp"
#include "hybrid/scoring.hpp"
#include "hybrid/world.hpp"

namespace hybrid {

/// Conditional likelihood pair (L(report|Y=0), L(report|Y=1)); a density value
/// for expert reports, a PMF value for discrete ones.
inline std::pair<double, double> report_likelihoods(const HybridWorld& world,
                                                    const Report& r) {
  if (const auto* e = std::get_if<ExpertReport>(&r)) {
    return {world.expert.f0(e->value), world.expert.f1(e->value)};
  }
  const DiscreteReport& d = std::get<DiscreteReport>(r);
  const NonExpertGroup& g = world.group(d.group);
  return {g.q0[static_cast<std::size_t>(d.element - 1)],
          g.q1[static_cast<std::size_t>(d.element - 1)]};
}

enum class PmiForm { PosteriorProduct, LikelihoodProduct, Cross };

/// Pointwise mutual information of two conditionally independent reports,
/// in its posterior-product form: sum_y Pr[y|a] Pr[y|b] / Pr[y].
inline double pmi_from_posteriors(double p_a, double p_b, double P) {
  return p_a * p_b / P + (1.0 - p_a) * (1.0 - p_b) / (1.0 - P);
}

inline double pmi_via(const HybridWorld& world, PmiForm form, const Report& a,
                      const Report& b) {
  const double P = world.prior;
  const auto [a0, a1] = report_likelihoods(world, a);
  const auto [b0, b1] = report_likelihoods(world, b);
  const double pr_a = (1.0 - P) * a0 + P * a1;
  const double pr_b = (1.0 - P) * b0 + P * b1;
  switch (form) {
    case PmiForm::PosteriorProduct:
      return pmi_from_posteriors(P * a1 / pr_a, P * b1 / pr_b, P);
    case PmiForm::LikelihoodProduct:
      // Pr[a,b] / (Pr[a] Pr[b]) with the joint factored through Y
      return ((1.0 - P) * a0 * b0 + P * a1 * b1) / (pr_a * pr_b);
    case PmiForm::Cross:
      // Pr[a|b] / Pr[a]
      return ((1.0 - P * b1 / pr_b) * a0 + (P * b1 / pr_b) * a1) / pr_a;
  }
  throw std::logic_error("unreachable");
}

inline double pmi(const HybridWorld& world, const Report& a, const Report& b) {
  return pmi_via(world, PmiForm::PosteriorProduct, a, b);
}

/// Shannon mutual information between the signals of two report spaces (two
/// distinct agents; for space_a == space_b this is the MI between two
/// conditionally independent peers of that space).
inline double mutual_information(const HybridWorld& world, int space_a,
                                 int space_b,
                                 const QuadratureSpec& spec = {}) {
  const double P = world.prior;
  auto xlogx_term = [](double joint, double pmi_val) {
    return joint > 0.0 && pmi_val > 0.0 ? joint * std::log(pmi_val) : 0.0;
  };

  if (space_a >= 1 && space_b >= 1) {
    const NonExpertGroup& ga = world.group(space_a);
    const NonExpertGroup& gb = world.group(space_b);
    double acc = 0.0;
    for (std::size_t j = 0; j < ga.size(); ++j) {
      for (std::size_t k = 0; k < gb.size(); ++k) {
        const double joint = (1.0 - P) * ga.q0[j] * gb.q0[k] +
                             P * ga.q1[j] * gb.q1[k];
        acc += xlogx_term(
            joint, pmi(world, make_discrete(space_a, static_cast<int>(j) + 1),
                       make_discrete(space_b, static_cast<int>(k) + 1)));
      }
    }
    return acc;
  }

  if (space_a == 0 && space_b == 0) {
    // double integral over two expert draws; the inner integral reuses the
    // same adaptive rule with the caller's tolerances
    return integrate_or_throw(
        [&](double s) {
          const double f0s = world.expert.f0(s);
          const double f1s = world.expert.f1(s);
          const double ms = (1.0 - P) * f0s + P * f1s;
          const double ps = P * f1s / ms;
          return integrate_or_throw(
              [&](double t) {
                const double f0t = world.expert.f0(t);
                const double f1t = world.expert.f1(t);
                const double mt = (1.0 - P) * f0t + P * f1t;
                const double pt = P * f1t / mt;
                const double joint = (1.0 - P) * f0s * f0t + P * f1s * f1t;
                return xlogx_term(joint, pmi_from_posteriors(ps, pt, P));
              },
              world.expert.lo(), world.expert.hi(), spec);
        },
        world.expert.lo(), world.expert.hi(), spec);
  }

  // mixed case: integrate the expert coordinate, sum the discrete one
  const int l = space_a == 0 ? space_b : space_a;
  const NonExpertGroup& g = world.group(l);
  return integrate_or_throw(
      [&](double s) {
        const double f0s = world.expert.f0(s);
        const double f1s = world.expert.f1(s);
        double acc = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) {
          const double joint =
              (1.0 - P) * f0s * g.q0[k] + P * f1s * g.q1[k];
          acc += xlogx_term(
              joint, pmi(world, make_expert(s),
                         make_discrete(l, static_cast<int>(k) + 1)));
        }
        return acc;
      },
      world.expert.lo(), world.expert.hi(), spec);
}

}  // namespace hybrid
