#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "hybrid/cem.hpp"
#include "hybrid/mibm.hpp"
#include "hybrid/world.hpp"

namespace hybrid {

enum class MechanismKind { Cem, Mibm, Ecgm, Sppm };

inline const char* mechanism_name(MechanismKind k) {
  switch (k) {
    case MechanismKind::Cem: return "cem";
    case MechanismKind::Mibm: return "mibm";
    case MechanismKind::Ecgm: return "ecgm";
    case MechanismKind::Sppm: return "sppm";
  }
  return "?";
}

/// The mechanism handed to the verifier, with whatever context it needs to
/// price a (true signal, claimed report) pair in expectation.
struct MechanismUnderTest {
  MechanismKind kind = MechanismKind::Ecgm;
  const CemCoefficients* cem = nullptr;  // required for Cem
  const MibmConfig* mibm = nullptr;      // required for Mibm
  int sppm_group = 1;                    // which group pool Sppm runs on
  ScoringRule sppm_rule = ScoringRule::Log;
};

/// A signal or report reduced to what the payment functionals depend on: its
/// space, its element (discrete only), and its posterior over Y.
struct SignalPoint {
  int space = 0;    // 0 = expert
  int element = 0;  // 1-based, discrete spaces only
  double posterior = 0.0;

  static SignalPoint expert(double p) { return {0, 0, p}; }
  static SignalPoint discrete(const HybridWorld& w, int l, int k) {
    return {l, k, posterior_y(w, make_discrete(l, k))};
  }
  static SignalPoint from_report(const HybridWorld& w, const Report& r) {
    if (const auto* d = std::get_if<DiscreteReport>(&r)) {
      return discrete(w, d->group, d->element);
    }
    return expert(posterior_y(w, r));
  }

  std::string describe() const {
    if (space == 0) return "expert(p=" + std::to_string(posterior) + ")";
    return "group" + std::to_string(space) + ":theta" +
           std::to_string(element);
  }
};

/// Memoizes the two partial expectations I_y(p_report) behind every
/// expert-side expected payment; the verification scans revisit the same
/// claimed posteriors for many true signals.
class EeCrossCache {
 public:
  explicit EeCrossCache(const HybridWorld& world,
                        const QuadratureSpec& spec = {})
      : world_(&world), spec_(spec) {}

  double ee(double p_belief, double p_report) const {
    const auto [i0, i1] = partials(p_report);
    return (1.0 - p_belief) * i0 + p_belief * i1;
  }

  double ee_star(double p) const { return ee(p, p); }

 private:
  std::pair<double, double> partials(double p_report) const {
    auto it = cache_.find(p_report);
    if (it != cache_.end()) return it->second;
    const auto v = detail::log_ratio_partials(*world_, p_report, spec_);
    cache_.emplace(p_report, v);
    return v;
  }

  const HybridWorld* world_;
  QuadratureSpec spec_;
  mutable std::map<double, std::pair<double, double>> cache_;
};

/// Expected shifted score in discrete space l when the deviator's belief
/// mixes at p_belief but her claimed element induces the p_report mixture.
inline double nn_cross(const HybridWorld& world, int l, double p_belief,
                       double p_report, ScoringRule rule) {
  const Pmf belief = mixture_pmf(world, l, p_belief);
  const Pmf reported = mixture_pmf(world, l, p_report);
  const Pmf prior = prior_signal_distribution(world, l);
  const double a = expected_score(rule, belief, reported);
  const double b = expected_score(rule, belief, prior);
  if (a == kNegInf) return kNegInf;
  return a - b;
}

namespace detail {

inline double expected_payment_point(const HybridWorld& world,
                                     const MechanismUnderTest& mech,
                                     const EeCrossCache& cache,
                                     const SignalPoint& truth,
                                     const SignalPoint& claim,
                                     const std::vector<int>& counts) {
  const double pt = truth.posterior;
  switch (mech.kind) {
    case MechanismKind::Ecgm:
      if (claim.space != 0) {
        throw std::invalid_argument("ECGM has only the expert pool");
      }
      return cache.ee(pt, claim.posterior);
    case MechanismKind::Sppm:
      if (claim.space != mech.sppm_group) {
        throw std::invalid_argument("SPPM runs on a single group pool");
      }
      return nn_cross(world, claim.space, pt, claim.posterior, mech.sppm_rule);
    case MechanismKind::Cem: {
      if (mech.cem == nullptr) {
        throw std::invalid_argument("CEM context missing coefficients");
      }
      if (claim.space == 0) return cache.ee(pt, claim.posterior);
      const CemCoefficient& c = mech.cem->at(claim.space, claim.element);
      if (c.degenerate) return 0.0;
      return c.a * nn_cross(world, claim.space, pt, c.posterior,
                            mech.cem->rule) +
             c.b;
    }
    case MechanismKind::Mibm: {
      if (mech.mibm == nullptr) {
        throw std::invalid_argument("MIBM context missing config");
      }
      if (counts.size() != static_cast<std::size_t>(world.num_groups() + 1)) {
        throw std::invalid_argument("MIBM needs per-space pool counts");
      }
      // the deviator's report sits in the claimed pool, so pool sizes shift
      // by one when she crosses spaces
      std::vector<int> t(counts);
      if (truth.space != claim.space) {
        t[static_cast<std::size_t>(truth.space)] -= 1;
        t[static_cast<std::size_t>(claim.space)] += 1;
      }
      double total = 0.0;
      for (std::size_t i = 0; i < t.size(); ++i) {
        // a peer in space i exists iff the pool has a member besides the
        // deviator herself
        const int available =
            t[i] - (static_cast<int>(i) == claim.space ? 1 : 0);
        if (available < 1) continue;
        const double alpha =
            mech.mibm->schedule.alpha(claim.space, static_cast<int>(i), t);
        const ScoringRule rule = mech.mibm->rule_for(static_cast<int>(i));
        double term;
        if (i == 0) {
          if (rule != ScoringRule::Log) {
            throw std::invalid_argument("expert-target terms need Log");
          }
          term = cache.ee(pt, claim.posterior);
        } else {
          term = nn_cross(world, static_cast<int>(i), pt, claim.posterior,
                          rule);
        }
        if (term == kNegInf) return kNegInf;
        total += alpha * term;
      }
      return total;
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace detail

/// Expected payment of a deviator with the given true signal who files the
/// claimed report, all other agents truthful; the expectation runs over the
/// peers' signals conditioned on the true signal. Pool counts only matter for
/// MIBM's weights.
inline double expected_payment(const HybridWorld& world,
                               const MechanismUnderTest& mech,
                               const Report& true_signal,
                               const Report& claimed_report,
                               const std::vector<int>& counts = {}) {
  EeCrossCache cache(world);
  return detail::expected_payment_point(
      world, mech, cache, SignalPoint::from_report(world, true_signal),
      SignalPoint::from_report(world, claimed_report), counts);
}

/// Posterior points the verifier scans for the expert space: a uniform grid
/// over the achievable posterior range plus every discrete element's
/// posterior that falls inside it.
struct DeviationGrid {
  std::vector<double> expert_posteriors;

  static DeviationGrid build(const HybridWorld& world, int n = 201) {
    if (n < 2) throw std::invalid_argument("grid needs at least 2 points");
    const auto [lo, hi] = expert_posterior_range(world);
    DeviationGrid g;
    for (int i = 0; i < n; ++i) {
      g.expert_posteriors.push_back(lo + (hi - lo) * i / (n - 1));
    }
    for (int l = 1; l <= world.num_groups(); ++l) {
      for (int k = 1; k <= static_cast<int>(world.group(l).size()); ++k) {
        const double p = posterior_y(world, make_discrete(l, k));
        if (p >= lo && p <= hi) g.expert_posteriors.push_back(p);
      }
    }
    std::sort(g.expert_posteriors.begin(), g.expert_posteriors.end());
    g.expert_posteriors.erase(
        std::unique(g.expert_posteriors.begin(), g.expert_posteriors.end()),
        g.expert_posteriors.end());
    return g;
  }
};

struct DeviationRecord {
  SignalPoint truth;
  SignalPoint claim;
  double truthful_payment = 0.0;
  double deviant_payment = 0.0;
  double gain = 0.0;          // deviant - truthful; positive = violation risk
  double posterior_gap = 0.0; // |p(truth) - p(claim)| over Y
  double induced_tv = 0.0;    // max TV gap between induced peer posteriors
};

struct VerificationReport {
  double tolerance = 1e-7;
  double zero_tol = 1e-9;       // |gain| below this counts as a tie
  double match_tol = 1e-6;      // posterior gap below this counts as a match
  // Strictness is quadratic in the posterior gap, so at zero_tol the scan
  // cannot distinguish "paid exactly alike" from "paid a loss of order
  // curvature * gap^2" once the gap drops below sqrt(zero_tol / curvature).
  // Zero-gain pairs closer than this are recorded as ties, not violations.
  double resolution_gap = 1e-3;
  double max_gain = -std::numeric_limits<double>::infinity();
  double min_nonmatching_loss = std::numeric_limits<double>::infinity();
  long long pairs_scanned = 0;
  std::vector<DeviationRecord> flagged;  // violations and non-matching ties
  std::vector<DeviationRecord> ties;     // zero-gain at matching posteriors
  bool gains_ok = true;
  bool ties_ok = true;
  bool pass() const { return gains_ok && ties_ok; }
};

namespace detail {

inline void scan_pairs(const HybridWorld& world,
                       const MechanismUnderTest& mech,
                       const EeCrossCache& cache,
                       const std::vector<SignalPoint>& truths,
                       const std::vector<SignalPoint>& claims,
                       const std::vector<int>& counts,
                       VerificationReport* report) {
  for (const SignalPoint& truth : truths) {
    const SignalPoint truthful_claim = truth;
    const double truthful = expected_payment_point(
        world, mech, cache, truth, truthful_claim, counts);
    for (const SignalPoint& claim : claims) {
      if (claim.space == truth.space &&
          claim.space != 0 && claim.element == truth.element) {
        continue;  // the truthful report itself
      }
      if (claim.space == 0 && truth.space == 0 &&
          claim.posterior == truth.posterior) {
        continue;
      }
      const double deviant =
          expected_payment_point(world, mech, cache, truth, claim, counts);
      DeviationRecord rec;
      rec.truth = truth;
      rec.claim = claim;
      rec.truthful_payment = truthful;
      rec.deviant_payment = deviant;
      rec.gain = deviant - truthful;
      rec.posterior_gap = std::abs(truth.posterior - claim.posterior);
      ++report->pairs_scanned;
      report->max_gain = std::max(report->max_gain, rec.gain);
      const bool match = rec.posterior_gap <= report->match_tol;
      if (!match) {
        report->min_nonmatching_loss =
            std::min(report->min_nonmatching_loss, std::abs(rec.gain));
      }
      if (rec.gain > report->tolerance) {
        report->gains_ok = false;
        report->flagged.push_back(rec);
      } else if (std::abs(rec.gain) <= report->zero_tol) {
        if (match || rec.posterior_gap <= report->resolution_gap) {
          rec.induced_tv = 0.0;
          report->ties.push_back(rec);
        } else {
          rec.induced_tv = induced_posterior_distance(world, truth.posterior,
                                                      claim.posterior);
          report->ties_ok = false;
          report->flagged.push_back(rec);
        }
      }
    }
  }
}

inline std::vector<SignalPoint> discrete_points(const HybridWorld& world,
                                                int l) {
  std::vector<SignalPoint> out;
  for (int k = 1; k <= static_cast<int>(world.group(l).size()); ++k) {
    out.push_back(SignalPoint::discrete(world, l, k));
  }
  return out;
}

inline std::vector<SignalPoint> expert_points(const DeviationGrid& grid) {
  std::vector<SignalPoint> out;
  for (double p : grid.expert_posteriors) out.push_back(SignalPoint::expert(p));
  return out;
}

}  // namespace detail

/// Scans same-space deviations for every true signal: expert grid against
/// expert grid, and each group element against its siblings.
inline VerificationReport verify_interior(const HybridWorld& world,
                                          const MechanismUnderTest& mech,
                                          const DeviationGrid& grid,
                                          double tol = 1e-7,
                                          std::vector<int> counts = {}) {
  if (counts.empty()) {
    counts.assign(static_cast<std::size_t>(world.num_groups() + 1), 3);
  }
  VerificationReport report;
  report.tolerance = tol;
  EeCrossCache cache(world);

  const bool has_expert = mech.kind != MechanismKind::Sppm;
  if (has_expert) {
    const auto pts = detail::expert_points(grid);
    detail::scan_pairs(world, mech, cache, pts, pts, counts, &report);
  }
  if (mech.kind != MechanismKind::Ecgm) {
    const int l_from = mech.kind == MechanismKind::Sppm ? mech.sppm_group : 1;
    const int l_to = mech.kind == MechanismKind::Sppm ? mech.sppm_group
                                                      : world.num_groups();
    for (int l = l_from; l <= l_to; ++l) {
      const auto pts = detail::discrete_points(world, l);
      detail::scan_pairs(world, mech, cache, pts, pts, counts, &report);
    }
  }
  return report;
}

/// Scans cross-space deviations: expert true signals claiming every discrete
/// element, and each discrete element claiming every expert grid point and
/// every other group's elements. Mechanisms with a single pool have no
/// exterior and pass vacuously.
inline VerificationReport verify_exterior(const HybridWorld& world,
                                          const MechanismUnderTest& mech,
                                          const DeviationGrid& grid,
                                          double tol = 1e-7,
                                          std::vector<int> counts = {}) {
  if (counts.empty()) {
    counts.assign(static_cast<std::size_t>(world.num_groups() + 1), 3);
  }
  VerificationReport report;
  report.tolerance = tol;
  if (mech.kind == MechanismKind::Ecgm || mech.kind == MechanismKind::Sppm) {
    return report;  // single pool, nothing to cross into
  }
  EeCrossCache cache(world);
  const auto expert_pts = detail::expert_points(grid);

  // expert -> each group element
  std::vector<SignalPoint> all_discrete;
  for (int l = 1; l <= world.num_groups(); ++l) {
    const auto pts = detail::discrete_points(world, l);
    all_discrete.insert(all_discrete.end(), pts.begin(), pts.end());
  }
  detail::scan_pairs(world, mech, cache, expert_pts, all_discrete, counts,
                     &report);

  // each group element -> expert grid and other groups' elements
  for (int l = 1; l <= world.num_groups(); ++l) {
    const auto truths = detail::discrete_points(world, l);
    detail::scan_pairs(world, mech, cache, truths, expert_pts, counts,
                       &report);
    for (int h = 1; h <= world.num_groups(); ++h) {
      if (h == l) continue;
      const auto claims = detail::discrete_points(world, h);
      detail::scan_pairs(world, mech, cache, truths, claims, counts, &report);
    }
  }
  return report;
}

}  // namespace hybrid
