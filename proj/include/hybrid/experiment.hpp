#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "hybrid/world.hpp"

namespace hybrid {

enum class BehaviorKind { Truthful, EcgmUniform, CoarsenToGroup };

struct BehaviorModel {
  BehaviorKind kind = BehaviorKind::Truthful;
  int target_group = 0;  // CoarsenToGroup only

  static BehaviorModel truthful() { return {BehaviorKind::Truthful, 0}; }
  static BehaviorModel ecgm_uniform() {
    return {BehaviorKind::EcgmUniform, 0};
  }
  static BehaviorModel coarsen(int l) {
    return {BehaviorKind::CoarsenToGroup, l};
  }
};

/// What a behavior model hands to the aggregator: either a probability report
/// or an element report, plus the generative likelihood pair
/// (L(report|Y=0), L(report|Y=1)) of the realized report under the behavior.
struct InterpretedReport {
  bool is_probability = false;
  double probability = 0.0;  // probability reports
  int group = 0;             // element reports: target group
  int element = 0;           //   and element, 1-based
  double like0 = 0.0;
  double like1 = 0.0;
};

namespace detail {

/// Interval endpoints of a thresholds-derived group, support ends included.
inline std::vector<double> group_cuts(const HybridWorld& world, int l) {
  const NonExpertGroup& g = world.group(l);
  if (!g.thresholds) {
    throw std::invalid_argument(
        "group " + g.label +
        " has no interval structure; coarsening needs thresholds-derived "
        "groups");
  }
  std::vector<double> cuts;
  cuts.push_back(world.expert.lo());
  cuts.insert(cuts.end(), g.thresholds->begin(), g.thresholds->end());
  cuts.push_back(world.expert.hi());
  return cuts;
}

inline int interval_of(const std::vector<double>& cuts, double s) {
  for (std::size_t k = 1; k + 1 < cuts.size(); ++k) {
    if (s <= cuts[k]) return static_cast<int>(k);
  }
  return static_cast<int>(cuts.size()) - 1;
}

/// Whether interval a of cuts_a overlaps interval b of cuts_b (shared
/// endpoints do not count as overlap).
inline bool intervals_overlap(const std::vector<double>& cuts_a, int a,
                              const std::vector<double>& cuts_b, int b) {
  const double lo = std::max(cuts_a[static_cast<std::size_t>(a - 1)],
                             cuts_b[static_cast<std::size_t>(b - 1)]);
  const double hi = std::min(cuts_a[static_cast<std::size_t>(a)],
                             cuts_b[static_cast<std::size_t>(b)]);
  return hi > lo + 1e-12;
}

}  // namespace detail

/// Applies a behavior model to a raw signal. Truthful passes the signal
/// through; EcgmUniform blurs a discrete signal into a uniform draw from its
/// probability interval; CoarsenToGroup maps the signal onto a target group's
/// intervals, breaking ties uniformly at random among consistent elements.
inline InterpretedReport interpret_report(const BehaviorModel& behavior,
                                          const HybridWorld& world,
                                          const Report& raw,
                                          std::mt19937_64& rng) {
  InterpretedReport out;
  switch (behavior.kind) {
    case BehaviorKind::Truthful: {
      if (const auto* e = std::get_if<ExpertReport>(&raw)) {
        out.is_probability = true;
        out.probability = posterior_y(world, raw);
        out.like0 = world.expert.f0(e->value);
        out.like1 = world.expert.f1(e->value);
      } else {
        const DiscreteReport& d = std::get<DiscreteReport>(raw);
        const NonExpertGroup& g = world.group(d.group);
        out.group = d.group;
        out.element = d.element;
        out.like0 = g.q0[static_cast<std::size_t>(d.element - 1)];
        out.like1 = g.q1[static_cast<std::size_t>(d.element - 1)];
      }
      return out;
    }
    case BehaviorKind::EcgmUniform: {
      const DiscreteReport& d = std::get<DiscreteReport>(raw);
      const NonExpertGroup& g = world.group(d.group);
      const double m = static_cast<double>(g.size());
      std::uniform_real_distribution<double> unif((d.element - 1) / m,
                                                  d.element / m);
      out.is_probability = true;
      out.probability = unif(rng);
      // density of the realized probability report given Y
      out.like0 = g.q0[static_cast<std::size_t>(d.element - 1)] * m;
      out.like1 = g.q1[static_cast<std::size_t>(d.element - 1)] * m;
      return out;
    }
    case BehaviorKind::CoarsenToGroup: {
      const int l = behavior.target_group;
      const NonExpertGroup& target = world.group(l);
      const std::vector<double> target_cuts = detail::group_cuts(world, l);
      int k;
      if (const auto* e = std::get_if<ExpertReport>(&raw)) {
        k = detail::interval_of(target_cuts, e->value);
      } else {
        const DiscreteReport& d = std::get<DiscreteReport>(raw);
        if (d.group == l) {
          k = d.element;
        } else {
          const std::vector<double> src_cuts =
              detail::group_cuts(world, d.group);
          std::vector<int> consistent;
          for (int j = 1; j <= static_cast<int>(target.size()); ++j) {
            if (detail::intervals_overlap(src_cuts, d.element, target_cuts,
                                          j)) {
              consistent.push_back(j);
            }
          }
          if (consistent.size() == 1) {
            k = consistent.front();
          } else {
            std::uniform_int_distribution<std::size_t> pick(
                0, consistent.size() - 1);
            k = consistent[pick(rng)];
            // the u.a.r. tie-break dilutes the source signal's mass evenly
            const NonExpertGroup& src = world.group(d.group);
            const double w = 1.0 / static_cast<double>(consistent.size());
            out.like0 = src.q0[static_cast<std::size_t>(d.element - 1)] * w;
            out.like1 = src.q1[static_cast<std::size_t>(d.element - 1)] * w;
            out.group = l;
            out.element = k;
            return out;
          }
        }
      }
      out.group = l;
      out.element = k;
      out.like0 = target.q0[static_cast<std::size_t>(k - 1)];
      out.like1 = target.q1[static_cast<std::size_t>(k - 1)];
      return out;
    }
  }
  throw std::logic_error("unreachable");
}

/// MAP estimate of Y from interpreted reports. Probability reports are read
/// at face value (likelihood ratio (r/P) / ((1-r)/(1-P))); element reports
/// use their generative likelihoods. Reports carrying no likelihood under
/// either hypothesis are dropped. Ties go to y=1.
inline int map_aggregate(const HybridWorld& world,
                         const std::vector<InterpretedReport>& reports,
                         int* dropped = nullptr) {
  const double P = world.prior;
  double s0 = std::log(1.0 - P);
  double s1 = std::log(P);
  for (const InterpretedReport& r : reports) {
    double l0, l1;
    if (r.is_probability) {
      l0 = (1.0 - r.probability) / (1.0 - P);
      l1 = r.probability / P;
    } else {
      l0 = r.like0;
      l1 = r.like1;
    }
    if (l0 <= 0.0 && l1 <= 0.0) {
      if (dropped != nullptr) ++*dropped;
      continue;
    }
    s0 += l0 > 0.0 ? std::log(l0) : kNegInf;
    s1 += l1 > 0.0 ? std::log(l1) : kNegInf;
  }
  return s1 >= s0 ? 1 : 0;
}

/// Wilson score interval for a binomial proportion.
inline std::pair<double, double> wilson_interval(int successes, int n,
                                                 double z = 1.959963985) {
  if (n <= 0) return {0.0, 1.0};
  const double phat = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = phat + z2 / (2.0 * n);
  const double half =
      z * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n));
  // the interval must bracket the point estimate; at phat = 0 or 1 the
  // division can land a few ulps on the wrong side
  return {std::min((center - half) / denom, phat),
          std::max((center + half) / denom, phat)};
}

struct MechanismSetup {
  std::string name;
  std::vector<BehaviorModel> behaviors;  // index = space 0..n
};

struct ExperimentConfig {
  std::vector<std::vector<int>> sweep;  // per entry: counts per space 0..n
  int iterations = 10000;
  std::uint64_t seed = 1;
  double z = 1.959963985;  // 95% confidence
  std::vector<MechanismSetup> mechanisms;
};

struct AccuracyPoint {
  std::vector<int> counts;
  int population = 0;
  double accuracy = 0.0;
  double ci_low = 0.0;
  double ci_high = 1.0;
};

struct AccuracyCurve {
  std::string mechanism;
  std::vector<AccuracyPoint> points;
};

/// The five-mechanism comparison of the accuracy studies. CEM and MIBM share
/// one curve because agents report identically (truthfully) under both; ECGM
/// forces non-experts into noisy probability reports; each SPPM variant
/// forces everyone into one group's signal language.
inline std::vector<MechanismSetup> standard_mechanism_setups(
    const HybridWorld& world) {
  const int n = world.num_groups();
  std::vector<MechanismSetup> out;
  MechanismSetup cm{"cem-mibm", {}};
  MechanismSetup ec{"ecgm", {}};
  cm.behaviors.assign(static_cast<std::size_t>(n + 1),
                      BehaviorModel::truthful());
  ec.behaviors.push_back(BehaviorModel::truthful());
  for (int l = 1; l <= n; ++l) {
    ec.behaviors.push_back(BehaviorModel::ecgm_uniform());
  }
  out.push_back(cm);
  out.push_back(ec);
  for (int l = 1; l <= n; ++l) {
    MechanismSetup sp{"sppm-" + std::to_string(l), {}};
    for (int space = 0; space <= n; ++space) {
      sp.behaviors.push_back(space == l ? BehaviorModel::truthful()
                                        : BehaviorModel::coarsen(l));
    }
    out.push_back(sp);
  }
  return out;
}

/// Monte-Carlo accuracy curves: per mechanism and population size, draw the
/// world, push every signal through the mechanism's behavior model,
/// MAP-aggregate, and compare with the realized ground truth. Deterministic
/// given config.seed.
inline std::vector<AccuracyCurve> run_curve(const HybridWorld& world,
                                            const ExperimentConfig& config) {
  if (config.iterations < 1) {
    throw std::invalid_argument("iterations must be >= 1");
  }
  std::vector<AccuracyCurve> curves;
  for (std::size_t mi = 0; mi < config.mechanisms.size(); ++mi) {
    const MechanismSetup& setup = config.mechanisms[mi];
    if (setup.behaviors.size() !=
        static_cast<std::size_t>(world.num_groups() + 1)) {
      throw std::invalid_argument("behavior list must cover every space");
    }
    AccuracyCurve curve;
    curve.mechanism = setup.name;
    for (std::size_t si = 0; si < config.sweep.size(); ++si) {
      const std::vector<int>& counts = config.sweep[si];
      int correct = 0;
      for (int it = 0; it < config.iterations; ++it) {
        const std::uint64_t iter_seed = detail::split_seed(
            config.seed,
            (static_cast<std::uint64_t>(mi) << 40) ^
                (static_cast<std::uint64_t>(si) << 24) ^
                static_cast<std::uint64_t>(it));
        const SampledWorld sample = sample_world(world, counts, iter_seed);
        std::mt19937_64 behavior_rng(detail::split_seed(iter_seed, 1));
        std::vector<InterpretedReport> reports;
        reports.reserve(sample.signals.size());
        for (const Report& sig : sample.signals) {
          const BehaviorModel& b =
              setup.behaviors[static_cast<std::size_t>(report_space(sig))];
          reports.push_back(interpret_report(b, world, sig, behavior_rng));
        }
        if (map_aggregate(world, reports) == sample.y) ++correct;
      }
      AccuracyPoint pt;
      pt.counts = counts;
      for (int c : counts) pt.population += c;
      pt.accuracy = static_cast<double>(correct) / config.iterations;
      const auto [lo, hi] =
          wilson_interval(correct, config.iterations, config.z);
      pt.ci_low = lo;
      pt.ci_high = hi;
      curve.points.push_back(pt);
    }
    curves.push_back(std::move(curve));
  }
  return curves;
}

}  // namespace hybrid
