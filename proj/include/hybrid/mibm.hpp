#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hybrid/mechanisms.hpp"
#include "hybrid/scoring.hpp"
#include "hybrid/world.hpp"

namespace hybrid {

/// Pool-size-dependent weights alpha(claimed space l, target space i, counts).
/// Truthfulness requires the transposition identity checked by
/// validate_schedule; the stock variants satisfy it by construction.
class CoefficientSchedule {
 public:
  using Fn = std::function<double(int l, int i, const std::vector<int>&)>;

  static CoefficientSchedule Constant(double c) {
    if (c < 0.0) throw std::invalid_argument("schedule must be nonnegative");
    return CoefficientSchedule(
        "constant(" + std::to_string(c) + ")",
        [c](int, int, const std::vector<int>&) { return c; });
  }

  /// alpha = 1 / (t_0 + ... + t_n); moving one report between pools keeps
  /// the total fixed, so the transposition identity holds.
  static CoefficientSchedule InverseTotal() {
    return CoefficientSchedule(
        "inverse-total", [](int, int, const std::vector<int>& t) {
          double total = 0.0;
          for (int v : t) total += v;
          if (total <= 0.0) throw std::invalid_argument("empty pools");
          return 1.0 / total;
        });
  }

  /// Arbitrary evaluator, primarily for tables and negative controls.
  static CoefficientSchedule FromFunction(std::string name, Fn fn) {
    return CoefficientSchedule(std::move(name), std::move(fn));
  }

  double alpha(int l, int i, const std::vector<int>& counts) const {
    const double v = fn_(l, i, counts);
    if (v < 0.0) {
      throw std::invalid_argument("schedule produced a negative weight");
    }
    return v;
  }

  const std::string& name() const { return name_; }

 private:
  CoefficientSchedule(std::string name, Fn fn)
      : name_(std::move(name)), fn_(std::move(fn)) {}
  std::string name_;
  Fn fn_;
};

struct ScheduleViolation {
  int l1 = 0, l2 = 0, i = 0;
  std::vector<int> counts;
  double lhs = 0.0, rhs = 0.0;
};

struct ScheduleReport {
  bool pass = true;
  std::vector<ScheduleViolation> violations;
  long long checks = 0;
};

/// Exhaustively checks alpha^{l1}_i(t) = alpha^{l2}_i(t with t_{l1}-1,
/// t_{l2}+1) over a box of pool-size vectors with every t >= 2. This is the
/// exact condition under which a deviator moving her report from pool l1 to
/// pool l2 faces the same weights either way.
inline ScheduleReport validate_schedule(const CoefficientSchedule& schedule,
                                        const std::vector<int>& count_min,
                                        const std::vector<int>& count_max,
                                        double tol = 1e-12,
                                        std::size_t max_violations = 8) {
  if (count_min.size() != count_max.size() || count_min.empty()) {
    throw std::invalid_argument("count box dimensions mismatch");
  }
  const int spaces = static_cast<int>(count_min.size());
  for (int s = 0; s < spaces; ++s) {
    if (count_min[s] < 2) {
      throw std::invalid_argument("count box lower bounds must be >= 2");
    }
  }

  ScheduleReport report;
  std::vector<int> t(count_min);
  auto advance = [&]() {
    for (int s = 0; s < spaces; ++s) {
      if (++t[static_cast<std::size_t>(s)] <=
          count_max[static_cast<std::size_t>(s)]) {
        return true;
      }
      t[static_cast<std::size_t>(s)] = count_min[static_cast<std::size_t>(s)];
    }
    return false;
  };

  do {
    for (int l1 = 0; l1 < spaces; ++l1) {
      for (int l2 = l1 + 1; l2 < spaces; ++l2) {
        std::vector<int> moved(t);
        moved[static_cast<std::size_t>(l1)] -= 1;
        moved[static_cast<std::size_t>(l2)] += 1;
        for (int i = 0; i < spaces; ++i) {
          const double lhs = schedule.alpha(l1, i, t);
          const double rhs = schedule.alpha(l2, i, moved);
          ++report.checks;
          if (std::abs(lhs - rhs) > tol) {
            report.pass = false;
            if (report.violations.size() < max_violations) {
              report.violations.push_back({l1, l2, i, t, lhs, rhs});
            }
          }
        }
      }
    }
  } while (advance());
  return report;
}

struct MibmConfig {
  CoefficientSchedule schedule = CoefficientSchedule::Constant(1.0);
  // per-space rules PS^0..PS^n; space 0 must be Log (log-density score)
  std::vector<ScoringRule> rules;
  int min_own_pool = 3;

  static MibmConfig all_log(int num_spaces, CoefficientSchedule s) {
    MibmConfig cfg;
    cfg.schedule = std::move(s);
    cfg.rules.assign(static_cast<std::size_t>(num_spaces), ScoringRule::Log);
    return cfg;
  }

  ScoringRule rule_for(int space) const {
    return rules.at(static_cast<std::size_t>(space));
  }
};

/// Pairwise shifted-score kernel between spaces: the space-l2 report scored
/// under the l1-conditioned distribution over space l2, minus its score under
/// the prior distribution. For the Log rule this is ln pmi for discrete
/// targets and the log mixture-density ratio for the expert target.
inline double r_pair(const HybridWorld& world, const Report& s_l1,
                     const Report& s_l2, ScoringRule rule) {
  return sppm_pay_cross(world, s_l1, s_l2, rule);
}

/// Realized MIBM payment of one agent: the alpha-weighted sum of her pairwise
/// kernels against one sampled peer per nonempty space. Spaces with no
/// reports are skipped; the truthfulness guarantee presumes nonempty pools.
inline double mibm_pay(const HybridWorld& world, const MibmConfig& config,
                       const ReportPools& pools, int agent,
                       const PeerAssignment& peers) {
  const PooledReport& own = pools.find(agent);
  const int l = report_space(own.report);
  const std::vector<int> counts = pools.counts();
  if (counts[static_cast<std::size_t>(l)] < config.min_own_pool) {
    throw PoolTooSmall("own pool " + std::to_string(l) + " below minimum " +
                       std::to_string(config.min_own_pool));
  }
  const auto it = peers.peers.find(agent);
  if (it == peers.peers.end()) {
    throw std::invalid_argument("agent missing from peer assignment");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const int peer_id = it->second[i];
    if (peer_id < 0) continue;  // empty pool
    const PooledReport& peer = pools.find(peer_id);
    const double term = r_pair(world, own.report, peer.report,
                               config.rule_for(static_cast<int>(i)));
    if (term == kNegInf) return kNegInf;
    total += config.schedule.alpha(l, static_cast<int>(i), counts) * term;
  }
  return total;
}

}  // namespace hybrid
