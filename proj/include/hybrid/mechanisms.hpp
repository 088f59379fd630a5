#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "hybrid/info.hpp"
#include "hybrid/scoring.hpp"
#include "hybrid/world.hpp"

namespace hybrid {

/// Pairwise log-PMI payment between two expert-space reports, expressed in
/// posterior space: both reports enter only through Pr[Y=1 | report].
inline double ecgm_pay(double p_r, double p_j, double P) {
  if (p_r < 0.0 || p_r > 1.0 || p_j < 0.0 || p_j > 1.0 || P <= 0.0 ||
      P >= 1.0) {
    throw std::invalid_argument("ecgm_pay: probabilities out of range");
  }
  const double arg = p_r * p_j / P + (1.0 - p_r) * (1.0 - p_j) / (1.0 - P);
  return arg > 0.0 ? std::log(arg) : kNegInf;
}

/// Shifted-score payment within discrete space l: the peer's report scored
/// under the reporter-conditioned signal distribution minus its score under
/// the prior signal distribution.
inline double sppm_pay(const HybridWorld& world, int l, int report_r,
                       int peer_report, ScoringRule rule) {
  const Pmf conditional =
      peer_signal_posterior(world, make_discrete(l, report_r), l);
  const Pmf prior = prior_signal_distribution(world, l);
  const std::size_t omega = static_cast<std::size_t>(peer_report - 1);
  const double a = score(rule, omega, conditional);
  const double b = score(rule, omega, prior);
  if (a == kNegInf) return kNegInf;
  return a - b;
}

/// The same shifted score with the conditioning report drawn from any space
/// and the peer from any space. For an expert-space peer the score is a log
/// density, whose normalization cancels in the difference, leaving the
/// log-ratio of mixtures; only the Log rule is meaningful there.
inline double sppm_pay_cross(const HybridWorld& world,
                             const Report& conditioning, const Report& peer,
                             ScoringRule rule) {
  const double p = posterior_y(world, conditioning);
  if (const auto* e = std::get_if<ExpertReport>(&peer)) {
    if (rule != ScoringRule::Log) {
      throw std::invalid_argument(
          "expert-space peers need the Log rule (log-density score)");
    }
    const double conditional = mixture_density(world, p, e->value);
    const double prior = mixture_density(world, world.prior, e->value);
    if (conditional <= 0.0) return kNegInf;
    return std::log(conditional / prior);
  }
  const DiscreteReport& d = std::get<DiscreteReport>(peer);
  if (rule == ScoringRule::Log) {
    // ln Pr[peer element | posterior p] / Pr[peer element] equals the log
    // pointwise mutual information of the two induced posteriors. The
    // product form is symmetric under swapping the reports down to the last
    // bit, so two reporters with the same pairing are paid exactly alike.
    const double pw = posterior_y(world, peer);
    const double k = (1.0 - p) * (1.0 - pw) / (1.0 - world.prior) +
                     p * pw / world.prior;
    if (k <= 0.0) return kNegInf;
    return std::log(k);
  }
  const Pmf conditional = mixture_pmf(world, d.group, p);
  const Pmf prior = prior_signal_distribution(world, d.group);
  const std::size_t omega = static_cast<std::size_t>(d.element - 1);
  const double a = score(rule, omega, conditional);
  const double b = score(rule, omega, prior);
  if (a == kNegInf) return kNegInf;
  return a - b;
}

struct PooledReport {
  int agent = 0;
  Report report;
};

/// Reports bucketed by claimed space: pool 0 holds expert-space reports,
/// pool l the group-l reports.
struct ReportPools {
  std::vector<std::vector<PooledReport>> pools;  // index = space 0..n

  static ReportPools build(const HybridWorld& world,
                           const std::vector<PooledReport>& reports) {
    ReportPools out;
    out.pools.resize(static_cast<std::size_t>(world.num_groups() + 1));
    for (const PooledReport& r : reports) {
      check_report(world, r.report);
      out.pools[static_cast<std::size_t>(report_space(r.report))].push_back(r);
    }
    return out;
  }

  std::vector<int> counts() const {
    std::vector<int> c;
    for (const auto& pool : pools) c.push_back(static_cast<int>(pool.size()));
    return c;
  }

  const PooledReport& find(int agent) const {
    for (const auto& pool : pools) {
      for (const PooledReport& r : pool) {
        if (r.agent == agent) return r;
      }
    }
    throw std::invalid_argument("agent " + std::to_string(agent) +
                                " has no report");
  }
};

struct PoolTooSmall : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One uniformly sampled peer per space for every agent; peer != self within
/// the agent's own pool. Spaces with empty pools get peer id -1.
struct PeerAssignment {
  // peers[agent][space] = peer agent id, or -1 when the pool is empty
  std::map<int, std::vector<int>> peers;
};

inline PeerAssignment sample_peers(const ReportPools& pools,
                                   std::uint64_t seed,
                                   int min_own_pool = 2) {
  const std::size_t spaces = pools.pools.size();
  PeerAssignment out;
  std::uint64_t call = 0;
  for (const auto& pool : pools.pools) {
    for (const PooledReport& r : pool) {
      const int own = report_space(r.report);
      if (static_cast<int>(pools.pools[static_cast<std::size_t>(own)].size()) <
          min_own_pool) {
        throw PoolTooSmall("pool " + std::to_string(own) + " has fewer than " +
                           std::to_string(min_own_pool) + " reports");
      }
      std::mt19937_64 rng(detail::split_seed(seed, ++call));
      std::vector<int> assigned(spaces, -1);
      for (std::size_t i = 0; i < spaces; ++i) {
        std::vector<int> candidates;
        for (const PooledReport& c : pools.pools[i]) {
          if (c.agent != r.agent) candidates.push_back(c.agent);
        }
        if (candidates.empty()) continue;
        std::uniform_int_distribution<std::size_t> pick(0,
                                                        candidates.size() - 1);
        assigned[i] = candidates[pick(rng)];
      }
      out.peers[r.agent] = std::move(assigned);
    }
  }
  return out;
}

}  // namespace hybrid
