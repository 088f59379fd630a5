#pragma once

#include <string>
#include <vector>

#include "hybrid/world.hpp"

namespace hybrid {
namespace fixtures {

/// Weather-prediction example: uniform prior, expert Gaussians with means
/// -100/100 and std 100 restricted to [-100,100], a four-interval group and a
/// binary up/down group.
///
/// The group PMFs are chosen so the element posteriors are
/// (0.25, 1/3, 0.75, 2/3) for group 1 and (0.25, 0.75) for group 2; these are
/// the posteriors every downstream worked number is computed from.
inline HybridWorld runexp() {
  ExpertSignalModel expert(TruncatedGaussian{-100.0, 100.0, 100.0, 100.0},
                           -100.0, 100.0);
  NonExpertGroup g1;
  g1.label = "intervals";
  g1.q0 = {0.3, 0.4, 0.1, 0.2};
  g1.q1 = {0.1, 0.2, 0.3, 0.4};
  g1.elements = {"[-100,-50)", "[-50,0)", "[0,50)", "[50,100]"};
  NonExpertGroup g2;
  g2.label = "coarse";
  g2.q0 = {0.75, 0.25};
  g2.q1 = {0.25, 0.75};
  g2.elements = {"down", "up"};
  return HybridWorld(0.5, std::move(expert), {g1, g2});
}

/// The setting where CEM and MIBM pay the two group-1 reporters differently
/// vs identically: standard Gaussians at 0 and 1 restricted to [0,1], an
/// informative three-element group, and a two-element group carrying no
/// information at all (q0 = q1).
inline HybridWorld exclusion() {
  ExpertSignalModel expert(TruncatedGaussian{0.0, 1.0, 1.0, 1.0}, 0.0, 1.0);
  NonExpertGroup g1;
  g1.label = "group1";
  g1.q0 = {0.6, 0.2, 0.2};
  g1.q1 = {0.2, 0.5, 0.3};
  g1.elements = {"theta1", "theta2", "theta3"};
  NonExpertGroup g2;
  g2.label = "uninformative";
  g2.q0 = {0.5, 0.5};
  g2.q1 = {0.5, 0.5};
  g2.elements = {"theta1", "theta2"};
  return HybridWorld(0.5, std::move(expert), {g1, g2});
}

/// Interval-reading world: expert Gaussians with means 0/1 and the given std
/// on the whole real line (truncated at 8 sigma), group 1 cut at thresholds
/// (0, 0.5, 1), group 2 cut at 0.5. std=4 is the high-variance variant whose
/// group PMFs round to (0.50,0.05,0.05,0.40) and (0.55,0.45); std=1 is the
/// standard variant.
inline HybridWorld example2(double std = 4.0, double prior = 0.5) {
  ExpertSignalModel expert(TruncatedGaussian{0.0, std, 1.0, std}, 0.0, 0.0,
                           /*lo_infinite=*/true, /*hi_infinite=*/true);
  NonExpertGroup g1 =
      derive_group_from_thresholds(expert, {0.0, 0.5, 1.0}, "quartiles");
  NonExpertGroup g2 = derive_group_from_thresholds(expert, {0.5}, "halves");
  return HybridWorld(prior, std::move(expert), {g1, g2});
}

inline HybridWorld high_variance() { return example2(4.0, 0.5); }
inline HybridWorld standard() { return example2(1.0, 0.5); }
inline HybridWorld prior08() { return example2(1.0, 0.8); }

inline HybridWorld by_name(const std::string& name) {
  if (name == "runexp") return runexp();
  if (name == "exclusion") return exclusion();
  if (name == "example2" || name == "high-variance") return high_variance();
  if (name == "standard") return standard();
  if (name == "prior08") return prior08();
  throw std::invalid_argument("unknown fixture '" + name + "'");
}

}  // namespace fixtures
}  // namespace hybrid
