#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "hybrid/quadrature.hpp"
#include "hybrid/scoring.hpp"

namespace hybrid {

/// Raised when the model itself is inconsistent (densities hitting zero,
/// PMFs not normalized, non-monotone likelihood ratio, ...).
struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised by match_expert_signal when the requested posterior is outside the
/// range any expert signal can induce.
struct NoMatchingSignal : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr double kDensityFloor = 1e-300;

namespace detail {

inline constexpr double kSqrt2Pi = 2.5066282746310005024;

inline double normal_pdf(double x, double mean, double std) {
  const double z = (x - mean) / std;
  return std::exp(-0.5 * z * z) / (std * kSqrt2Pi);
}

inline double normal_cdf(double x, double mean, double std) {
  return 0.5 * std::erfc(-(x - mean) / (std * std::sqrt(2.0)));
}

}  // namespace detail

struct TruncatedGaussian {
  double mean0 = 0.0, std0 = 1.0;
  double mean1 = 1.0, std1 = 1.0;
};

/// Piecewise-linear density pair on an ascending grid; renormalized at
/// construction so each conditional integrates to 1 over the support.
struct Tabulated {
  std::vector<double> x;
  std::vector<double> f0;
  std::vector<double> f1;
};

/// Conditional signal densities f0, f1 of the continuous (expert) space.
/// Unbounded supports are truncated at 8 standard deviations past the means;
/// the mass beyond is below every tolerance in play.
class ExpertSignalModel {
 public:
  ExpertSignalModel(TruncatedGaussian g, double lo, double hi,
                    bool lo_infinite = false, bool hi_infinite = false)
      : family_(g), lo_(lo), hi_(hi), lo_infinite_(lo_infinite),
        hi_infinite_(hi_infinite) {
    if (lo_infinite_) lo_ = std::min(g.mean0 - 8.0 * g.std0, g.mean1 - 8.0 * g.std1);
    if (hi_infinite_) hi_ = std::max(g.mean0 + 8.0 * g.std0, g.mean1 + 8.0 * g.std1);
    if (!(lo_ < hi_)) throw ModelError("expert support must be a proper interval");
    if (g.std0 <= 0.0 || g.std1 <= 0.0) throw ModelError("stds must be positive");
    z0_ = detail::normal_cdf(hi_, g.mean0, g.std0) -
          detail::normal_cdf(lo_, g.mean0, g.std0);
    z1_ = detail::normal_cdf(hi_, g.mean1, g.std1) -
          detail::normal_cdf(lo_, g.mean1, g.std1);
    if (z0_ <= 0.0 || z1_ <= 0.0) {
      throw ModelError("truncation interval carries no mass");
    }
    validate();
  }

  explicit ExpertSignalModel(Tabulated t) : family_(std::move(t)) {
    Tabulated& tab = std::get<Tabulated>(family_);
    if (tab.x.size() < 2 || tab.x.size() != tab.f0.size() ||
        tab.x.size() != tab.f1.size()) {
      throw ModelError("tabulated density needs matching grids of length >= 2");
    }
    for (std::size_t i = 1; i < tab.x.size(); ++i) {
      if (!(tab.x[i] > tab.x[i - 1])) {
        throw ModelError("tabulated grid must be strictly ascending");
      }
    }
    for (std::size_t i = 0; i < tab.x.size(); ++i) {
      if (!(tab.f0[i] > 0.0) || !(tab.f1[i] > 0.0)) {
        throw ModelError("tabulated densities must be strictly positive");
      }
    }
    lo_ = tab.x.front();
    hi_ = tab.x.back();
    // renormalize by the trapezoid integral; piecewise-linear interpolation
    // makes that integral exact
    auto trapz = [&](const std::vector<double>& f) {
      double acc = 0.0;
      for (std::size_t i = 1; i < tab.x.size(); ++i) {
        acc += 0.5 * (f[i] + f[i - 1]) * (tab.x[i] - tab.x[i - 1]);
      }
      return acc;
    };
    const double n0 = trapz(tab.f0), n1 = trapz(tab.f1);
    for (double& v : tab.f0) v /= n0;
    for (double& v : tab.f1) v /= n1;
    validate();
  }

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  bool lo_infinite() const { return lo_infinite_; }
  bool hi_infinite() const { return hi_infinite_; }
  bool is_gaussian() const {
    return std::holds_alternative<TruncatedGaussian>(family_);
  }
  const TruncatedGaussian& gaussian() const {
    return std::get<TruncatedGaussian>(family_);
  }
  const Tabulated& tabulated() const { return std::get<Tabulated>(family_); }

  double f0(double s) const { return density(s, false); }
  double f1(double s) const { return density(s, true); }

  /// CDF of f_y, used by inverse-transform sampling.
  double cdf(double s, bool y) const {
    if (s <= lo_) return 0.0;
    if (s >= hi_) return 1.0;
    if (const auto* g = std::get_if<TruncatedGaussian>(&family_)) {
      const double mean = y ? g->mean1 : g->mean0;
      const double std = y ? g->std1 : g->std0;
      const double z = y ? z1_ : z0_;
      return (detail::normal_cdf(s, mean, std) -
              detail::normal_cdf(lo_, mean, std)) /
             z;
    }
    const Tabulated& t = std::get<Tabulated>(family_);
    const std::vector<double>& f = y ? t.f1 : t.f0;
    double acc = 0.0;
    for (std::size_t i = 1; i < t.x.size(); ++i) {
      if (s >= t.x[i]) {
        acc += 0.5 * (f[i] + f[i - 1]) * (t.x[i] - t.x[i - 1]);
      } else {
        const double w = (s - t.x[i - 1]) / (t.x[i] - t.x[i - 1]);
        const double fs = f[i - 1] + w * (f[i] - f[i - 1]);
        acc += 0.5 * (fs + f[i - 1]) * (s - t.x[i - 1]);
        break;
      }
    }
    return std::min(acc, 1.0);
  }

  /// Inverse CDF by bisection on the monotone CDF.
  double quantile(double u, bool y) const {
    double a = lo_, b = hi_;
    for (int iter = 0; iter < 200 && b - a > 1e-13 * (hi_ - lo_); ++iter) {
      const double mid = 0.5 * (a + b);
      (cdf(mid, y) < u ? a : b) = mid;
    }
    return 0.5 * (a + b);
  }

 private:
  double density(double s, bool y) const {
    if (s < lo_ || s > hi_) {
      throw ModelError("signal " + std::to_string(s) + " outside support [" +
                       std::to_string(lo_) + ", " + std::to_string(hi_) + "]");
    }
    double v;
    if (const auto* g = std::get_if<TruncatedGaussian>(&family_)) {
      v = y ? detail::normal_pdf(s, g->mean1, g->std1) / z1_
            : detail::normal_pdf(s, g->mean0, g->std0) / z0_;
    } else {
      const Tabulated& t = std::get<Tabulated>(family_);
      const std::vector<double>& f = y ? t.f1 : t.f0;
      const auto it = std::upper_bound(t.x.begin(), t.x.end(), s);
      std::size_t i = std::min<std::size_t>(
          t.x.size() - 1,
          static_cast<std::size_t>(std::max<std::ptrdiff_t>(
              1, it - t.x.begin())));
      const double w = (s - t.x[i - 1]) / (t.x[i] - t.x[i - 1]);
      v = f[i - 1] + w * (f[i] - f[i - 1]);
    }
    return std::max(v, kDensityFloor);
  }

  void validate() const {
    // normalization within 1e-8; for tabulated densities the trapezoid sum
    // on their own grid is the exact integral (adaptive quadrature misjudges
    // its error across the interpolation kinks)
    for (bool y : {false, true}) {
      double mass;
      if (const Tabulated* t = std::get_if<Tabulated>(&family_)) {
        const std::vector<double>& f = y ? t->f1 : t->f0;
        mass = 0.0;
        for (std::size_t i = 1; i < t->x.size(); ++i) {
          mass += 0.5 * (f[i] + f[i - 1]) * (t->x[i] - t->x[i - 1]);
        }
      } else {
        mass = integrate_or_throw([&](double s) { return density(s, y); },
                                  lo_, hi_);
      }
      if (std::abs(mass - 1.0) > 1e-8) {
        throw ModelError("conditional density integrates to " +
                         std::to_string(mass));
      }
    }
    // likelihood ratio f1/f0 strictly monotone on a 1001-point grid; the
    // direction is free, only strictness matters
    const int n = 1000;
    double prev = density(lo_, true) / density(lo_, false);
    int direction = 0;
    for (int i = 1; i <= n; ++i) {
      const double s = lo_ + (hi_ - lo_) * i / n;
      const double r = density(s, true) / density(s, false);
      const int step = r > prev ? 1 : (r < prev ? -1 : 0);
      if (step == 0 || (direction != 0 && step != direction)) {
        throw ModelError("likelihood ratio not strictly monotone near s=" +
                         std::to_string(s));
      }
      direction = step;
      prev = r;
    }
  }

  std::variant<TruncatedGaussian, Tabulated> family_;
  double lo_ = 0.0, hi_ = 1.0;
  bool lo_infinite_ = false, hi_infinite_ = false;
  double z0_ = 1.0, z1_ = 1.0;
};

struct NonExpertGroup {
  std::string label;
  Pmf q0;
  Pmf q1;
  std::vector<std::string> elements;
  /// Present when the group was derived by cutting the expert support into
  /// intervals; the coarsening behavior models need this structure.
  std::optional<std::vector<double>> thresholds;

  std::size_t size() const { return q0.size(); }
};

struct HybridWorld {
  double prior = 0.5;  // Pr[Y=1]
  ExpertSignalModel expert;
  std::vector<NonExpertGroup> groups;  // spaces 1..n

  HybridWorld(double p, ExpertSignalModel e, std::vector<NonExpertGroup> g)
      : prior(p), expert(std::move(e)), groups(std::move(g)) {
    if (!(prior > 0.0) || !(prior < 1.0)) {
      throw ModelError("prior must lie strictly inside (0,1)");
    }
    for (const NonExpertGroup& grp : groups) {
      if (grp.size() < 2 || grp.q1.size() != grp.size()) {
        throw ModelError("group '" + grp.label + "' needs matching PMFs, m>=2");
      }
      check_pmf(grp.q0, 1e-9);
      check_pmf(grp.q1, 1e-9);
    }
  }

  int num_groups() const { return static_cast<int>(groups.size()); }
  const NonExpertGroup& group(int l) const {
    if (l < 1 || l > num_groups()) {
      throw std::invalid_argument("group index out of range");
    }
    return groups[static_cast<std::size_t>(l - 1)];
  }
};

struct ExpertReport {
  double value;
};
struct DiscreteReport {
  int group;    // 1..n
  int element;  // 1..m
};
using Report = std::variant<ExpertReport, DiscreteReport>;

inline Report make_expert(double s) { return ExpertReport{s}; }
inline Report make_discrete(int group, int element) {
  return DiscreteReport{group, element};
}

inline int report_space(const Report& r) {
  if (std::holds_alternative<ExpertReport>(r)) return 0;
  return std::get<DiscreteReport>(r).group;
}

inline void check_report(const HybridWorld& world, const Report& r) {
  if (const auto* e = std::get_if<ExpertReport>(&r)) {
    if (e->value < world.expert.lo() || e->value > world.expert.hi()) {
      throw std::invalid_argument("expert report outside support");
    }
    return;
  }
  const DiscreteReport& d = std::get<DiscreteReport>(r);
  const NonExpertGroup& g = world.group(d.group);
  if (d.element < 1 || d.element > static_cast<int>(g.size())) {
    throw std::invalid_argument("element index out of range for group " +
                                g.label);
  }
}

/// Pr[Y=1 | report].
inline double posterior_y(const HybridWorld& world, const Report& report) {
  check_report(world, report);
  const double P = world.prior;
  double l0, l1;
  if (const auto* e = std::get_if<ExpertReport>(&report)) {
    l0 = world.expert.f0(e->value);
    l1 = world.expert.f1(e->value);
  } else {
    const DiscreteReport& d = std::get<DiscreteReport>(report);
    const NonExpertGroup& g = world.group(d.group);
    l0 = g.q0[static_cast<std::size_t>(d.element - 1)];
    l1 = g.q1[static_cast<std::size_t>(d.element - 1)];
  }
  const double denom = (1.0 - P) * l0 + P * l1;
  if (denom <= 0.0) throw ModelError("report has zero total likelihood");
  return P * l1 / denom;
}

/// Pr[peer signal = . ] for a discrete space l >= 1 under prior belief.
inline Pmf prior_signal_distribution(const HybridWorld& world, int l) {
  const NonExpertGroup& g = world.group(l);
  Pmf out(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    out[k] = (1.0 - world.prior) * g.q0[k] + world.prior * g.q1[k];
  }
  return out;
}

/// Belief-p mixture over a discrete space: the Q^l(.) object every
/// scoring-rule payment is evaluated against.
inline Pmf mixture_pmf(const HybridWorld& world, int l, double p) {
  const NonExpertGroup& g = world.group(l);
  Pmf out(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    out[k] = (1.0 - p) * g.q0[k] + p * g.q1[k];
  }
  return out;
}

/// Pr[peer in space l = . | conditioning report], via the posterior over Y.
inline Pmf peer_signal_posterior(const HybridWorld& world,
                                 const Report& conditioning, int l) {
  return mixture_pmf(world, l, posterior_y(world, conditioning));
}

/// Belief-p mixture density over the expert space.
inline double mixture_density(const HybridWorld& world, double p, double s) {
  return (1.0 - p) * world.expert.f0(s) + p * world.expert.f1(s);
}

/// Range of posteriors an expert signal can induce.
inline std::pair<double, double> expert_posterior_range(
    const HybridWorld& world) {
  const double a = posterior_y(world, make_expert(world.expert.lo()));
  const double b = posterior_y(world, make_expert(world.expert.hi()));
  return {std::min(a, b), std::max(a, b)};
}

/// Finds the expert signal whose posterior equals target_p, by bisection on
/// the strictly monotone posterior map.
inline double match_expert_signal(const HybridWorld& world, double target_p) {
  if (!(target_p > 0.0) || !(target_p < 1.0)) {
    throw std::invalid_argument("target posterior must be in (0,1)");
  }
  double a = world.expert.lo(), b = world.expert.hi();
  double pa = posterior_y(world, make_expert(a));
  double pb = posterior_y(world, make_expert(b));
  const bool increasing = pb > pa;
  const double plo = std::min(pa, pb), phi = std::max(pa, pb);
  if (target_p < plo - 1e-12 || target_p > phi + 1e-12) {
    throw NoMatchingSignal("posterior " + std::to_string(target_p) +
                           " unachievable; range [" + std::to_string(plo) +
                           ", " + std::to_string(phi) + "]");
  }
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (a + b);
    const double pm = posterior_y(world, make_expert(mid));
    if (std::abs(pm - target_p) <= 1e-12) return mid;
    if ((pm < target_p) == increasing) {
      a = mid;
    } else {
      b = mid;
    }
  }
  const double s = 0.5 * (a + b);
  if (std::abs(posterior_y(world, make_expert(s)) - target_p) > 1e-10) {
    throw NoMatchingSignal("bisection failed to reach tolerance");
  }
  return s;
}

/// Cuts the expert support at the given thresholds and integrates f_y over
/// each cell, yielding a discrete group whose signals are interval labels.
inline NonExpertGroup derive_group_from_thresholds(
    const ExpertSignalModel& expert, const std::vector<double>& thresholds,
    const std::string& label = "derived") {
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (thresholds[i] < expert.lo() || thresholds[i] > expert.hi()) {
      throw std::invalid_argument("threshold outside expert support");
    }
    if (i > 0 && !(thresholds[i] > thresholds[i - 1])) {
      throw std::invalid_argument("thresholds must be strictly increasing");
    }
  }
  std::vector<double> cuts;
  cuts.push_back(expert.lo());
  cuts.insert(cuts.end(), thresholds.begin(), thresholds.end());
  cuts.push_back(expert.hi());

  NonExpertGroup g;
  g.label = label;
  g.thresholds = thresholds;
  QuadratureSpec spec;
  spec.abs_tol = 1e-10;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    g.q0.push_back(integrate_or_throw(
        [&](double s) { return expert.f0(s); }, cuts[k], cuts[k + 1], spec));
    g.q1.push_back(integrate_or_throw(
        [&](double s) { return expert.f1(s); }, cuts[k], cuts[k + 1], spec));
    g.elements.push_back("(" + std::to_string(cuts[k]) + "," +
                         std::to_string(cuts[k + 1]) + "]");
  }
  // integration error leaves the PMFs a hair off 1; renormalize
  auto renorm = [](Pmf& q) {
    double t = 0.0;
    for (double v : q) t += v;
    for (double& v : q) v /= t;
  };
  renorm(g.q0);
  renorm(g.q1);
  return g;
}

namespace detail {

/// splitmix64 step, used to derive independent per-purpose seeds from one
/// run seed without correlated streams.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

struct SampledWorld {
  int y = 0;
  std::vector<Report> signals;  // experts first, then groups 1..n in order
};

/// Draws Y ~ Bernoulli(P) and conditionally independent signals: counts[0]
/// experts, counts[l] members of group l. Deterministic given seed.
inline SampledWorld sample_world(const HybridWorld& world,
                                 const std::vector<int>& counts,
                                 std::uint64_t seed) {
  if (counts.size() != static_cast<std::size_t>(world.num_groups() + 1)) {
    throw std::invalid_argument("counts must cover expert space plus groups");
  }
  std::mt19937_64 rng(detail::split_seed(seed, 0));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  SampledWorld out;
  out.y = unif(rng) < world.prior ? 1 : 0;
  const bool y = out.y == 1;
  for (int i = 0; i < counts[0]; ++i) {
    out.signals.push_back(make_expert(world.expert.quantile(unif(rng), y)));
  }
  for (int l = 1; l <= world.num_groups(); ++l) {
    const NonExpertGroup& g = world.group(l);
    const Pmf& q = y ? g.q1 : g.q0;
    for (int i = 0; i < counts[static_cast<std::size_t>(l)]; ++i) {
      double u = unif(rng);
      int k = 1;
      for (std::size_t j = 0; j < q.size(); ++j) {
        if (u < q[j] || j + 1 == q.size()) {
          k = static_cast<int>(j) + 1;
          break;
        }
        u -= q[j];
      }
      out.signals.push_back(make_discrete(l, k));
    }
  }
  return out;
}

struct InformativePriorReport {
  struct Pair {
    Report a;
    Report b;
    double tv_distance = 0.0;  // min over spaces is not taken; this is max
  };
  double min_distance = std::numeric_limits<double>::infinity();
  std::vector<Pair> flagged;  // pairs with distance below threshold
  bool pass() const { return flagged.empty(); }
};

namespace detail {

/// Largest total-variation gap, across spaces, between the peer-signal
/// posteriors two reports induce. Zero iff the posteriors over Y coincide.
inline double induced_posterior_distance(const HybridWorld& world, double p1,
                                         double p2) {
  double best = 0.0;
  for (int l = 1; l <= world.num_groups(); ++l) {
    best = std::max(
        best, total_variation(mixture_pmf(world, l, p1),
                              mixture_pmf(world, l, p2)));
  }
  // expert space: the mixtures differ by (p1-p2)(f1-f0), so the L1 gap has
  // the closed form |p1-p2| * integral |f1-f0|
  const double l1 = integrate_or_throw(
      [&](double s) { return std::abs(world.expert.f1(s) - world.expert.f0(s)); },
      world.expert.lo(), world.expert.hi());
  best = std::max(best, 0.5 * std::abs(p1 - p2) * l1);
  return best;
}

}  // namespace detail

/// Diagnostic for the informative-prior assumption: distinct discrete signals
/// (and a grid of expert signals) must induce distinct peer-signal posteriors.
inline InformativePriorReport check_informative_prior(
    const HybridWorld& world, double threshold = 1e-9,
    int expert_grid = 21) {
  std::vector<Report> reports;
  for (int l = 1; l <= world.num_groups(); ++l) {
    for (int k = 1; k <= static_cast<int>(world.group(l).size()); ++k) {
      reports.push_back(make_discrete(l, k));
    }
  }
  const std::size_t num_discrete = reports.size();
  for (int i = 0; i < expert_grid; ++i) {
    const double s = world.expert.lo() +
                     (world.expert.hi() - world.expert.lo()) *
                         (i + 0.5) / expert_grid;
    reports.push_back(make_expert(s));
  }

  InformativePriorReport out;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    for (std::size_t j = i + 1; j < reports.size(); ++j) {
      // expert-vs-expert pairs are covered by the monotone-ratio invariant;
      // the scan cares about discrete signals against everything
      if (i >= num_discrete) continue;
      const double d = detail::induced_posterior_distance(
          world, posterior_y(world, reports[i]),
          posterior_y(world, reports[j]));
      out.min_distance = std::min(out.min_distance, d);
      if (d < threshold) {
        out.flagged.push_back({reports[i], reports[j], d});
      }
    }
  }
  return out;
}

}  // namespace hybrid
