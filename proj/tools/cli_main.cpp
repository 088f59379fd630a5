// hybridmech: model inspection, payments, truthfulness verification and
// Monte-Carlo accuracy experiments for hybrid-crowd peer prediction.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hybrid/cem.hpp"
#include "hybrid/experiment.hpp"
#include "hybrid/fixtures.hpp"
#include "hybrid/io.hpp"
#include "hybrid/mibm.hpp"
#include "hybrid/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitVerification = 3;

struct ValidationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

hybrid::HybridWorld load_world_arg(const std::string& path) {
  try {
    return hybrid::load_world(path);
  } catch (const hybrid::IoError& e) {
    throw ValidationFailure(e.what());
  } catch (const hybrid::ModelError& e) {
    throw ValidationFailure(std::string("invalid model: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ValidationFailure(std::string("invalid model: ") + e.what());
  }
}

std::string world_hash_or_empty(const std::string& path) {
  try {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(hybrid::fnv1a_file(path)));
    return buf;
  } catch (const hybrid::IoError&) {
    return "";
  }
}

void emit_csv(const hybrid::RunManifest& manifest, const hybrid::CsvTable& t,
              const std::string& out_path) {
  if (out_path.empty()) {
    std::fputs(hybrid::render_csv(manifest, t).c_str(), stdout);
  } else {
    hybrid::write_csv(manifest, t, out_path);
    std::printf("wrote %s\n", out_path.c_str());
  }
}

hybrid::ScoringRule parse_rule(const std::string& name) {
  if (name == "log") return hybrid::ScoringRule::Log;
  if (name == "quadratic") return hybrid::ScoringRule::Quadratic;
  throw ValidationFailure("unknown scoring rule '" + name + "'");
}

// --------------------------------------------------------------- subcommands

int cmd_model_validate(const std::string& world_path) {
  const hybrid::HybridWorld w = load_world_arg(world_path);
  std::printf("world ok: prior=%s, %d group(s), expert support [%s, %s]\n",
              hybrid::format_number(w.prior).c_str(), w.num_groups(),
              hybrid::format_number(w.expert.lo()).c_str(),
              hybrid::format_number(w.expert.hi()).c_str());
  const auto diag = hybrid::check_informative_prior(w);
  if (diag.pass()) {
    std::printf("informative-prior check: pass (min induced distance %s)\n",
                hybrid::format_number(diag.min_distance).c_str());
  } else {
    std::printf(
        "informative-prior check: %zu signal pair(s) induce matching "
        "posteriors (diagnostic only; matched pairs become payment ties)\n",
        diag.flagged.size());
  }
  return kExitOk;
}

int cmd_posterior(const std::string& world_path,
                  const std::optional<double>& signal,
                  const std::optional<int>& group,
                  const std::optional<int>& element) {
  const hybrid::HybridWorld w = load_world_arg(world_path);
  hybrid::Report r = hybrid::make_expert(0.0);
  if (signal.has_value()) {
    r = hybrid::make_expert(*signal);
  } else if (group.has_value() && element.has_value()) {
    r = hybrid::make_discrete(*group, *element);
  } else {
    std::fprintf(stderr,
                 "posterior needs --signal or both --group and --element\n");
    return kExitUsage;
  }
  try {
    std::printf("%s\n",
                hybrid::format_number(hybrid::posterior_y(w, r)).c_str());
  } catch (const std::invalid_argument& e) {
    throw ValidationFailure(e.what());
  }
  return kExitOk;
}

int cmd_coefficients(const std::string& world_path, const std::string& rule,
                     const std::string& out_path) {
  const hybrid::HybridWorld w = load_world_arg(world_path);
  const hybrid::CemCoefficients c =
      hybrid::compute_coefficients(w, parse_rule(rule));
  hybrid::CsvTable t;
  t.header = {"group", "element", "a", "b", "posterior",
              "degenerate", "tangency_residual", "posterior_reachable"};
  for (int l = 1; l <= w.num_groups(); ++l) {
    for (int k = 1; k <= static_cast<int>(w.group(l).size()); ++k) {
      const hybrid::CemCoefficient& cc = c.at(l, k);
      t.rows.push_back({std::to_string(l), std::to_string(k),
                        hybrid::format_number(cc.a),
                        hybrid::format_number(cc.b),
                        hybrid::format_number(cc.posterior),
                        cc.degenerate ? "1" : "0",
                        hybrid::format_number(cc.tangency_residual),
                        cc.posterior_reachable ? "1" : "0"});
    }
  }
  hybrid::RunManifest m;
  m.command = "coefficients --world " + world_path + " --rule " + rule;
  m.world_hash = world_hash_or_empty(world_path);
  m.tolerances = "quad_abs=" + hybrid::format_number(c.quad_abs_tol) +
                 ",quad_rel=" + hybrid::format_number(c.quad_rel_tol);
  emit_csv(m, t, out_path);
  for (const std::string& warning : c.warnings) {
    std::fprintf(stderr, "warning: %s\n", warning.c_str());
  }
  return kExitOk;
}

std::vector<hybrid::PooledReport> load_reports(const hybrid::HybridWorld& w,
                                               const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationFailure("cannot open reports file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationFailure("reports file is not valid JSON: " +
                            std::string(e.what()));
  }
  if (!j.is_array()) {
    throw ValidationFailure("reports file must be a JSON array");
  }
  std::vector<hybrid::PooledReport> out;
  for (const auto& entry : j) {
    try {
      const int agent = entry.at("agent").get<int>();
      const int space = entry.at("space").get<int>();
      hybrid::Report r =
          space == 0
              ? hybrid::make_expert(entry.at("value").get<double>())
              : hybrid::make_discrete(space, entry.at("element").get<int>());
      hybrid::check_report(w, r);
      out.push_back({agent, r});
    } catch (const nlohmann::json::exception& e) {
      throw ValidationFailure("bad report entry: " + std::string(e.what()));
    } catch (const std::invalid_argument& e) {
      throw ValidationFailure("bad report entry: " + std::string(e.what()));
    }
  }
  return out;
}

int cmd_pay(const std::string& world_path, const std::string& mechanism,
            const std::string& reports_path, std::uint64_t seed,
            const std::string& out_path) {
  const hybrid::HybridWorld w = load_world_arg(world_path);
  const std::vector<hybrid::PooledReport> reports = load_reports(w, reports_path);
  const hybrid::ReportPools pools = hybrid::ReportPools::build(w, reports);

  hybrid::CsvTable t;
  t.header = {"agent", "payment"};
  try {
    if (mechanism == "cem") {
      const hybrid::CemCoefficients coeffs = hybrid::compute_coefficients(w);
      const hybrid::PeerAssignment peers = hybrid::sample_peers(pools, seed, 2);
      for (const auto& pool : pools.pools) {
        for (const hybrid::PooledReport& r : pool) {
          const int own = hybrid::report_space(r.report);
          const int peer_id =
              peers.peers.at(r.agent)[static_cast<std::size_t>(own)];
          const double pay = hybrid::cem_pay(w, coeffs, r.report,
                                             pools.find(peer_id).report);
          t.rows.push_back({std::to_string(r.agent),
                            hybrid::format_number(pay)});
        }
      }
    } else if (mechanism == "mibm") {
      const hybrid::MibmConfig cfg = hybrid::MibmConfig::all_log(
          w.num_groups() + 1, hybrid::CoefficientSchedule::InverseTotal());
      const hybrid::PeerAssignment peers =
          hybrid::sample_peers(pools, seed, cfg.min_own_pool);
      for (const auto& pool : pools.pools) {
        for (const hybrid::PooledReport& r : pool) {
          const double pay = hybrid::mibm_pay(w, cfg, pools, r.agent, peers);
          t.rows.push_back({std::to_string(r.agent),
                            hybrid::format_number(pay)});
        }
      }
    } else {
      std::fprintf(stderr, "unknown mechanism '%s' (want cem|mibm)\n",
                   mechanism.c_str());
      return kExitUsage;
    }
  } catch (const hybrid::PoolTooSmall& e) {
    throw ValidationFailure(e.what());
  }
  hybrid::RunManifest m;
  m.command = "pay --world " + world_path + " --mechanism " + mechanism +
              " --reports " + reports_path;
  m.world_hash = world_hash_or_empty(world_path);
  m.seed = std::to_string(seed);
  emit_csv(m, t, out_path);
  return kExitOk;
}

int cmd_verify(const std::string& world_path, const std::string& mechanism,
               int grid_n, double tol, int sppm_group) {
  const hybrid::HybridWorld w = load_world_arg(world_path);
  const hybrid::DeviationGrid grid = hybrid::DeviationGrid::build(w, grid_n);

  hybrid::MechanismUnderTest mech;
  hybrid::CemCoefficients coeffs;
  hybrid::MibmConfig cfg;
  if (mechanism == "cem") {
    mech.kind = hybrid::MechanismKind::Cem;
    coeffs = hybrid::compute_coefficients(w);
    mech.cem = &coeffs;
  } else if (mechanism == "mibm") {
    mech.kind = hybrid::MechanismKind::Mibm;
    cfg = hybrid::MibmConfig::all_log(
        w.num_groups() + 1, hybrid::CoefficientSchedule::InverseTotal());
    mech.mibm = &cfg;
    if (tol == 1e-7) tol = 1e-8;  // tighter default for the exact-sum engine
  } else if (mechanism == "ecgm") {
    mech.kind = hybrid::MechanismKind::Ecgm;
  } else if (mechanism == "sppm") {
    mech.kind = hybrid::MechanismKind::Sppm;
    mech.sppm_group = sppm_group;
  } else {
    std::fprintf(stderr,
                 "unknown mechanism '%s' (want cem|mibm|ecgm|sppm)\n",
                 mechanism.c_str());
    return kExitUsage;
  }

  const hybrid::VerificationReport interior =
      hybrid::verify_interior(w, mech, grid, tol);
  const hybrid::VerificationReport exterior =
      hybrid::verify_exterior(w, mech, grid, tol);
  const bool pass = interior.pass() && exterior.pass();
  std::printf("interior: %s (max gain %s over %lld pairs, %zu tie(s))\n",
              interior.pass() ? "pass" : "FAIL",
              hybrid::format_number(interior.max_gain).c_str(),
              interior.pairs_scanned, interior.ties.size());
  std::printf("exterior: %s (max gain %s over %lld pairs, %zu tie(s))\n",
              exterior.pass() ? "pass" : "FAIL",
              hybrid::format_number(exterior.max_gain).c_str(),
              exterior.pairs_scanned, exterior.ties.size());
  for (const hybrid::VerificationReport* r : {&interior, &exterior}) {
    for (const hybrid::DeviationRecord& rec : r->flagged) {
      std::printf("  flagged: %s -> %s gain %s posterior gap %s\n",
                  rec.truth.describe().c_str(), rec.claim.describe().c_str(),
                  hybrid::format_number(rec.gain).c_str(),
                  hybrid::format_number(rec.posterior_gap).c_str());
    }
  }
  return pass ? kExitOk : kExitVerification;
}

int cmd_simulate(const std::string& world_path, const std::string& sizes,
                 int iterations, std::uint64_t seed,
                 const std::string& out_path) {
  const hybrid::HybridWorld w = load_world_arg(world_path);
  hybrid::ExperimentConfig cfg;
  cfg.iterations = iterations;
  cfg.seed = seed;
  cfg.mechanisms = hybrid::standard_mechanism_setups(w);
  // sizes like "10,50,150": one count applied to every space
  std::string token;
  std::istringstream stream(sizes);
  while (std::getline(stream, token, ',')) {
    int c;
    try {
      c = std::stoi(token);
    } catch (const std::exception&) {
      throw ValidationFailure("bad population size '" + token + "'");
    }
    if (c < 2) throw ValidationFailure("population sizes must be >= 2");
    cfg.sweep.push_back(
        std::vector<int>(static_cast<std::size_t>(w.num_groups() + 1), c));
  }
  if (cfg.sweep.empty()) throw ValidationFailure("no population sizes given");

  const auto curves = hybrid::run_curve(w, cfg);
  hybrid::CsvTable t;
  t.header = {"mechanism", "population", "accuracy", "ci_low", "ci_high"};
  for (const hybrid::AccuracyCurve& curve : curves) {
    for (const hybrid::AccuracyPoint& pt : curve.points) {
      t.rows.push_back({curve.mechanism, std::to_string(pt.population),
                        hybrid::format_number(pt.accuracy),
                        hybrid::format_number(pt.ci_low),
                        hybrid::format_number(pt.ci_high)});
    }
  }
  hybrid::RunManifest m;
  m.command = "simulate --world " + world_path + " --sizes " + sizes +
              " --iterations " + std::to_string(iterations);
  m.world_hash = world_hash_or_empty(world_path);
  m.seed = std::to_string(seed);
  emit_csv(m, t, out_path);
  return kExitOk;
}

int cmd_fixture(const std::string& name, const std::string& write_world) {
  const hybrid::HybridWorld w = hybrid::fixtures::by_name(name);
  if (!write_world.empty()) {
    hybrid::save_world(w, write_world);
    std::printf("wrote %s\n", write_world.c_str());
  }

  std::printf("fixture %s: prior=%s, %d group(s)\n", name.c_str(),
              hybrid::format_number(w.prior).c_str(), w.num_groups());
  const hybrid::CemCoefficients c = hybrid::compute_coefficients(w);
  std::printf("CEM coefficients (log rule):\n");
  for (int l = 1; l <= w.num_groups(); ++l) {
    for (int k = 1; k <= static_cast<int>(w.group(l).size()); ++k) {
      const hybrid::CemCoefficient& cc = c.at(l, k);
      if (cc.degenerate) {
        std::printf("  group %d element %d: degenerate (zero transform)\n", l,
                    k);
      } else {
        std::printf("  group %d element %d: a=%s b=%s posterior=%s\n", l, k,
                    hybrid::format_number(cc.a).c_str(),
                    hybrid::format_number(cc.b).c_str(),
                    hybrid::format_number(cc.posterior).c_str());
      }
    }
  }

  if (name == "exclusion") {
    const double r = hybrid::sppm_pay(w, 1, 1, 3, hybrid::ScoringRule::Log);
    std::printf("SPPM(theta1_1, theta1_3) = %s (= ln 0.9)\n",
                hybrid::format_number(r).c_str());
    const std::vector<hybrid::PooledReport> reports{
        {1, hybrid::make_discrete(1, 1)}, {2, hybrid::make_discrete(1, 3)}};
    const hybrid::ReportPools pools = hybrid::ReportPools::build(w, reports);
    hybrid::PeerAssignment peers;
    peers.peers[1] = {-1, 2, -1};
    peers.peers[2] = {-1, 1, -1};
    hybrid::MibmConfig cfg = hybrid::MibmConfig::all_log(
        3, hybrid::CoefficientSchedule::Constant(0.5));
    cfg.min_own_pool = 2;
    const double m1 = hybrid::mibm_pay(w, cfg, pools, 1, peers);
    const double m2 = hybrid::mibm_pay(w, cfg, pools, 2, peers);
    std::printf("MIBM equality witness: pay(N1_A)=%s pay(N1_B)=%s equal=%s\n",
                hybrid::format_number(m1).c_str(),
                hybrid::format_number(m2).c_str(), m1 == m2 ? "yes" : "NO");
    const double c1 = hybrid::cem_pay(w, c, hybrid::make_discrete(1, 1),
                                      hybrid::make_discrete(1, 3));
    const double c2 = hybrid::cem_pay(w, c, hybrid::make_discrete(1, 3),
                                      hybrid::make_discrete(1, 1));
    std::printf("CEM pays the same pair differently: %s vs %s\n",
                hybrid::format_number(c1).c_str(),
                hybrid::format_number(c2).c_str());
  }
  if (name == "runexp") {
    std::printf("element posteriors:\n");
    for (int l = 1; l <= w.num_groups(); ++l) {
      for (int k = 1; k <= static_cast<int>(w.group(l).size()); ++k) {
        std::printf("  group %d %s: %s\n", l,
                    w.group(l).elements[static_cast<std::size_t>(k - 1)].c_str(),
                    hybrid::format_number(
                        hybrid::posterior_y(w, hybrid::make_discrete(l, k)))
                        .c_str());
      }
    }
  }
  if (name == "example2" || name == "high-variance" || name == "standard" ||
      name == "prior08") {
    for (int l = 1; l <= w.num_groups(); ++l) {
      std::printf("group %d PMFs:\n  q0 =", l);
      for (double v : w.group(l).q0) {
        std::printf(" %s", hybrid::format_number(v).c_str());
      }
      std::printf("\n  q1 =");
      for (double v : w.group(l).q1) {
        std::printf(" %s", hybrid::format_number(v).c_str());
      }
      std::printf("\n");
    }
  }
  return kExitOk;
}

}  // namespace

namespace hybrid {

int cli_main(const std::vector<std::string>& argv) {
  CLI::App app{"peer prediction mechanisms for hybrid crowds"};
  app.require_subcommand(1);

  // model validate
  CLI::App* model = app.add_subcommand("model", "model inspection");
  model->require_subcommand(1);
  CLI::App* validate = model->add_subcommand("validate", "validate a world file");
  std::string mv_world;
  validate->add_option("--world", mv_world, "world JSON file")->required();

  // posterior
  CLI::App* posterior =
      app.add_subcommand("posterior", "posterior over the ground truth");
  std::string po_world;
  std::optional<double> po_signal;
  std::optional<int> po_group, po_element;
  posterior->add_option("--world", po_world, "world JSON file")->required();
  posterior->add_option("--signal", po_signal, "expert signal value");
  posterior->add_option("--group", po_group, "group index (1-based)");
  posterior->add_option("--element", po_element, "element index (1-based)");

  // coefficients
  CLI::App* coefficients =
      app.add_subcommand("coefficients", "per-element affine transforms");
  std::string co_world, co_rule = "log", co_out;
  coefficients->add_option("--world", co_world, "world JSON file")->required();
  coefficients->add_option("--rule", co_rule, "log|quadratic");
  coefficients->add_option("--out", co_out, "CSV output path (default stdout)");

  // pay
  CLI::App* pay = app.add_subcommand("pay", "realized payments for a report set");
  std::string pa_world, pa_mechanism, pa_reports, pa_out;
  std::uint64_t pa_seed = 1;
  pay->add_option("--world", pa_world, "world JSON file")->required();
  pay->add_option("--mechanism", pa_mechanism, "cem|mibm")->required();
  pay->add_option("--reports", pa_reports, "reports JSON file")->required();
  pay->add_option("--seed", pa_seed, "peer-sampling seed");
  pay->add_option("--out", pa_out, "CSV output path (default stdout)");

  // verify
  CLI::App* verify =
      app.add_subcommand("verify", "numerical truthfulness verification");
  std::string ve_world, ve_mechanism;
  int ve_grid = 201, ve_group = 1;
  double ve_tol = 1e-7;
  verify->add_option("--world", ve_world, "world JSON file")->required();
  verify->add_option("--mechanism", ve_mechanism, "cem|mibm|ecgm|sppm")
      ->required();
  verify->add_option("--grid", ve_grid, "expert posterior grid points");
  verify->add_option("--tol", ve_tol, "gain tolerance");
  verify->add_option("--group", ve_group, "group for sppm");

  // simulate
  CLI::App* simulate =
      app.add_subcommand("simulate", "MAP-accuracy Monte-Carlo curves");
  std::string si_world, si_sizes = "10,50,150,300", si_out;
  int si_iterations = 1000;
  std::uint64_t si_seed = 1;
  simulate->add_option("--world", si_world, "world JSON file")->required();
  simulate->add_option("--sizes", si_sizes, "per-space counts, comma separated");
  simulate->add_option("--iterations", si_iterations, "Monte-Carlo iterations");
  simulate->add_option("--seed", si_seed, "run seed");
  simulate->add_option("--out", si_out, "CSV output path (default stdout)");

  // fixture
  CLI::App* fixture =
      app.add_subcommand("fixture", "built-in worked-example worlds");
  std::string fi_name, fi_write;
  fixture->add_option("--name", fi_name, "runexp|exclusion|example2")
      ->required();
  fixture->add_option("--write-world", fi_write, "save the world as JSON");

  std::vector<std::string> args(argv.rbegin(), argv.rend());
  if (!args.empty()) args.pop_back();  // program name
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (validate->parsed()) return cmd_model_validate(mv_world);
    if (posterior->parsed()) {
      return cmd_posterior(po_world, po_signal, po_group, po_element);
    }
    if (coefficients->parsed()) {
      return cmd_coefficients(co_world, co_rule, co_out);
    }
    if (pay->parsed()) {
      return cmd_pay(pa_world, pa_mechanism, pa_reports, pa_seed, pa_out);
    }
    if (verify->parsed()) {
      return cmd_verify(ve_world, ve_mechanism, ve_grid, ve_tol, ve_group);
    }
    if (simulate->parsed()) {
      return cmd_simulate(si_world, si_sizes, si_iterations, si_seed, si_out);
    }
    if (fixture->parsed()) return cmd_fixture(fi_name, fi_write);
  } catch (const ValidationFailure& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const hybrid::ModelError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace hybrid

int main(int argc, char** argv) {
  return hybrid::cli_main(std::vector<std::string>(argv, argv + argc));
}
