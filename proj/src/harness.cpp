#include "mbprei/harness.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <ostream>
#include <string>

#include "mbprei/limits.hpp"
#include "mbprei/ranmat.hpp"
#include "mbprei/scenario_io.hpp"
#include "mbprei/sim.hpp"

namespace mbprei {

namespace {

struct CommonOpts {
  std::string scenario;
  std::uint64_t seed = 1;
  int workers = 1;
  std::string out_dir = ".";
  std::string format = "json";
};

int default_workers() {
  if (const char* env = std::getenv("MBPREI_WORKERS")) {
    const int w = std::atoi(env);
    if (w >= 1) return w;
  }
  return 1;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--scenario", opts.scenario, "scenario JSON file")->required();
  cmd->add_option("--seed", opts.seed, "master seed");
  cmd->add_option("--workers", opts.workers, "worker threads (never changes results)");
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--format", opts.format, "trajectory export format")
      ->check(CLI::IsMember({"json", "csv"}));
}

std::string write_report(const CommonOpts& opts, const std::string& command, Json body) {
  Json report;
  report["command"] = command;
  report["scenario"] = opts.scenario;
  report["seed"] = opts.seed;
  report["report"] = std::move(body);
  std::filesystem::create_directories(opts.out_dir);
  const std::string path =
      (std::filesystem::path(opts.out_dir) / (command + ".json")).string();
  write_text(path, report.dump(2) + "\n");
  return path;
}

MeanCheckMode parse_mode(const std::string& mode) {
  if (mode == "quenched-xiY" || mode == "quenched-env-immigration")
    return MeanCheckMode::QuenchedEnvAndImmigration;
  if (mode == "quenched-xi" || mode == "quenched-env") return MeanCheckMode::QuenchedEnv;
  if (mode == "annealed") return MeanCheckMode::Annealed;
  throw SpecError("unknown mean-check mode: " + mode);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"simulation and spectral toolkit for multi-type branching processes "
               "with immigration in a random environment"};
  app.require_subcommand(1);

  CommonOpts opts;
  opts.workers = default_workers();

  int n = 0;  // 0 = use the subcommand's default
  std::vector<int> n_list;
  int reps = 0;  // 0 = use the subcommand's default
  int initial_type = 0;
  double s = -1.0;
  double p = 1.0;
  std::vector<double> p_list;
  double eps = 1e-6;
  double tol = 1e-10;
  int horizon_cap = 200;
  bool no_immigration = false;
  bool enumerate = false;
  std::string mode = "quenched-xiY";

  CLI::App* c_validate = app.add_subcommand("validate", "check a scenario file");
  add_common(c_validate, opts);

  CLI::App* c_simulate = app.add_subcommand("simulate", "simulate one tagged trajectory");
  add_common(c_simulate, opts);
  c_simulate->add_option("--n", n, "generations");
  c_simulate->add_option("--type", initial_type, "initial type (0-based)");
  c_simulate->add_flag("--no-immigration", no_immigration, "disable immigration");

  CLI::App* c_directions = app.add_subcommand(
      "directions", "certify a horizon and tabulate backward directions");
  add_common(c_directions, opts);
  c_directions->add_option("--n", n, "window length for the sampled table");
  c_directions->add_option("--horizon-cap", horizon_cap, "largest horizon to certify");
  c_directions->add_option("--tol", tol, "terminal-insensitivity tolerance");

  CLI::App* c_gamma = app.add_subcommand("estimate-gamma", "top Lyapunov exponent");
  add_common(c_gamma, opts);
  c_gamma->add_option("--n", n, "product length (default 1000)");
  c_gamma->add_option("--reps", reps, "replicates (default 200)");

  CLI::App* c_kappa = app.add_subcommand("estimate-kappa", "moment scaling kappa(s)");
  add_common(c_kappa, opts);
  c_kappa->add_option("--s", s, "exponent (s <= 0)")->required();
  c_kappa->add_option("--n", n, "product length (default 12)");
  c_kappa->add_option("--n-list", n_list, "product lengths")->delimiter(',');
  c_kappa->add_option("--reps", reps, "replicates (default 100000)");
  c_kappa->add_flag("--enumerate", enumerate, "sum all environment words exactly");

  CLI::App* c_cond = app.add_subcommand("check-conditions", "survey model conditions");
  add_common(c_cond, opts);
  c_cond->add_option("--p-list", p_list, "immigration moment orders")->delimiter(',');

  CLI::App* c_mean = app.add_subcommand("check-mean", "normalized-mean identity check");
  add_common(c_mean, opts);
  c_mean->add_option("--mode", mode, "quenched-xiY | quenched-xi | annealed");
  c_mean->add_option("--n", n, "generation (default 5)");
  c_mean->add_option("--reps", reps, "replicates (default 100000)");
  c_mean->add_option("--type", initial_type, "initial type (0-based)");
  c_mean->add_option("--horizon-cap", horizon_cap, "largest horizon to certify");

  CLI::App* c_lp = app.add_subcommand("sweep-lp", "p-th moment sweep of the normalized process");
  add_common(c_lp, opts);
  c_lp->add_option("--p", p, "moment order (> 0)")->required();
  c_lp->add_option("--n-list", n_list, "generations (default 5,10,20)")->delimiter(',');
  c_lp->add_option("--reps", reps, "replicates (default 100000)");
  c_lp->add_option("--type", initial_type, "initial type (0-based)");
  c_lp->add_option("--horizon-cap", horizon_cap, "largest horizon to certify");

  CLI::App* c_probe = app.add_subcommand("probe-limit", "distribution probe of the pure process");
  add_common(c_probe, opts);
  c_probe->add_option("--n-list", n_list, "generations (default 5,10,20)")->delimiter(',');
  c_probe->add_option("--reps", reps, "replicates (default 10000)");
  c_probe->add_option("--eps", eps, "survival threshold (default 1e-6)");
  c_probe->add_option("--type", initial_type, "initial type (0-based)");
  c_probe->add_option("--horizon-cap", horizon_cap, "largest horizon to certify");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    const EnvironmentSpec spec = load_scenario(opts.scenario);
    const std::vector<Violation> violations = validate_spec(spec);

    if (c_validate->parsed()) {
      Json body;
      body["valid"] = violations.empty();
      body["violations"] = violations_to_json(violations);
      const std::string path = write_report(opts, "validate", std::move(body));
      out << (violations.empty() ? "scenario valid" : "scenario invalid") << "; report at "
          << path << "\n";
      for (const Violation& v : violations) err << v.where << ": " << v.message << "\n";
      return violations.empty() ? 0 : 1;
    }

    if (!violations.empty()) {
      for (const Violation& v : violations) err << v.where << ": " << v.message << "\n";
      return 1;
    }

    if (c_simulate->parsed()) {
      if (n == 0) n = 10;
      const EnvironmentSequence env = sample_environment(spec, n, opts.seed);
      const Trajectory traj =
          simulate_trajectory(env, initial_type, n, opts.seed, !no_immigration);
      std::filesystem::create_directories(opts.out_dir);
      std::string path;
      if (opts.format == "csv") {
        path = (std::filesystem::path(opts.out_dir) / "trajectory.csv").string();
        write_text(path, trajectory_to_csv(traj));
      } else {
        path = (std::filesystem::path(opts.out_dir) / "trajectory.json").string();
        write_text(path, trajectory_to_json(traj).dump(2) + "\n");
      }
      out << "simulated " << n << " generations; final total";
      for (int c = 0; c < spec.d; ++c) out << ' ' << traj.totals.back()[c];
      out << "; written to " << path << "\n";
      return 0;
    }

    if (c_directions->parsed()) {
      if (n == 0) n = 20;
      const HorizonResult hr = choose_horizon(spec, tol, horizon_cap, opts.seed);
      const EnvironmentSequence env = sample_environment(spec, n + hr.horizon, opts.seed);
      const DirectionTable table = forward_directions(env, uniform_direction(spec.d));
      Json body;
      body["certified"] = horizon_result_to_json(hr);
      body["table"] = direction_table_to_json(table);
      const std::string path = write_report(opts, "directions", std::move(body));
      out << "certified horizon " << hr.horizon << " (contraction "
          << hr.contraction_factor << "); report at " << path << "\n";
      return 0;
    }

    if (c_gamma->parsed()) {
      if (n == 0) n = 1000;
      if (reps == 0) reps = 200;
      const SpectralReport rep = lyapunov_estimate(spec, n, reps, opts.seed, opts.workers);
      const std::string path = write_report(opts, "estimate-gamma", spectral_report_to_json(rep));
      out << "gamma_hat=" << rep.gamma_hat << " se=" << rep.std_error << " regime="
          << rep.regime << "; report at " << path << "\n";
      return 0;
    }

    if (c_kappa->parsed()) {
      if (n == 0) n = 12;
      if (reps == 0) reps = 100000;
      if (n_list.empty()) n_list = {n};
      const KappaReport rep =
          enumerate ? kappa_enumerate(spec, s, n_list)
                    : kappa_estimate(spec, s, n_list, reps, opts.seed, opts.workers);
      const std::string path = write_report(opts, "estimate-kappa", kappa_report_to_json(rep));
      out << "kappa_hat(" << s << ")=" << rep.kappa_hat << "; report at " << path << "\n";
      return 0;
    }

    if (c_cond->parsed()) {
      if (p_list.empty()) p_list = {1.0, 2.0};
      const ConditionReport rep = check_conditions(spec, p_list);
      const std::string path =
          write_report(opts, "check-conditions", condition_report_to_json(rep));
      out << "conditions surveyed; report at " << path << "\n";
      return 0;
    }

    if (c_mean->parsed()) {
      if (n == 0) n = 5;
      if (reps == 0) reps = 100000;
      const MeanCheckReport rep = quenched_mean_check(
          spec, initial_type, n, reps, opts.seed, parse_mode(mode), opts.workers, horizon_cap);
      const std::string path = write_report(opts, "check-mean", mean_check_report_to_json(rep));
      out << "formula=" << rep.formula << " mc_mean=" << rep.mc_mean << " pass="
          << (rep.pass ? "yes" : "no") << "; report at " << path << "\n";
      return rep.pass ? 0 : 2;
    }

    if (c_lp->parsed()) {
      if (reps == 0) reps = 100000;
      if (n_list.empty()) n_list = {5, 10, 20};
      const LpReport rep = lp_sweep(spec, initial_type, p, n_list, reps, opts.seed,
                                    opts.workers, horizon_cap);
      const std::string path = write_report(opts, "sweep-lp", lp_report_to_json(rep));
      out << "predicted=" << rep.predicted << " observed=" << rep.observed
          << "; report at " << path << "\n";
      return 0;
    }

    if (c_probe->parsed()) {
      if (reps == 0) reps = 10000;
      if (n_list.empty()) n_list = {5, 10, 20};
      const NondegeneracyReport rep = limit_probe(spec, initial_type, n_list, reps,
                                                  opts.seed, eps, opts.workers, horizon_cap);
      const std::string path =
          write_report(opts, "probe-limit", nondegeneracy_report_to_json(rep));
      out << "classification=" << rep.classification << "; report at " << path << "\n";
      return 0;
    }

    err << "no subcommand selected\n";
    return 1;
  } catch (const SpecError& e) {
    err << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace mbprei
