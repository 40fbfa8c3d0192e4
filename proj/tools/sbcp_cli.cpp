// Command-line front end: run / sweep / oracle / validate.
//
// Exit codes: 0 success, 1 config error, 2 run failure, 3 I/O error.

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sbcp/sbcp.hpp"

namespace {

enum ExitCode : int { kOk = 0, kConfigError = 1, kRunFailure = 2, kIoError = 3 };

struct CommonFlags {
  std::string config;
  std::string policy;
  std::string out;
  std::vector<std::string> set;
  double alpha = 0.0;
  std::size_t horizon = 0;
  std::size_t runs = 0;
  std::uint64_t seed = 0;
  std::size_t workers = 0;
  bool trace = false;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool batch) {
  cmd->add_option("--config", f.config, "experiment config file (INI)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--alpha", f.alpha, "target coverage in (0,1)");
  cmd->add_option("--set", f.set, "override any config key: section.key=value (repeatable)");
  if (!batch) return;
  cmd->add_option("--policy", f.policy, "comma-separated policy ids (sps,greedy,aci,dlr,etc,con_etc)");
  cmd->add_option("--horizon", f.horizon, "rounds per run (T)");
  cmd->add_option("--runs", f.runs, "independent runs per grid point");
  cmd->add_option("--seed", f.seed, "base seed");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--workers", f.workers, "parallel runs (0 = hardware threads)");
  cmd->add_flag("--trace", f.trace, "also write per-round trace.csv");
}

sbcp::ConfigOverrides overrides_from(const CLI::App* cmd, const CommonFlags& f) {
  sbcp::ConfigOverrides o;
  for (const auto& kv : f.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw sbcp::ConfigError("--set expects section.key=value, got '" + kv + "'");
    o[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  auto given = [&](const char* name) {
    const auto* opt = cmd->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
  };
  if (given("--alpha")) o["experiment.alpha"] = sbcp::format_real(f.alpha);
  if (given("--policy")) o["experiment.policies"] = f.policy;
  if (given("--horizon")) o["experiment.horizon"] = std::to_string(f.horizon);
  if (given("--runs")) o["experiment.runs"] = std::to_string(f.runs);
  if (given("--seed")) o["experiment.seed"] = std::to_string(f.seed);
  if (given("--out")) o["experiment.out"] = f.out;
  if (given("--workers")) o["experiment.workers"] = std::to_string(f.workers);
  if (given("--trace")) o["experiment.trace"] = f.trace ? "true" : "false";
  return o;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_metadata(const sbcp::ExperimentConfig& cfg, const sbcp::AggregateResult& res, const std::string& config_path) {
  nlohmann::json meta;
  meta["created_utc"] = utc_timestamp();
  meta["config"] = config_path;
  meta["environment"] = cfg.environment_label;
  meta["alpha"] = cfg.alpha;
  meta["horizon"] = cfg.horizon;
  meta["runs"] = cfg.runs;
  meta["seed"] = cfg.seed;
  meta["selected"] = res.selected;
  meta["warnings"] = res.warnings;
  const auto path = cfg.out / "meta.json";
  std::ofstream os(path);
  if (!os) throw sbcp::IoError("cannot write " + path.string());
  os << meta.dump(2) << '\n';
}

int do_batch(const CLI::App* cmd, const CommonFlags& f, bool sweep) {
  const auto cfg = sbcp::load_config(f.config, overrides_from(cmd, f), sweep);
  const auto res = sbcp::run_batch(cfg);
  for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
  sbcp::emit_csv(res, cfg.out, cfg.trace);
  write_metadata(cfg, res, f.config);

  std::cout << "environment " << cfg.environment_label << ", T=" << cfg.horizon << ", runs=" << cfg.runs << '\n';
  for (const auto& row : res.sweep) {
    std::cout << "  sweep " << row.policy << '[' << row.grid_label << "] final regret "
              << sbcp::format_real(row.mean_final_regret) << (row.selected ? "  <- selected" : "") << '\n';
  }
  for (const auto& row : res.summary) {
    if (row.t != cfg.horizon) continue;
    std::cout << "  " << std::left << std::setw(8) << row.policy << std::setw(20) << row.metric
              << sbcp::format_real(row.mean) << "  [" << sbcp::format_real(row.ci_lo) << ", "
              << sbcp::format_real(row.ci_hi) << "]\n";
  }
  std::cout << "wrote " << cfg.out.string() << '\n';
  return kOk;
}

int do_oracle(const CLI::App* cmd, const CommonFlags& f, const std::vector<double>& at) {
  const auto cfg = sbcp::load_config(f.config, overrides_from(cmd, f));
  const auto& env = *cfg.environment;
  const auto tau_star = env.tau_star(cfg.alpha);
  std::cout << "environment," << cfg.environment_label << '\n'
            << "alpha," << sbcp::format_real(cfg.alpha) << '\n'
            << "tau_star," << sbcp::to_string(tau_star) << '\n'
            << "g_star_at_tau_star," << sbcp::format_real(env.oracle()(tau_star)) << '\n'
            << "miscoverage_at_tau_star," << sbcp::format_real(env.oracle().miscoverage(tau_star)) << '\n';
  if (!at.empty()) {
    std::cout << "tau,g_star,miscoverage\n";
    for (double v : at) {
      std::cout << sbcp::format_real(v) << ',' << sbcp::format_real(env.oracle()(v)) << ','
                << sbcp::format_real(env.oracle().miscoverage(v)) << '\n';
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online conformal prediction under semi-bandit feedback"};
  app.require_subcommand(1);

  CommonFlags run_flags, sweep_flags, oracle_flags, validate_flags;
  std::vector<double> oracle_at;
  auto* run = app.add_subcommand("run", "run the configured policies and aggregate across runs");
  add_common(run, run_flags, true);
  auto* sweep = app.add_subcommand("sweep", "run with the default ACI gamma / ETC m grids and report the sweep");
  add_common(sweep, sweep_flags, true);
  auto* oracle = app.add_subcommand("oracle", "print tau* and G* for the configured environment");
  add_common(oracle, oracle_flags, false);
  oracle->add_option("--at", oracle_at, "evaluate G* at these thresholds")->delimiter(',');
  auto* validate = app.add_subcommand("validate", "check a config file without running it");
  add_common(validate, validate_flags, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*run) return do_batch(run, run_flags, false);
    if (*sweep) return do_batch(sweep, sweep_flags, true);
    if (*oracle) return do_oracle(oracle, oracle_flags, oracle_at);
    if (*validate) {
      const auto cfg = sbcp::load_config(validate_flags.config, overrides_from(validate, validate_flags));
      std::size_t points = 0;
      for (const auto& p : cfg.policies) points += p.expand().size();
      std::cout << "ok: " << cfg.environment_label << ", " << cfg.policies.size() << " policies, " << points
                << " grid points\n";
      return kOk;
    }
  } catch (const sbcp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const sbcp::IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::exception& e) {
    std::cerr << "run failure: " << e.what() << '\n';
    return kRunFailure;
  }
  return kConfigError;
}
