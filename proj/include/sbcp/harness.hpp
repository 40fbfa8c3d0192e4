#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "sbcp/config.hpp"
#include "sbcp/environments.hpp"
#include "sbcp/errors.hpp"
#include "sbcp/feedback.hpp"
#include "sbcp/metrics.hpp"
#include "sbcp/policies.hpp"
#include "sbcp/rng.hpp"
#include "sbcp/threshold.hpp"

namespace sbcp {

/// Summary checkpoints: {1, 10, 100, 1000, T} plus every multiple of T/100,
/// restricted to [1, T].
inline std::vector<std::size_t> checkpoints(std::size_t horizon) {
  std::set<std::size_t> pts{1, 10, 100, 1000, horizon};
  if (horizon >= 100) {
    const std::size_t step = horizon / 100;
    for (std::size_t k = 1; k <= 100; ++k) pts.insert(k * step);
  }
  std::vector<std::size_t> out;
  for (auto t : pts) {
    if (t >= 1 && t <= horizon) out.push_back(t);
  }
  return out;
}

// Regret increments are stored at the same 12-digit precision the trace CSV
// uses, so the cumulative column can be rebuilt from the file exactly.
inline double quantize_12(double v) { return std::strtod(format_real(v).c_str(), nullptr); }

/// One episode: propose -> draw -> feedback -> update -> record, for t = 1..T.
inline std::vector<RoundRecord> run_single(const Environment& env, const PolicySpec& spec, const LossParams& loss,
                                           std::uint64_t seed) {
  Policy policy(spec);
  auto stream = env.stream(seed);
  // The loss is evaluated on the miscoverage P(s < tau) of each threshold.
  const auto g_star = [&oracle = env.oracle()](const Threshold& t) { return oracle.miscoverage(t); };
  const Threshold tau_star = env.tau_star(spec.alpha);
  const double phi_star = loss_phi(tau_star, g_star, loss);
  const std::string id = spec.id();

  std::vector<RoundRecord> records;
  records.reserve(spec.horizon);
  double cum = 0.0;
  for (std::size_t t = 1; t <= spec.horizon; ++t) {
    const Threshold tau = policy.propose();
    const Draw draw = stream.next();
    const FeedbackEvent fb = apply_feedback(tau, draw.score);
    policy.update(fb);

    RoundRecord r;
    r.t = t;
    r.policy = id;
    r.tau = tau;
    r.covered = fb.observed;
    r.inst_regret = quantize_12(std::abs(phi_star - loss_phi(tau, g_star, loss)));
    cum += r.inst_regret;
    r.cum_regret = cum;
    r.undercover = tau > tau_star;
    if (draw.row) r.set_size = set_size(*draw.row, tau);
    records.push_back(std::move(r));
  }
  return records;
}

inline std::vector<RoundRecord> run_single(const ExperimentConfig& cfg, const PolicySpec& spec, std::uint64_t seed) {
  return run_single(*cfg.environment, spec, cfg.loss, seed);
}

struct SummaryRow {
  std::string policy;
  std::size_t t = 0;
  std::string metric;
  double mean = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct SweepRow {
  std::string policy;
  std::string grid_label;
  double mean_final_regret = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  bool selected = false;
};

struct RunTrace {
  std::string policy;
  std::string grid_label;
  std::size_t run_index = 0;
  std::uint64_t seed = 0;
  std::vector<RoundRecord> records;
};

struct AggregateResult {
  std::vector<SummaryRow> summary;
  std::vector<SweepRow> sweep;
  std::vector<RunTrace> traces;             // selected grid points only, when tracing
  std::map<std::string, std::string> selected;  // policy id -> grid label
  std::vector<std::string> warnings;
};

inline const std::vector<std::string>& summary_metrics() {
  static const std::vector<std::string> m{"cum_regret", "coverage_rate", "undercoverage_count"};
  return m;
}

struct MeanCi {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

/// Mean with a normal-approximation 95% interval: mean +/- 1.96 s / sqrt(n),
/// s the sample standard deviation. A single value gets a zero-width interval.
inline MeanCi mean_ci95(const std::vector<double>& xs) {
  if (xs.empty()) throw QueryError("mean_ci95: no values");
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() < 2) return {mean, mean, mean};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double half = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return {mean, mean - half, mean + half};
}

namespace detail {

// Per-run metric values at each checkpoint, indexed [metric][checkpoint].
using CheckpointValues = std::vector<std::vector<double>>;

inline CheckpointValues checkpoint_values(const std::vector<RoundRecord>& records, const std::vector<std::size_t>& cps) {
  CheckpointValues out(summary_metrics().size(), std::vector<double>(cps.size()));
  std::size_t covered = 0, under = 0, next = 0;
  for (const auto& r : records) {
    covered += r.covered;
    under += r.undercover;
    while (next < cps.size() && cps[next] == r.t) {
      out[0][next] = r.cum_regret;
      out[1][next] = static_cast<double>(covered) / static_cast<double>(r.t);
      out[2][next] = static_cast<double>(under);
      ++next;
    }
  }
  return out;
}

}  // namespace detail

/// Runs every (policy grid point x run) pair, picks the lowest mean final
/// regret point of each swept policy, and aggregates across runs.
inline AggregateResult run_batch(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto cps = checkpoints(cfg.horizon);

  struct Task {
    std::size_t policy_index;
    PolicySpec spec;
    std::size_t run_index;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  std::vector<std::vector<std::size_t>> tasks_by_point;  // flattened grid point -> task ids
  std::vector<std::pair<std::size_t, PolicySpec>> points;
  for (std::size_t pi = 0; pi < cfg.policies.size(); ++pi) {
    for (const auto& spec : cfg.policies[pi].expand()) {
      points.emplace_back(pi, spec);
      tasks_by_point.emplace_back();
      for (std::size_t r = 0; r < cfg.runs; ++r) {
        tasks_by_point.back().push_back(tasks.size());
        tasks.push_back({pi, spec, r, derive_run_seed(cfg.seed, spec.id(), spec.grid_label(), r)});
      }
    }
  }

  std::vector<detail::CheckpointValues> values(tasks.size());
  std::vector<std::vector<RoundRecord>> traces(cfg.trace ? tasks.size() : 0);
  std::vector<std::string> failures(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        auto records = run_single(cfg, tasks[i].spec, tasks[i].seed);
        values[i] = detail::checkpoint_values(records, cps);
        if (cfg.trace) traces[i] = std::move(records);
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    }
  };
  std::size_t n_workers = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
  n_workers = std::min(n_workers, tasks.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::string failure_report;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!failures[i].empty()) {
      failure_report += "\n  " + tasks[i].spec.id() + (tasks[i].spec.grid_label().empty() ? "" : "[" + tasks[i].spec.grid_label() + "]") +
                        " run " + std::to_string(tasks[i].run_index) + ": " + failures[i];
    }
  }
  if (!failure_report.empty()) throw RunError("batch failed:" + failure_report);

  AggregateResult result;
  if (cfg.runs == 1) result.warnings.push_back("runs=1: confidence intervals reported with zero width");

  // Select one grid point per policy.
  std::vector<std::size_t> chosen(cfg.policies.size(), SIZE_MAX);
  std::vector<double> best(cfg.policies.size(), INFINITY);
  std::vector<MeanCi> final_regret(points.size());
  for (std::size_t p = 0; p < points.size(); ++p) {
    std::vector<double> finals;
    for (auto i : tasks_by_point[p]) finals.push_back(values[i][0].back());
    final_regret[p] = mean_ci95(finals);
    const auto pi = points[p].first;
    if (final_regret[p].mean < best[pi]) {
      best[pi] = final_regret[p].mean;
      chosen[pi] = p;
    }
  }
  for (std::size_t p = 0; p < points.size(); ++p) {
    const auto& spec = points[p].second;
    if (spec.grid_label().empty()) continue;
    result.sweep.push_back({spec.id(), spec.grid_label(), final_regret[p].mean, final_regret[p].lo,
                            final_regret[p].hi, chosen[points[p].first] == p});
  }

  for (std::size_t pi = 0; pi < cfg.policies.size(); ++pi) {
    const auto p = chosen[pi];
    const auto& spec = points[p].second;
    result.selected[spec.id()] = spec.grid_label();
    for (std::size_t c = 0; c < cps.size(); ++c) {
      for (std::size_t m = 0; m < summary_metrics().size(); ++m) {
        std::vector<double> xs;
        for (auto i : tasks_by_point[p]) xs.push_back(values[i][m][c]);
        const auto ci = mean_ci95(xs);
        result.summary.push_back({spec.id(), cps[c], summary_metrics()[m], ci.mean, ci.lo, ci.hi});
      }
    }
    if (cfg.trace) {
      for (auto i : tasks_by_point[p]) {
        result.traces.push_back({spec.id(), spec.grid_label(), tasks[i].run_index, tasks[i].seed, std::move(traces[i])});
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

inline void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << "policy,t,metric,mean,ci_lo,ci_hi\n";
  for (const auto& r : rows) {
    os << r.policy << ',' << r.t << ',' << r.metric << ',' << format_real(r.mean) << ',' << format_real(r.ci_lo)
       << ',' << format_real(r.ci_hi) << '\n';
  }
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "policy,grid_point,final_cum_regret_mean,ci_lo,ci_hi,selected\n";
  for (const auto& r : rows) {
    os << r.policy << ',' << r.grid_label << ',' << format_real(r.mean_final_regret) << ',' << format_real(r.ci_lo)
       << ',' << format_real(r.ci_hi) << ',' << (r.selected ? 1 : 0) << '\n';
  }
}

inline void write_trace_csv(std::ostream& os, const std::vector<RunTrace>& traces) {
  os << "run_id,policy,t,tau,covered,inst_regret,cum_regret,undercover,set_size\n";
  for (const auto& tr : traces) {
    for (const auto& r : tr.records) {
      os << tr.run_index << ',' << r.policy << ',' << r.t << ',' << to_string(r.tau) << ',' << (r.covered ? 1 : 0)
         << ',' << format_real(r.inst_regret) << ',' << format_real(r.cum_regret) << ',' << (r.undercover ? 1 : 0)
         << ',';
      if (r.set_size) os << *r.set_size;
      os << '\n';
    }
  }
}

namespace detail {

// Writes through a temporary sibling and renames, so a failed write never
// leaves a truncated file behind.
template <class Writer>
void write_file_atomically(const std::filesystem::path& path, Writer&& writer) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
    writer(os);
    os.flush();
    if (!os) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

}  // namespace detail

/// Writes summary.csv, sweep.csv (when any policy was swept) and, when
/// requested and available, trace.csv into `out_dir`.
inline void emit_csv(const AggregateResult& results, const std::filesystem::path& out_dir, bool with_trace) {
  if (results.summary.empty()) throw QueryError("emit_csv: no results");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw IoError("cannot create output directory " + out_dir.string() + (ec ? ": " + ec.message() : ""));
  }
  detail::write_file_atomically(out_dir / "summary.csv", [&](std::ostream& os) { write_summary_csv(os, results.summary); });
  if (!results.sweep.empty()) {
    detail::write_file_atomically(out_dir / "sweep.csv", [&](std::ostream& os) { write_sweep_csv(os, results.sweep); });
  }
  if (with_trace && !results.traces.empty()) {
    detail::write_file_atomically(out_dir / "trace.csv", [&](std::ostream& os) { write_trace_csv(os, results.traces); });
  }
}

}  // namespace sbcp
