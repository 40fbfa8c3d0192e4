#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "sbcp/environments.hpp"
#include "sbcp/errors.hpp"
#include "sbcp/metrics.hpp"
#include "sbcp/policies.hpp"

namespace sbcp {

/// A policy plus the parameter values to sweep. At most one of the grids is
/// used, depending on the kind.
struct PolicyGrid {
  PolicySpec base;
  std::vector<double> gammas;
  std::vector<std::size_t> explore_lengths;

  std::vector<PolicySpec> expand() const {
    std::vector<PolicySpec> out;
    switch (base.kind) {
      case PolicyKind::kAci:
        for (double g : gammas) {
          auto s = base;
          s.aci_gamma = g;
          out.push_back(s);
        }
        break;
      case PolicyKind::kEtc:
      case PolicyKind::kConEtc:
        for (auto m : explore_lengths) {
          auto s = base;
          s.explore_rounds = m;
          out.push_back(s);
        }
        break;
      default:
        out.push_back(base);
    }
    return out;
  }
};

struct ExperimentConfig {
  std::shared_ptr<const Environment> environment;
  std::string environment_label;
  std::vector<PolicyGrid> policies;
  double alpha = 0.9;
  std::size_t horizon = 10000;
  std::size_t runs = 10;
  std::uint64_t seed = 0;
  LossParams loss;
  std::filesystem::path out = "results";
  bool trace = false;
  std::size_t workers = 0;  // 0: one per hardware thread

  void validate() const {
    if (!environment) throw ConfigError("no environment configured");
    if (policies.empty()) throw ConfigError("no policies configured");
    if (runs < 1) throw ConfigError("runs must be >= 1");
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    loss.validate();
    for (const auto& g : policies) {
      const auto specs = g.expand();
      if (specs.empty()) throw ConfigError(g.base.id() + ": empty parameter grid");
      for (const auto& s : specs) s.validate();
    }
  }
};

/// Dotted `section.key` -> value overrides, applied on top of the file.
using ConfigOverrides = std::map<std::string, std::string>;

namespace detail {

inline const std::map<std::string, std::set<std::string>>& config_schema() {
  static const std::map<std::string, std::set<std::string>> schema{
      {"experiment",
       {"alpha", "horizon", "runs", "seed", "lambda1", "lambda2", "out", "trace", "workers", "policies"}},
      {"environment",
       {"kind", "distribution", "a", "b", "mu", "sigma", "p", "q", "atoms", "weights", "path", "sampling", "bids",
        "bidders", "range_lo", "range_hi"}},
      {"sps", {}},
      {"greedy", {}},
      {"aci", {"gamma"}},
      {"dlr", {"tau1", "exponent"}},
      {"etc", {"m"}},
      {"con_etc", {"m"}},
  };
  return schema;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto cell : split_commas(s)) {
    if (!cell.empty()) out.emplace_back(cell);
  }
  return out;
}

class Section {
 public:
  Section(const boost::property_tree::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  std::optional<std::string> raw(const std::string& key) const {
    if (!tree_) return std::nullopt;
    auto v = tree_->get_optional<std::string>(boost::property_tree::ptree::path_type(key, '\0'));
    if (!v) return std::nullopt;
    return std::string(trim(*v));
  }

  std::string str(const std::string& key, const std::string& fallback) const { return raw(key).value_or(fallback); }

  std::string required(const std::string& key) const {
    auto v = raw(key);
    if (!v || v->empty()) throw ConfigError(name_ + "." + key + " is required");
    return *v;
  }

  template <class Number>
  std::optional<Number> number(const std::string& key) const {
    auto v = raw(key);
    if (!v) return std::nullopt;
    auto parsed = parse_number<Number>(*v);
    if (!parsed) throw ConfigError(name_ + "." + key + ": not a valid number: '" + *v + "'");
    return parsed;
  }

  template <class Number>
  Number number_or(const std::string& key, Number fallback) const {
    return number<Number>(key).value_or(fallback);
  }

  template <class Number>
  Number required_number(const std::string& key) const {
    auto v = number<Number>(key);
    if (!v) throw ConfigError(name_ + "." + key + " is required");
    return *v;
  }

  template <class Number>
  std::optional<std::vector<Number>> number_list(const std::string& key) const {
    auto v = raw(key);
    if (!v) return std::nullopt;
    std::vector<Number> out;
    for (const auto& cell : split_list(*v)) {
      auto parsed = parse_number<Number>(cell);
      if (!parsed) throw ConfigError(name_ + "." + key + ": not a valid number: '" + cell + "'");
      out.push_back(*parsed);
    }
    if (out.empty()) throw ConfigError(name_ + "." + key + ": empty list");
    return out;
  }

  bool boolean(const std::string& key, bool fallback) const {
    auto v = raw(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
    if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
    throw ConfigError(name_ + "." + key + ": expected a boolean, got '" + *v + "'");
  }

 private:
  const boost::property_tree::ptree* tree_;
  std::string name_;
};

inline Distribution parse_distribution(const Section& env) {
  const auto name = env.required("distribution");
  Distribution d;
  if (name == "uniform") {
    d = UniformDist{env.number_or("a", 0.0), env.number_or("b", 1.0)};
  } else if (name == "gaussian") {
    d = GaussianDist{env.number_or("mu", 0.0), env.number_or("sigma", 1.0)};
  } else if (name == "beta") {
    d = BetaDist{env.required_number<double>("p"), env.required_number<double>("q")};
  } else if (name == "pointmix") {
    auto atoms = env.number_list<double>("atoms");
    auto weights = env.number_list<double>("weights");
    if (!atoms || !weights) throw ConfigError("environment: pointmix needs atoms and weights");
    d = make_point_mix(*atoms, *weights);
  } else {
    throw ConfigError("environment.distribution: unknown distribution '" + name + "'");
  }
  validate(d);
  return d;
}

inline std::filesystem::path resolve(const std::filesystem::path& base_dir, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

inline std::shared_ptr<const Environment> parse_environment(const Section& env, const std::filesystem::path& base_dir,
                                                            std::string& label) {
  const auto kind = env.required("kind");
  std::optional<ScoreRange> declared;
  {
    const auto lo = env.number<double>("range_lo");
    const auto hi = env.number<double>("range_hi");
    if (lo || hi) {
      declared = ScoreRange{};
      if (lo) declared->lo = *lo;
      if (hi) declared->hi = *hi;
    }
  }
  if (kind == "synthetic") {
    label = "synthetic:" + env.required("distribution");
    return std::make_shared<const Environment>(SyntheticEnv{parse_distribution(env)}, declared);
  }
  if (kind == "score_log") {
    const auto path = resolve(base_dir, env.required("path"));
    if (!std::filesystem::exists(path)) throw ConfigError("score log not found: " + path.string());
    const auto sampling = env.str("sampling", "with_replacement");
    ScoreLogEnv log{std::make_shared<const ScoreLog>(read_score_log_file(path.string())),
                    Sampling::kWithReplacement};
    if (sampling == "without_replacement") {
      log.sampling = Sampling::kWithoutReplacement;
    } else if (sampling != "with_replacement") {
      throw ConfigError("environment.sampling must be with_replacement or without_replacement");
    }
    label = "score_log:" + path.filename().string();
    return std::make_shared<const Environment>(std::move(log), declared);
  }
  if (kind == "auction") {
    AuctionEnv auction;
    auction.bidders = env.number_or<std::size_t>("bidders", 2);
    if (auto bids = env.raw("bids")) {
      const auto path = resolve(base_dir, *bids);
      if (!std::filesystem::exists(path)) throw ConfigError("bid pool not found: " + path.string());
      auction.values = std::make_shared<const std::vector<double>>(read_bid_pool_file(path.string()));
      label = "auction:" + path.filename().string();
    } else {
      auction.values = parse_distribution(env);
      label = "auction:" + env.required("distribution");
    }
    return std::make_shared<const Environment>(std::move(auction), declared);
  }
  throw ConfigError("environment.kind must be synthetic, score_log or auction (got '" + kind + "')");
}

}  // namespace detail

/// Builds a validated ExperimentConfig from an INI property tree. Relative data
/// paths resolve against `base_dir` (the config file's directory).
inline ExperimentConfig build_config(boost::property_tree::ptree tree, const ConfigOverrides& overrides,
                                     const std::filesystem::path& base_dir, bool force_default_grids = false) {
  using boost::property_tree::ptree;
  const auto& schema = detail::config_schema();
  for (const auto& [key, value] : overrides) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) throw ConfigError("override '" + key + "' must be section.key");
    const auto section = key.substr(0, dot);
    const auto name = key.substr(dot + 1);
    const ptree::path_type section_path(section, '\0');
    auto existing = tree.get_child_optional(section_path);
    ptree& target = existing ? *existing : tree.add_child(section_path, ptree());
    target.put(ptree::path_type(name, '\0'), value);
  }
  for (const auto& [section, body] : tree) {
    const auto it = schema.find(section);
    if (it == schema.end()) throw ConfigError("unknown config section [" + section + "]");
    if (!body.data().empty()) throw ConfigError("key '" + section + "' must live inside a section");
    for (const auto& [key, _] : body) {
      if (!it->second.contains(key)) throw ConfigError("unknown key " + section + "." + key);
    }
  }
  auto section = [&](const std::string& name) {
    const auto it = tree.find(name);
    return detail::Section(it == tree.not_found() ? nullptr : &it->second, name);
  };

  ExperimentConfig cfg;
  const auto exp = section("experiment");
  cfg.alpha = exp.number_or("alpha", 0.9);
  cfg.horizon = exp.number_or<std::size_t>("horizon", 10000);
  cfg.runs = exp.number_or<std::size_t>("runs", 10);
  cfg.seed = exp.number_or<std::uint64_t>("seed", 0);
  cfg.loss = LossParams{exp.number_or("lambda1", 0.1), exp.number_or("lambda2", 10.0), cfg.alpha};
  cfg.out = exp.str("out", "results");
  cfg.trace = exp.boolean("trace", false);
  cfg.workers = exp.number_or<std::size_t>("workers", 0);
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ConfigError("experiment.alpha must lie in (0,1)");

  if (tree.find("environment") == tree.not_found()) throw ConfigError("missing [environment] section");
  cfg.environment = detail::parse_environment(section("environment"), base_dir, cfg.environment_label);

  const auto listed = detail::split_list(exp.str("policies", "sps,greedy,aci,dlr"));
  if (listed.empty()) throw ConfigError("experiment.policies is empty");
  std::set<PolicyKind> seen;
  for (const auto& id : listed) {
    const auto kind = parse_policy_kind(id);
    if (!kind) throw ConfigError("unknown policy '" + id + "'");
    if (!seen.insert(*kind).second) throw ConfigError("policy '" + id + "' listed twice");
    PolicyGrid grid;
    grid.base.kind = *kind;
    grid.base.alpha = cfg.alpha;
    grid.base.horizon = cfg.horizon;
    const auto sec = section(id);
    switch (*kind) {
      case PolicyKind::kAci:
        grid.gammas = force_default_grids ? aci_gamma_grid() : sec.number_list<double>("gamma").value_or(aci_gamma_grid());
        break;
      case PolicyKind::kEtc:
      case PolicyKind::kConEtc:
        grid.explore_lengths = force_default_grids
                                   ? etc_explore_grid()
                                   : sec.number_list<std::size_t>("m").value_or(etc_explore_grid());
        break;
      case PolicyKind::kDlr: {
        grid.base.dlr_exponent = sec.number_or("exponent", 0.1);
        grid.base.dlr_tau1 = sec.number<double>("tau1");
        if (!grid.base.dlr_tau1 && std::isfinite(cfg.environment->range().lo)) {
          grid.base.dlr_tau1 = cfg.environment->range().lo;
        }
        break;
      }
      default:
        break;
    }
    cfg.policies.push_back(std::move(grid));
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig parse_config(std::istream& in, const ConfigOverrides& overrides = {},
                                     const std::filesystem::path& base_dir = ".", bool force_default_grids = false) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }
  return build_config(std::move(tree), overrides, base_dir, force_default_grids);
}

inline ExperimentConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {},
                                    bool force_default_grids = false) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in, overrides, path.parent_path().empty() ? "." : path.parent_path(), force_default_grids);
}

}  // namespace sbcp
