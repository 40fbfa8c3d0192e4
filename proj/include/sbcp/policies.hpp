#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "sbcp/errors.hpp"
#include "sbcp/feedback.hpp"
#include "sbcp/threshold.hpp"
#include "sbcp/truncated_ecdf.hpp"

namespace sbcp {

enum class PolicyKind { kSps, kGreedy, kAci, kDlr, kEtc, kConEtc };

inline std::string_view policy_id(PolicyKind k) {
  switch (k) {
    case PolicyKind::kSps: return "sps";
    case PolicyKind::kGreedy: return "greedy";
    case PolicyKind::kAci: return "aci";
    case PolicyKind::kDlr: return "dlr";
    case PolicyKind::kEtc: return "etc";
    case PolicyKind::kConEtc: return "con_etc";
  }
  return "?";
}

inline std::optional<PolicyKind> parse_policy_kind(std::string_view id) {
  for (auto k : {PolicyKind::kSps, PolicyKind::kGreedy, PolicyKind::kAci, PolicyKind::kDlr,
                 PolicyKind::kEtc, PolicyKind::kConEtc}) {
    if (policy_id(k) == id) return k;
  }
  return std::nullopt;
}

// Learning-rate and exploration-length grids searched per task.
inline const std::vector<double>& aci_gamma_grid() {
  static const std::vector<double> grid{0.001, 0.002, 0.004, 0.008, 0.016, 0.032, 0.064, 0.128};
  return grid;
}
inline const std::vector<std::size_t>& etc_explore_grid() {
  static const std::vector<std::size_t> grid{100, 250, 500, 1000};
  return grid;
}

struct PolicySpec {
  PolicyKind kind = PolicyKind::kSps;
  double alpha = 0.9;
  std::size_t horizon = 10000;
  double aci_gamma = 0.0;
  double dlr_exponent = 0.1;
  std::optional<double> dlr_tau1;
  std::size_t explore_rounds = 0;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
    if (horizon == 0) throw ConfigError("horizon must be positive");
    switch (kind) {
      case PolicyKind::kAci:
        if (!(aci_gamma > 0.0) || !std::isfinite(aci_gamma)) throw ConfigError("aci: gamma must be > 0");
        break;
      case PolicyKind::kDlr:
        if (!(dlr_exponent > 0.0) || !std::isfinite(dlr_exponent)) {
          throw ConfigError("dlr: exponent must be > 0");
        }
        if (!dlr_tau1 || !std::isfinite(*dlr_tau1)) {
          throw ConfigError("dlr: tau1 is required when the environment has no finite lower score bound");
        }
        break;
      case PolicyKind::kEtc:
      case PolicyKind::kConEtc:
        if (explore_rounds < 1 || explore_rounds >= horizon) {
          throw ConfigError(std::string(policy_id(kind)) + ": exploration length m must satisfy 1 <= m < T");
        }
        break;
      default:
        break;
    }
  }

  std::string id() const { return std::string(policy_id(kind)); }

  // Identifies the swept parameter value, empty for unswept policies.
  std::string grid_label() const {
    switch (kind) {
      case PolicyKind::kAci: return "gamma=" + format_real(aci_gamma);
      case PolicyKind::kEtc:
      case PolicyKind::kConEtc: return "m=" + std::to_string(explore_rounds);
      default: return {};
    }
  }
};

namespace detail {

class RoundCounter {
 public:
  explicit RoundCounter(std::size_t horizon) : horizon_(horizon) {}
  std::size_t round() const { return t_; }
  std::size_t horizon() const { return horizon_; }
  void require_open() const {
    if (t_ > horizon_) throw ContractViolation("update past the horizon");
  }
  void advance() { ++t_; }

 private:
  std::size_t horizon_;
  std::size_t t_ = 1;
};

}  // namespace detail

/// Semi-bandit prediction set: threshold = running max of the banded cutoff.
class SpsPolicy {
 public:
  explicit SpsPolicy(const PolicySpec& spec) : alpha_(spec.alpha), rounds_(spec.horizon), ecdf_(spec.horizon) {}

  Threshold propose() const { return tau_; }

  void update(const FeedbackEvent& fb) {
    rounds_.require_open();
    check_feedback(fb, tau_);
    ecdf_.insert(fb.recorded.value());
    last_cutoff_ = ecdf_.conformal_cutoff(alpha_);
    if (last_cutoff_.is_pos_inf()) throw std::logic_error("sps: banded cutoff cannot be +inf");
    tau_ = max(last_cutoff_, tau_);
    rounds_.advance();
  }

  std::size_t round() const { return rounds_.round(); }
  const TruncatedEcdf& ecdf() const { return ecdf_; }
  Threshold last_cutoff() const { return last_cutoff_; }

 private:
  double alpha_;
  detail::RoundCounter rounds_;
  TruncatedEcdf ecdf_;
  Threshold tau_ = Threshold::neg_inf();
  Threshold last_cutoff_ = Threshold::neg_inf();
};

/// Plug-in empirical quantile of the truncated ECDF; no band, no max step.
class GreedyPolicy {
 public:
  explicit GreedyPolicy(const PolicySpec& spec) : alpha_(spec.alpha), rounds_(spec.horizon), ecdf_(spec.horizon) {}

  Threshold propose() const { return tau_; }

  void update(const FeedbackEvent& fb) {
    rounds_.require_open();
    check_feedback(fb, tau_);
    ecdf_.insert(fb.recorded.value());
    tau_ = ecdf_.conformal_cutoff(alpha_, 0.0);
    rounds_.advance();
  }

  std::size_t round() const { return rounds_.round(); }
  const TruncatedEcdf& ecdf() const { return ecdf_; }

 private:
  double alpha_;
  detail::RoundCounter rounds_;
  TruncatedEcdf ecdf_;
  Threshold tau_ = Threshold::neg_inf();
};

/// Adaptive conformal inference run on semi-bandit data: the miscoverage
/// budget beta follows the usual ACI recursion, but the quantile function is
/// fit only on revealed scores.
class AciPolicy {
 public:
  explicit AciPolicy(const PolicySpec& spec)
      : alpha_(spec.alpha), gamma_(spec.aci_gamma), beta_(1.0 - spec.alpha), rounds_(spec.horizon),
        observed_(spec.horizon) {}

  Threshold propose() const { return tau_; }

  void update(const FeedbackEvent& fb) {
    rounds_.require_open();
    check_feedback(fb, tau_);
    const double err = fb.observed ? 0.0 : 1.0;
    if (fb.observed) {
      observed_.insert(*fb.score);
    } else {
      ++misses_;
    }
    beta_ += gamma_ * ((1.0 - alpha_) - err);
    tau_ = observed_.empty() ? Threshold::neg_inf() : observed_.level_cutoff(std::clamp(beta_, 0.0, 1.0));
    rounds_.advance();
  }

  std::size_t round() const { return rounds_.round(); }
  double beta() const { return beta_; }
  std::size_t misses() const { return misses_; }

 private:
  double alpha_;
  double gamma_;
  double beta_;
  detail::RoundCounter rounds_;
  TruncatedEcdf observed_;
  std::size_t misses_ = 0;
  Threshold tau_ = Threshold::neg_inf();
};

/// Decaying-learning-rate gradient step on the threshold itself, with
/// eta_t = t^-(1/2 + exponent).
class DlrPolicy {
 public:
  explicit DlrPolicy(const PolicySpec& spec)
      : alpha_(spec.alpha), exponent_(spec.dlr_exponent), rounds_(spec.horizon), tau_(spec.dlr_tau1.value()) {}

  Threshold propose() const { return Threshold::finite(tau_); }

  void update(const FeedbackEvent& fb) {
    rounds_.require_open();
    check_feedback(fb, propose());
    const double err = fb.observed ? 0.0 : 1.0;
    tau_ += step_size(rounds_.round()) * ((1.0 - alpha_) - err);
    rounds_.advance();
  }

  double step_size(std::size_t t) const { return std::pow(static_cast<double>(t), -(0.5 + exponent_)); }
  std::size_t round() const { return rounds_.round(); }

 private:
  double alpha_;
  double exponent_;
  detail::RoundCounter rounds_;
  double tau_;
};

/// Explore-then-commit. Plays -inf for m rounds, then commits once to the
/// empirical cutoff of the explored scores. The conservative variant commits
/// to the banded cutoff instead.
class ExploreThenCommitPolicy {
 public:
  explicit ExploreThenCommitPolicy(const PolicySpec& spec)
      : alpha_(spec.alpha), explore_(spec.explore_rounds), conservative_(spec.kind == PolicyKind::kConEtc),
        rounds_(spec.horizon), buffer_(spec.horizon) {}

  Threshold propose() const { return tau_; }

  void update(const FeedbackEvent& fb) {
    rounds_.require_open();
    check_feedback(fb, tau_);
    const std::size_t t = rounds_.round();
    if (t <= explore_) {
      buffer_.insert(*fb.score);
      if (t == explore_) {
        tau_ = buffer_.conformal_cutoff(alpha_, conservative_ ? buffer_.epsilon() : 0.0);
        committed_ = true;
      }
    }
    rounds_.advance();
  }

  bool committed() const { return committed_; }
  std::size_t round() const { return rounds_.round(); }

 private:
  double alpha_;
  std::size_t explore_;
  bool conservative_;
  detail::RoundCounter rounds_;
  TruncatedEcdf buffer_;
  Threshold tau_ = Threshold::neg_inf();
  bool committed_ = false;
};

/// Uniform propose/update facade over the concrete policies.
class Policy {
 public:
  using State = std::variant<SpsPolicy, GreedyPolicy, AciPolicy, DlrPolicy, ExploreThenCommitPolicy>;

  explicit Policy(const PolicySpec& spec) : spec_(spec), state_(make_state(spec)) {}

  Threshold propose() const {
    return std::visit([](const auto& p) { return p.propose(); }, state_);
  }
  void update(const FeedbackEvent& fb) {
    std::visit([&](auto& p) { p.update(fb); }, state_);
  }
  std::size_t round() const {
    return std::visit([](const auto& p) { return p.round(); }, state_);
  }

  const PolicySpec& spec() const { return spec_; }
  const State& state() const { return state_; }

 private:
  static State make_state(const PolicySpec& spec) {
    spec.validate();
    switch (spec.kind) {
      case PolicyKind::kSps: return SpsPolicy(spec);
      case PolicyKind::kGreedy: return GreedyPolicy(spec);
      case PolicyKind::kAci: return AciPolicy(spec);
      case PolicyKind::kDlr: return DlrPolicy(spec);
      case PolicyKind::kEtc:
      case PolicyKind::kConEtc: return ExploreThenCommitPolicy(spec);
    }
    throw ConfigError("unknown policy kind");
  }

  PolicySpec spec_;
  State state_;
};

}  // namespace sbcp
