#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sbcp/errors.hpp"
#include "sbcp/threshold.hpp"

namespace sbcp {

// Absolute slack on the miscoverage budget 1 - alpha. Decimal coverage levels
// such as 0.9 are not representable, so 1 - 0.9 lands a few ulps below 0.1 and
// would otherwise reject a count that sits exactly on the budget.
inline constexpr double kBudgetSlack = 1e-12;

/// Failure probability tied to the horizon: delta = 2 / T^2.
inline double horizon_delta(std::size_t horizon) {
  if (horizon == 0) throw ConfigError("horizon must be positive");
  const double T = static_cast<double>(horizon);
  return 2.0 / (T * T);
}

/// DKW half-width sqrt(ln(2/delta) / (2t)).
inline double dkw_epsilon(std::size_t t, double delta) {
  if (t == 0) throw QueryError("dkw_epsilon: t must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("dkw_epsilon: delta must lie in (0,1)");
  return std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(t)));
}

class BandParams {
 public:
  explicit BandParams(double delta) : delta_(delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw DomainError("BandParams: delta must lie in (0,1)");
  }
  static BandParams for_horizon(std::size_t horizon) { return BandParams(horizon_delta(horizon)); }

  double delta() const { return delta_; }
  double epsilon(std::size_t t) const { return dkw_epsilon(t, delta_); }

 private:
  double delta_;
};

/// Empirical CDF over recorded (possibly truncated) scores with a DKW upper
/// band. Recorded values are truncated once, when they are inserted: a miss at
/// round j stores the threshold of round j. Queries never re-truncate; for a
/// nondecreasing threshold sequence the cutoff is the same either way.
class TruncatedEcdf {
 public:
  explicit TruncatedEcdf(std::size_t horizon)
      : horizon_(horizon), band_(BandParams::for_horizon(horizon)) {}
  TruncatedEcdf(std::size_t horizon, double delta) : horizon_(horizon), band_(delta) {
    if (horizon == 0) throw ConfigError("horizon must be positive");
  }

  void insert(double value) {
    if (!std::isfinite(value)) throw DomainError("TruncatedEcdf::insert: value is not finite");
    samples_.insert(std::upper_bound(samples_.begin(), samples_.end(), value), value);
  }

  std::size_t count() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  std::span<const double> samples() const { return samples_; }
  std::size_t horizon() const { return horizon_; }
  const BandParams& band() const { return band_; }
  double delta() const { return band_.delta(); }

  /// Band half-width at the current count.
  double epsilon() const {
    require_nonempty("epsilon");
    return band_.epsilon(count());
  }

  /// Fraction of recorded values <= tau.
  double eval_g(double tau) const {
    require_nonempty("eval_g");
    const auto it = std::upper_bound(samples_.begin(), samples_.end(), tau);
    return static_cast<double>(it - samples_.begin()) / static_cast<double>(count());
  }
  double eval_g(const Threshold& tau) const {
    require_nonempty("eval_g");
    if (tau.is_neg_inf()) return 0.0;
    if (tau.is_pos_inf()) return 1.0;
    return eval_g(tau.value());
  }

  /// eval_g(tau) + epsilon_t. Not clipped to 1.
  double eval_upper(double tau) const { return eval_g(tau) + epsilon(); }
  double eval_upper(const Threshold& tau) const { return eval_g(tau) + epsilon(); }

  /// sup{ tau : G_t(tau) + epsilon_t <= 1 - alpha } with the band width taken
  /// from the horizon.
  Threshold conformal_cutoff(double alpha) const { return conformal_cutoff(alpha, epsilon()); }

  /// Same query with an explicit band width (0 gives the plain empirical
  /// quantile used by greedy and ETC).
  Threshold conformal_cutoff(double alpha, double epsilon) const {
    require_nonempty("conformal_cutoff");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("conformal_cutoff: alpha must lie in (0,1)");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
      throw DomainError("conformal_cutoff: epsilon must be finite and >= 0");
    }
    const double t = static_cast<double>(count());
    const double budget = 1.0 - alpha;
    return order_statistic_cutoff(
        [&](std::size_t k) { return static_cast<double>(k) / t + epsilon <= budget + kBudgetSlack; },
        budget - epsilon);
  }

  /// sup{ tau : G_t(tau) <= level } for a level in [0,1].
  Threshold level_cutoff(double level) const {
    require_nonempty("level_cutoff");
    if (!(level >= 0.0 && level <= 1.0)) throw DomainError("level_cutoff: level must lie in [0,1]");
    const double t = static_cast<double>(count());
    return order_statistic_cutoff(
        [&](std::size_t k) { return static_cast<double>(k) / t <= level + kBudgetSlack; }, level);
  }

  /// Debug dump: a `# t,delta,epsilon` comment header then one sorted sample
  /// per line under a `value` column.
  void dump_csv(std::ostream& os) const {
    os << "# t=" << count() << ",delta=" << format_real(delta())
       << ",epsilon=" << (empty() ? std::string("nan") : format_real(epsilon())) << '\n';
    os << "value\n";
    for (double v : samples_) os << format_real(v) << '\n';
  }

 private:
  void require_nonempty(const char* what) const {
    if (samples_.empty()) {
      throw QueryError(std::string("TruncatedEcdf::") + what + ": no samples recorded");
    }
  }

  // G_t is a step function, so {tau : #{s <= tau} <= m} = (-inf, s_(m+1)) and
  // the sup is the (m+1)-th order statistic, where m is the largest count the
  // predicate admits. `level_guess` seeds m; the predicate has the final say.
  template <class Admits>
  Threshold order_statistic_cutoff(Admits admits, double level_guess) const {
    const std::size_t t = count();
    if (!admits(0)) return Threshold::neg_inf();
    std::size_t m = 0;
    if (level_guess > 0.0) {
      m = std::min(t, static_cast<std::size_t>(std::floor(level_guess * static_cast<double>(t))));
    }
    while (m > 0 && !admits(m)) --m;
    while (m < t && admits(m + 1)) ++m;
    if (m >= t) return Threshold::pos_inf();
    return Threshold::finite(samples_[m]);
  }

  std::size_t horizon_;
  BandParams band_;
  std::vector<double> samples_;
};

}  // namespace sbcp
