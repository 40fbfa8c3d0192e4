#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "sbcp/errors.hpp"
#include "sbcp/threshold.hpp"

namespace sbcp {

/// Asymmetric piecewise-linear loss around the target miscoverage 1 - alpha.
/// lambda1 is the slope on the overcovering side (G* <= 1 - alpha), lambda2 on
/// the undercovering side.
struct LossParams {
  double lambda1 = 0.1;
  double lambda2 = 10.0;
  double alpha = 0.9;

  void validate() const {
    if (!(lambda1 > 0.0 && lambda1 < lambda2 && std::isfinite(lambda2))) {
      throw ConfigError("loss: need 0 < lambda1 < lambda2");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("loss: alpha must lie in (0,1)");
  }

  /// Lipschitz constant of the loss as a function of G*.
  double lipschitz() const { return std::max(lambda1, lambda2); }
  /// sup |phi| over G* in [0,1].
  double phi_max() const { return std::max(lambda1 * (1.0 - alpha), lambda2 * alpha); }
};

/// phi as a function of the miscoverage value g = G*(tau). Nonpositive.
inline double loss_phi(double g, const LossParams& p) {
  const double target = 1.0 - p.alpha;
  const double gap = std::abs(g - target);
  return g <= target ? -p.lambda1 * gap : -p.lambda2 * gap;
}

/// phi(tau) = psi(G*(tau)); -inf maps to G* = 0, +inf to G* = 1.
template <class Cdf>
double loss_phi(const Threshold& tau, const Cdf& g_star, const LossParams& p) {
  return loss_phi(g_star(tau), p);
}

/// |phi(tau*) - phi(tau_t)|.
template <class Cdf>
double inst_regret(const Threshold& tau_t, const Threshold& tau_star, const Cdf& g_star, const LossParams& p) {
  return std::abs(loss_phi(tau_star, g_star, p) - loss_phi(tau_t, g_star, p));
}

/// R_T <= K (2 log T + 4 sqrt(T log T) + 1) + 4 phi_max.
inline double regret_bound(std::size_t horizon, double lipschitz, double phi_max) {
  if (horizon == 0) throw DomainError("regret_bound: T must be >= 1");
  const double T = static_cast<double>(horizon);
  const double logT = std::log(T);
  return lipschitz * (2.0 * logT + 4.0 * std::sqrt(T * logT) + 1.0) + 4.0 * phi_max;
}

struct RoundRecord {
  std::size_t t = 0;
  std::string policy;
  Threshold tau = Threshold::neg_inf();
  bool covered = false;
  double inst_regret = 0.0;
  double cum_regret = 0.0;
  bool undercover = false;
  std::optional<std::size_t> set_size;
};

inline double coverage_rate(std::span<const RoundRecord> records) {
  if (records.empty()) throw QueryError("coverage_rate: empty trace");
  const auto covered = std::count_if(records.begin(), records.end(), [](const auto& r) { return r.covered; });
  return static_cast<double>(covered) / static_cast<double>(records.size());
}

inline std::size_t undercoverage_count(std::span<const RoundRecord> records) {
  if (records.empty()) throw QueryError("undercoverage_count: empty trace");
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [](const auto& r) { return r.undercover; }));
}

}  // namespace sbcp
