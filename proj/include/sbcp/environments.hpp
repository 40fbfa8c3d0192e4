#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/normal.hpp>

#include "sbcp/errors.hpp"
#include "sbcp/feedback.hpp"
#include "sbcp/rng.hpp"
#include "sbcp/threshold.hpp"
#include "sbcp/truncated_ecdf.hpp"

namespace sbcp {

// ---------------------------------------------------------------------------
// Parametric score distributions
// ---------------------------------------------------------------------------

struct UniformDist {
  double a = 0.0;
  double b = 1.0;
};
struct GaussianDist {
  double mu = 0.0;
  double sigma = 1.0;
};
struct BetaDist {
  double p = 1.0;
  double q = 1.0;
};
/// Finite discrete distribution. Atoms are kept sorted; weights sum to one.
struct PointMixDist {
  std::vector<double> atoms;
  std::vector<double> weights;
};

using Distribution = std::variant<UniformDist, GaussianDist, BetaDist, PointMixDist>;

inline PointMixDist make_point_mix(std::vector<double> atoms, std::vector<double> weights) {
  if (atoms.empty() || atoms.size() != weights.size()) {
    throw ConfigError("pointmix: atoms and weights must be nonempty and of equal length");
  }
  std::vector<std::size_t> order(atoms.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return atoms[i] < atoms[j]; });
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("pointmix: weights must be positive");
    total += w;
  }
  PointMixDist out;
  for (auto i : order) {
    if (!std::isfinite(atoms[i])) throw ConfigError("pointmix: atoms must be finite");
    if (!out.atoms.empty() && out.atoms.back() == atoms[i]) {
      out.weights.back() += weights[i] / total;
    } else {
      out.atoms.push_back(atoms[i]);
      out.weights.push_back(weights[i] / total);
    }
  }
  return out;
}

inline void validate(const Distribution& d) {
  std::visit(
      [](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, UniformDist>) {
          if (!(std::isfinite(x.a) && std::isfinite(x.b) && x.b > x.a)) throw ConfigError("uniform: need finite a < b");
        } else if constexpr (std::is_same_v<T, GaussianDist>) {
          if (!(std::isfinite(x.mu) && x.sigma > 0.0 && std::isfinite(x.sigma))) {
            throw ConfigError("gaussian: need finite mu and sigma > 0");
          }
        } else if constexpr (std::is_same_v<T, BetaDist>) {
          if (!(x.p > 0.0 && x.q > 0.0 && std::isfinite(x.p) && std::isfinite(x.q))) {
            throw ConfigError("beta: need p, q > 0");
          }
        } else {
          if (x.atoms.empty() || x.atoms.size() != x.weights.size()) throw ConfigError("pointmix: malformed");
          if (!std::is_sorted(x.atoms.begin(), x.atoms.end())) throw ConfigError("pointmix: atoms unsorted");
        }
      },
      d);
}

inline bool is_continuous(const Distribution& d) { return !std::holds_alternative<PointMixDist>(d); }

inline double cdf(const Distribution& d, double x) {
  if (std::isnan(x)) throw DomainError("cdf: NaN argument");
  return std::visit(
      [x](const auto& dist) -> double {
        using T = std::decay_t<decltype(dist)>;
        if constexpr (std::is_same_v<T, UniformDist>) {
          return std::clamp((x - dist.a) / (dist.b - dist.a), 0.0, 1.0);
        } else if constexpr (std::is_same_v<T, GaussianDist>) {
          if (std::isinf(x)) return x < 0 ? 0.0 : 1.0;
          return boost::math::cdf(boost::math::normal_distribution<double>(dist.mu, dist.sigma), x);
        } else if constexpr (std::is_same_v<T, BetaDist>) {
          if (x <= 0.0) return 0.0;
          if (x >= 1.0) return 1.0;
          return boost::math::cdf(boost::math::beta_distribution<double>(dist.p, dist.q), x);
        } else {
          double acc = 0.0;
          for (std::size_t i = 0; i < dist.atoms.size() && dist.atoms[i] <= x; ++i) acc += dist.weights[i];
          return std::min(acc, 1.0);
        }
      },
      d);
}

/// Inverse-transform draw from a uniform in (0,1).
inline double quantile_from_uniform(const Distribution& d, double u) {
  return std::visit(
      [u](const auto& dist) -> double {
        using T = std::decay_t<decltype(dist)>;
        if constexpr (std::is_same_v<T, UniformDist>) {
          return dist.a + (dist.b - dist.a) * u;
        } else if constexpr (std::is_same_v<T, GaussianDist>) {
          return boost::math::quantile(boost::math::normal_distribution<double>(dist.mu, dist.sigma), u);
        } else if constexpr (std::is_same_v<T, BetaDist>) {
          return boost::math::quantile(boost::math::beta_distribution<double>(dist.p, dist.q), u);
        } else {
          double acc = 0.0;
          for (std::size_t i = 0; i + 1 < dist.atoms.size(); ++i) {
            acc += dist.weights[i];
            if (u < acc) return dist.atoms[i];
          }
          return dist.atoms.back();
        }
      },
      d);
}

inline double sample(const Distribution& d, Rng& rng) { return quantile_from_uniform(d, uniform_open01(rng)); }

struct ScoreRange {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};

inline ScoreRange natural_range(const Distribution& d) {
  return std::visit(
      [](const auto& dist) -> ScoreRange {
        using T = std::decay_t<decltype(dist)>;
        if constexpr (std::is_same_v<T, UniformDist>) {
          return {dist.a, dist.b};
        } else if constexpr (std::is_same_v<T, GaussianDist>) {
          return {};
        } else if constexpr (std::is_same_v<T, BetaDist>) {
          return {0.0, 1.0};
        } else {
          return {dist.atoms.front(), dist.atoms.back()};
        }
      },
      d);
}

// ---------------------------------------------------------------------------
// Score logs and bid pools
// ---------------------------------------------------------------------------

struct ScoreLogRow {
  std::int64_t round_id = 0;
  double gt_score = 0.0;
  std::optional<std::vector<double>> candidates;
};

using ScoreLog = std::vector<ScoreLogRow>;

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class Number>
std::optional<Number> parse_number(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  Number v{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
  return v;
}

inline void strip_bom(std::string& line) {
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
}

}  // namespace detail

/// Reads `round_id,gt_score[,cand_0,cand_1,...]`. Candidate columns, when
/// present, must contain the ground-truth score.
inline ScoreLog read_score_log(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(source + ": empty score log");
  detail::strip_bom(line);
  const auto header = detail::split_commas(line);
  if (header.size() < 2 || header[0] != "round_id" || header[1] != "gt_score") {
    throw ConfigError(source + ": header must start with round_id,gt_score");
  }
  for (std::size_t i = 2; i < header.size(); ++i) {
    if (header[i] != "cand_" + std::to_string(i - 2)) {
      throw ConfigError(source + ": expected column cand_" + std::to_string(i - 2));
    }
  }
  const std::size_t n_cand = header.size() - 2;
  ScoreLog rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_commas(line);
    const auto where = source + ":" + std::to_string(lineno);
    if (cells.size() != header.size()) throw ConfigError(where + ": wrong number of columns");
    ScoreLogRow row;
    const auto id = detail::parse_number<std::int64_t>(cells[0]);
    const auto gt = detail::parse_number<double>(cells[1]);
    if (!id) throw ConfigError(where + ": bad round_id");
    if (!gt || !std::isfinite(*gt)) throw ConfigError(where + ": gt_score must be a finite number");
    row.round_id = *id;
    row.gt_score = *gt;
    if (n_cand > 0) {
      std::vector<double> cands;
      cands.reserve(n_cand);
      for (std::size_t i = 2; i < cells.size(); ++i) {
        const auto v = detail::parse_number<double>(cells[i]);
        if (!v || !std::isfinite(*v)) throw ConfigError(where + ": candidate scores must be finite numbers");
        cands.push_back(*v);
      }
      if (std::find(cands.begin(), cands.end(), row.gt_score) == cands.end()) {
        throw ConfigError(where + ": gt_score does not appear among the candidate scores");
      }
      row.candidates = std::move(cands);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError(source + ": score log has no rows");
  return rows;
}

inline ScoreLog read_score_log_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open score log " + path);
  return read_score_log(in, path);
}

/// One finite bid per line, no header. Blank lines are skipped.
inline std::vector<double> read_bid_pool(std::istream& in, const std::string& source = "<stream>") {
  std::vector<double> bids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) detail::strip_bom(line);
    if (detail::trim(line).empty()) continue;
    const auto v = detail::parse_number<double>(line);
    if (!v || !std::isfinite(*v)) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": bid must be a finite number");
    }
    bids.push_back(*v);
  }
  if (bids.empty()) throw ConfigError(source + ": bid pool is empty");
  return bids;
}

inline std::vector<double> read_bid_pool_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open bid pool " + path);
  return read_bid_pool(in, path);
}

/// Number of candidates with score >= tau, or nullopt when the row carries no
/// candidate scores.
inline std::optional<std::size_t> set_size(const ScoreLogRow& row, const Threshold& tau) {
  if (!row.candidates) return std::nullopt;
  return static_cast<std::size_t>(
      std::count_if(row.candidates->begin(), row.candidates->end(), [&](double c) { return tau.admits(c); }));
}

// ---------------------------------------------------------------------------
// Second-price auction
// ---------------------------------------------------------------------------

struct AuctionRound {
  std::vector<double> bids;
  double b1 = 0.0;
  double b2 = 0.0;

  static AuctionRound from_bids(std::vector<double> bids) {
    if (bids.size() < 2) throw ConfigError("auction round needs at least two bids");
    std::vector<double> top(bids);
    std::partial_sort(top.begin(), top.begin() + 2, top.end(), std::greater<>());
    return AuctionRound{std::move(bids), top[0], top[1]};
  }
};

/// Seller revenue at reserve price p: nothing sells above B1, the reserve is
/// paid between B2 and B1, and the second bid is paid below B2.
inline double auction_reward(double p, const AuctionRound& round) {
  if (!std::isfinite(p)) throw DomainError("auction_reward: reserve price must be finite");
  if (p > round.b1) return 0.0;
  if (p > round.b2) return p;
  return round.b2;
}

// ---------------------------------------------------------------------------
// Environments
// ---------------------------------------------------------------------------

enum class Sampling { kWithReplacement, kWithoutReplacement };

struct SyntheticEnv {
  Distribution dist;
};

struct ScoreLogEnv {
  std::shared_ptr<const ScoreLog> log;
  Sampling sampling = Sampling::kWithReplacement;
};

struct AuctionEnv {
  // Either an empirical bid pool or a parametric value distribution.
  std::variant<std::shared_ptr<const std::vector<double>>, Distribution> values;
  std::size_t bidders = 2;
};

/// Ground-truth score CDF G*(tau) = F(tau)^power, where F is either a
/// parametric CDF or an empirical CDF over a fixed sample. power > 1 models the
/// maximum of `power` i.i.d. draws (the top bid in an auction).
class OracleCdf {
 public:
  OracleCdf(Distribution dist, unsigned power = 1) : base_(std::move(dist)), power_(power) { check_power(); }
  OracleCdf(std::vector<double> sample, unsigned power = 1) : power_(power) {
    if (sample.empty()) throw ConfigError("oracle: empty sample");
    std::sort(sample.begin(), sample.end());
    base_ = std::move(sample);
    check_power();
  }

  double operator()(double tau) const { return std::pow(base_cdf(tau), static_cast<double>(power_)); }
  double operator()(const Threshold& tau) const {
    if (tau.is_neg_inf()) return 0.0;
    if (tau.is_pos_inf()) return 1.0;
    return (*this)(tau.value());
  }

  /// P(s < tau): the miscoverage of the set {s >= tau}. Equals G*(tau) for
  /// continuous distributions; the left limit of G* at atoms otherwise.
  double miscoverage(double tau) const { return std::pow(base_cdf_below(tau), static_cast<double>(power_)); }
  double miscoverage(const Threshold& tau) const {
    if (tau.is_neg_inf()) return 0.0;
    if (tau.is_pos_inf()) return 1.0;
    return miscoverage(tau.value());
  }

  bool continuous() const {
    const auto* d = std::get_if<Distribution>(&base_);
    return d != nullptr && is_continuous(*d);
  }

  /// tau* = sup{ tau : G*(tau) <= 1 - alpha }.
  Threshold tau_star(double alpha) const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("tau_star: alpha must lie in (0,1)");
    const double level = 1.0 - alpha;
    if (continuous()) {
      const double base_level = power_ == 1 ? level : std::pow(level, 1.0 / static_cast<double>(power_));
      return Threshold::finite(quantile_from_uniform(std::get<Distribution>(base_), base_level));
    }
    // Discrete: the sup is the first atom at which G* jumps above the level.
    for (double atom : atoms()) {
      if ((*this)(atom) > level + kBudgetSlack) return Threshold::finite(atom);
    }
    return Threshold::pos_inf();
  }

 private:
  void check_power() const {
    if (power_ < 1) throw ConfigError("oracle: power must be >= 1");
  }

  double base_cdf(double tau) const {
    if (const auto* d = std::get_if<Distribution>(&base_)) return cdf(*d, tau);
    const auto& s = std::get<std::vector<double>>(base_);
    return static_cast<double>(std::upper_bound(s.begin(), s.end(), tau) - s.begin()) /
           static_cast<double>(s.size());
  }

  double base_cdf_below(double tau) const {
    if (const auto* d = std::get_if<Distribution>(&base_)) {
      if (const auto* mix = std::get_if<PointMixDist>(d)) {
        double acc = 0.0;
        for (std::size_t i = 0; i < mix->atoms.size() && mix->atoms[i] < tau; ++i) acc += mix->weights[i];
        return std::min(acc, 1.0);
      }
      return cdf(*d, tau);
    }
    const auto& s = std::get<std::vector<double>>(base_);
    return static_cast<double>(std::lower_bound(s.begin(), s.end(), tau) - s.begin()) /
           static_cast<double>(s.size());
  }

  std::vector<double> atoms() const {
    std::vector<double> out;
    if (const auto* d = std::get_if<Distribution>(&base_)) {
      out = std::get<PointMixDist>(*d).atoms;
    } else {
      out = std::get<std::vector<double>>(base_);
      out.erase(std::unique(out.begin(), out.end()), out.end());
    }
    return out;
  }

  std::variant<Distribution, std::vector<double>> base_;
  unsigned power_;
};

/// One round's hidden outcome.
struct Draw {
  double score = 0.0;
  const ScoreLogRow* row = nullptr;
  std::optional<AuctionRound> auction;
};

class EnvironmentStream;

/// Immutable description of a score-generating process plus its oracle.
class Environment {
 public:
  using Kind = std::variant<SyntheticEnv, ScoreLogEnv, AuctionEnv>;

  explicit Environment(Kind kind, std::optional<ScoreRange> declared = std::nullopt)
      : kind_(std::move(kind)), oracle_(build_oracle(kind_)) {
    range_ = declared ? *declared : default_range(kind_);
  }

  const Kind& kind() const { return kind_; }
  const ScoreRange& range() const { return range_; }
  const OracleCdf& oracle() const { return oracle_; }
  Threshold tau_star(double alpha) const { return oracle_.tau_star(alpha); }

  inline EnvironmentStream stream(std::uint64_t seed) const;

 private:
  static OracleCdf build_oracle(const Kind& kind) {
    return std::visit(
        [](const auto& k) -> OracleCdf {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, SyntheticEnv>) {
            validate(k.dist);
            return OracleCdf(k.dist);
          } else if constexpr (std::is_same_v<T, ScoreLogEnv>) {
            if (!k.log || k.log->empty()) throw ConfigError("score log environment has no rows");
            std::vector<double> gt;
            gt.reserve(k.log->size());
            for (const auto& r : *k.log) gt.push_back(r.gt_score);
            return OracleCdf(std::move(gt));
          } else {
            if (k.bidders < 2) throw ConfigError("auction: bidders per round must be >= 2");
            const auto power = static_cast<unsigned>(k.bidders);
            if (const auto* pool = std::get_if<std::shared_ptr<const std::vector<double>>>(&k.values)) {
              if (!*pool || (*pool)->empty()) throw ConfigError("auction: bid pool is empty");
              return OracleCdf(**pool, power);
            }
            const auto& dist = std::get<Distribution>(k.values);
            validate(dist);
            return OracleCdf(dist, power);
          }
        },
        kind);
  }

  static ScoreRange default_range(const Kind& kind) {
    return std::visit(
        [](const auto& k) -> ScoreRange {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, SyntheticEnv>) {
            return natural_range(k.dist);
          } else if constexpr (std::is_same_v<T, ScoreLogEnv>) {
            return {};
          } else {
            if (const auto* pool = std::get_if<std::shared_ptr<const std::vector<double>>>(&k.values)) {
              const bool nonneg = std::all_of((*pool)->begin(), (*pool)->end(), [](double b) { return b >= 0.0; });
              return nonneg ? ScoreRange{0.0, std::numeric_limits<double>::infinity()} : ScoreRange{};
            }
            return natural_range(std::get<Distribution>(k.values));
          }
        },
        kind);
  }

  Kind kind_;
  OracleCdf oracle_;
  ScoreRange range_;
};

/// Per-run draw sequence. Owns its RNG; identical (environment, seed) pairs
/// produce identical sequences.
class EnvironmentStream {
 public:
  EnvironmentStream(const Environment& env, std::uint64_t seed) : env_(&env), rng_(seed) {
    if (const auto* log = std::get_if<ScoreLogEnv>(&env.kind());
        log && log->sampling == Sampling::kWithoutReplacement) {
      order_.resize(log->log->size());
      std::iota(order_.begin(), order_.end(), std::size_t{0});
      // Fisher-Yates with the portable index helper.
      for (std::size_t i = order_.size(); i > 1; --i) {
        std::swap(order_[i - 1], order_[uniform_index(rng_, i)]);
      }
    }
  }

  Draw next() {
    return std::visit(
        [this](const auto& k) -> Draw {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, SyntheticEnv>) {
            return Draw{sample(k.dist, rng_), nullptr, std::nullopt};
          } else if constexpr (std::is_same_v<T, ScoreLogEnv>) {
            std::size_t idx;
            if (k.sampling == Sampling::kWithoutReplacement) {
              if (cursor_ >= order_.size()) {
                throw RunError("score log exhausted after " + std::to_string(cursor_) +
                               " rounds (sampling without replacement)");
              }
              idx = order_[cursor_++];
            } else {
              idx = uniform_index(rng_, k.log->size());
            }
            const auto& row = (*k.log)[idx];
            return Draw{row.gt_score, &row, std::nullopt};
          } else {
            std::vector<double> bids(k.bidders);
            if (const auto* pool = std::get_if<std::shared_ptr<const std::vector<double>>>(&k.values)) {
              for (auto& b : bids) b = (**pool)[uniform_index(rng_, (*pool)->size())];
            } else {
              for (auto& b : bids) b = sample(std::get<Distribution>(k.values), rng_);
            }
            auto round = AuctionRound::from_bids(std::move(bids));
            const double top = round.b1;
            return Draw{top, nullptr, std::move(round)};
          }
        },
        env_->kind());
  }

  double next_score() { return next().score; }

 private:
  const Environment* env_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

inline EnvironmentStream Environment::stream(std::uint64_t seed) const { return EnvironmentStream(*this, seed); }

}  // namespace sbcp
