#pragma once

#include <cmath>
#include <compare>
#include <cstdio>
#include <string>

#include "sbcp/errors.hpp"

namespace sbcp {

/// A prediction-set threshold. Scores at or above the threshold are inside
/// the set. The two infinities are explicit states rather than IEEE values so
/// they can never leak into sample storage.
class Threshold {
 public:
  enum class Kind { kNegInf, kFinite, kPosInf };

  static constexpr Threshold neg_inf() { return Threshold(Kind::kNegInf, 0.0); }
  static constexpr Threshold pos_inf() { return Threshold(Kind::kPosInf, 0.0); }
  static Threshold finite(double v) {
    if (!std::isfinite(v)) {
      throw DomainError("Threshold::finite: value is not finite");
    }
    return Threshold(Kind::kFinite, v);
  }

  constexpr Kind kind() const { return kind_; }
  constexpr bool is_finite() const { return kind_ == Kind::kFinite; }
  constexpr bool is_neg_inf() const { return kind_ == Kind::kNegInf; }
  constexpr bool is_pos_inf() const { return kind_ == Kind::kPosInf; }

  double value() const {
    if (!is_finite()) {
      throw QueryError("Threshold::value: threshold is infinite");
    }
    return value_;
  }

  // Semi-bandit observation rule: the score is revealed iff s >= tau.
  constexpr bool admits(double score) const {
    switch (kind_) {
      case Kind::kNegInf: return true;
      case Kind::kPosInf: return false;
      case Kind::kFinite: return score >= value_;
    }
    return false;
  }

  // Same as static_cast to double, with the sentinels mapped to IEEE infinities.
  // Only for arithmetic on the outside of the library (plots, CSV, comparisons).
  double as_double() const {
    switch (kind_) {
      case Kind::kNegInf: return -INFINITY;
      case Kind::kPosInf: return INFINITY;
      case Kind::kFinite: return value_;
    }
    return 0.0;
  }

  friend std::partial_ordering operator<=>(const Threshold& a, const Threshold& b) {
    if (a.kind_ != b.kind_) {
      return static_cast<int>(a.kind_) <=> static_cast<int>(b.kind_);
    }
    if (a.kind_ != Kind::kFinite) return std::partial_ordering::equivalent;
    return a.value_ <=> b.value_;
  }
  friend bool operator==(const Threshold& a, const Threshold& b) {
    return (a <=> b) == std::partial_ordering::equivalent;
  }

 private:
  constexpr Threshold(Kind k, double v) : kind_(k), value_(v) {}

  Kind kind_;
  double value_;
};

inline Threshold max(const Threshold& a, const Threshold& b) { return a < b ? b : a; }

// 12 significant digits; sentinels as the literal tokens -inf / inf.
inline std::string format_real(double v) {
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline std::string to_string(const Threshold& t) {
  switch (t.kind()) {
    case Threshold::Kind::kNegInf: return "-inf";
    case Threshold::Kind::kPosInf: return "inf";
    case Threshold::Kind::kFinite: return format_real(t.value());
  }
  return {};
}

}  // namespace sbcp
