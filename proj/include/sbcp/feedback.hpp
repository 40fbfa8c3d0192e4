#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "sbcp/errors.hpp"
#include "sbcp/threshold.hpp"

namespace sbcp {

/// What the learner sees at the end of a round. On a hit the true score is
/// revealed and recorded; on a miss only the indicator is seen and the round's
/// threshold is recorded in its place.
struct FeedbackEvent {
  bool observed = false;
  std::optional<double> score;
  Threshold recorded = Threshold::neg_inf();

  static FeedbackEvent hit(double s) {
    if (!std::isfinite(s)) throw DomainError("FeedbackEvent::hit: score is not finite");
    return FeedbackEvent{true, s, Threshold::finite(s)};
  }
  static FeedbackEvent miss(const Threshold& tau) { return FeedbackEvent{false, std::nullopt, tau}; }
};

inline FeedbackEvent apply_feedback(const Threshold& tau, double s) {
  return tau.admits(s) ? FeedbackEvent::hit(s) : FeedbackEvent::miss(tau);
}

/// Throws ContractViolation unless `fb` could have been produced by
/// apply_feedback(proposed, s) for some score s.
inline void check_feedback(const FeedbackEvent& fb, const Threshold& proposed) {
  if (fb.observed) {
    if (!fb.score || !(fb.recorded == Threshold::finite(*fb.score))) {
      throw ContractViolation("observed feedback must record the revealed score");
    }
    if (!proposed.admits(*fb.score)) {
      throw ContractViolation("observed score " + format_real(*fb.score) +
                              " lies below the proposed threshold " + to_string(proposed));
    }
  } else {
    if (fb.score) throw ContractViolation("missed feedback must not carry a score");
    if (!(fb.recorded == proposed)) {
      throw ContractViolation("missed feedback recorded " + to_string(fb.recorded) +
                              " but the proposed threshold was " + to_string(proposed));
    }
  }
}

}  // namespace sbcp
