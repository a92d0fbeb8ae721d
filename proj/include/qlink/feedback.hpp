#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qlink/detection.hpp"

namespace qlink {

/// Motorized optical delay line in the user -> relay path.
struct DelayLineSpec {
  double range_ps = 1500.0;
  double resolution_ps = 0.1;
  double actuation_latency_s = 0.0;

  void validate() const;
};

struct FeedbackSample {
  double epoch_s = 0.0;
  double measured_delta_ps = 0.0;
  double command_ps = 0.0;
  bool saturated = false;
  bool held = false;  ///< estimator had no data; command unchanged
};

struct FeedbackState {
  double setpoint_ps = 0.0;
  double command_ps = 0.0;
  double gain = 1.0;
  int min_tags = 100;
  std::vector<FeedbackSample> history;
};

/// Robust arrival-time difference between the heralding channel and the
/// local reference: median of nearest-neighbour tag differences folded into
/// the 10 ns pulse frame. Returns nothing when fewer than `min_tags` pairs
/// are available (controller holds).
std::optional<double> estimate_delta(const TagStream& herald_tags,
                                     const TagStream& local_tags,
                                     int min_tags = 100);

/// One control period: integral correction
///   command -= gain * (measured - setpoint),
/// clamped to [0, range] and quantized to the line resolution. Appends to
/// the state's history and returns the applied sample.
FeedbackSample control_step(FeedbackState& state, double epoch_s,
                            double measured_delta_ps,
                            const DelayLineSpec& line);

/// CSV dump, header `epoch_s,delta_ps,command_ps,saturated`.
void write_feedback_csv(std::ostream& out,
                        const std::vector<FeedbackSample>& history);

}  // namespace qlink
