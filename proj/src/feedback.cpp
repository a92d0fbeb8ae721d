#include "qlink/feedback.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace qlink {

namespace {
constexpr double kFramePs = 10000.0;  // 100 MHz clock

double fold_to_frame(double diff_ps) {
  double r = std::fmod(diff_ps, kFramePs);
  if (r > kFramePs / 2.0) r -= kFramePs;
  if (r <= -kFramePs / 2.0) r += kFramePs;
  return r;
}
}  // namespace

void DelayLineSpec::validate() const {
  if (range_ps <= 0.0) throw std::invalid_argument("delay line range must be > 0");
  if (resolution_ps <= 0.0) {
    throw std::invalid_argument("delay line resolution must be > 0");
  }
  if (actuation_latency_s < 0.0) {
    throw std::invalid_argument("actuation latency must be >= 0");
  }
}

std::optional<double> estimate_delta(const TagStream& herald_tags,
                                     const TagStream& local_tags,
                                     int min_tags) {
  if (herald_tags.empty() || local_tags.empty()) return std::nullopt;
  std::vector<double> diffs;
  diffs.reserve(herald_tags.size());
  std::size_t j = 0;
  for (const TimeTag& h : herald_tags) {
    // Advance to the local tag nearest in time.
    while (j + 1 < local_tags.size() &&
           std::llabs(local_tags[j + 1].time_ps - h.time_ps) <=
               std::llabs(local_tags[j].time_ps - h.time_ps)) {
      ++j;
    }
    diffs.push_back(fold_to_frame(
        static_cast<double>(h.time_ps - local_tags[j].time_ps)));
  }
  if (static_cast<int>(diffs.size()) < min_tags) return std::nullopt;
  auto mid = diffs.begin() + static_cast<std::ptrdiff_t>(diffs.size() / 2);
  std::nth_element(diffs.begin(), mid, diffs.end());
  if (diffs.size() % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(diffs.begin(), mid);
  return 0.5 * (lo + hi);
}

FeedbackSample control_step(FeedbackState& state, double epoch_s,
                            double measured_delta_ps,
                            const DelayLineSpec& line) {
  line.validate();
  if (!state.history.empty() &&
      epoch_s <= state.history.back().epoch_s) {
    throw std::invalid_argument("feedback epochs must strictly increase");
  }
  double command = state.command_ps -
                   state.gain * (measured_delta_ps - state.setpoint_ps);
  command = std::round(command / line.resolution_ps) * line.resolution_ps;
  bool saturated = false;
  if (command < 0.0) {
    command = 0.0;
    saturated = true;
  } else if (command > line.range_ps) {
    command = line.range_ps;
    saturated = true;
  }
  state.command_ps = command;
  FeedbackSample sample{epoch_s, measured_delta_ps, command, saturated, false};
  state.history.push_back(sample);
  return sample;
}

void write_feedback_csv(std::ostream& out,
                        const std::vector<FeedbackSample>& history) {
  out << "epoch_s,delta_ps,command_ps,saturated\n";
  for (const auto& s : history) {
    out << s.epoch_s << ',' << s.measured_delta_ps << ',' << s.command_ps
        << ',' << (s.saturated ? 1 : 0) << '\n';
  }
}

}  // namespace qlink
