#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "qlink/feedback.hpp"
#include "qlink/rng.hpp"

using namespace qlink;

namespace {

TagStream make_tags(Channel ch, int n, double offset_ps, double jitter_ps,
                    RngStream& rng) {
  TagStream tags;
  for (int i = 0; i < n; ++i) {
    const double base = 1e7 * (i + 1);  // one tag per 10 us
    tags.push_back({ch, static_cast<std::int64_t>(
                            std::llround(base + offset_ps +
                                         rng.gauss(0.0, jitter_ps)))});
  }
  return tags;
}

}  // namespace

TEST_CASE("estimate_delta on identical streams") {
  RngStream rng(1, "fb");
  const TagStream herald = make_tags(Channel::Herald, 500, 0.0, 0.0, rng);
  TagStream local;
  for (const auto& t : herald) local.push_back({Channel::Local, t.time_ps});
  const auto delta = estimate_delta(herald, local, 100);
  REQUIRE(delta.has_value());
  CHECK(*delta == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("estimate_delta recovers a constant offset under jitter") {
  RngStream rng(2, "fb2");
  const int n = 1000;
  const TagStream herald = make_tags(Channel::Herald, n, 37.0, 40.0, rng);
  const TagStream local = make_tags(Channel::Local, n, 0.0, 30.0, rng);
  const auto delta = estimate_delta(herald, local, 100);
  REQUIRE(delta.has_value());
  // median error ~ 1.25 * 50 / sqrt(1000) ~ 2 ps
  CHECK(*delta == doctest::Approx(37.0).epsilon(0.2));

  // folding into the 10 ns frame: a one-frame slip changes nothing
  TagStream shifted = herald;
  for (auto& t : shifted) t.time_ps += 10000;
  const auto delta2 = estimate_delta(shifted, local, 100);
  REQUIRE(delta2.has_value());
  CHECK(*delta2 == doctest::Approx(*delta).epsilon(0.05));
}

TEST_CASE("estimate_delta holds without data") {
  CHECK(!estimate_delta({}, {}, 100).has_value());
  RngStream rng(3, "fb3");
  const TagStream few = make_tags(Channel::Herald, 10, 0.0, 0.0, rng);
  const TagStream local = make_tags(Channel::Local, 10, 0.0, 0.0, rng);
  CHECK(!estimate_delta(few, local, 100).has_value());
  CHECK(estimate_delta(few, local, 10).has_value());
}

TEST_CASE("control_step integral action") {
  DelayLineSpec line;
  FeedbackState state;
  state.command_ps = 750.0;
  state.gain = 1.0;

  // at setpoint: no change
  auto s = control_step(state, 25.0, 0.0, line);
  CHECK(s.command_ps == doctest::Approx(750.0));
  CHECK(!s.saturated);

  // deadbeat correction of a 100 ps step disturbance
  s = control_step(state, 50.0, 100.0, line);
  CHECK(s.command_ps == doctest::Approx(650.0));
  // next period the disturbance is compensated: measurement reads ~0
  s = control_step(state, 75.0, 0.0, line);
  CHECK(s.command_ps == doctest::Approx(650.0));

  // command quantization to the line resolution
  s = control_step(state, 100.0, 0.03, line);
  const double steps = s.command_ps / line.resolution_ps;
  CHECK(std::abs(steps - std::round(steps)) < 1e-6);

  // saturation at the range limits
  s = control_step(state, 125.0, 5000.0, line);
  CHECK(s.command_ps == 0.0);
  CHECK(s.saturated);
  s = control_step(state, 150.0, -5000.0, line);
  CHECK(s.command_ps == line.range_ps);
  CHECK(s.saturated);

  // epochs must increase
  CHECK_THROWS_AS(control_step(state, 150.0, 0.0, line),
                  std::invalid_argument);
}

TEST_CASE("closed-loop difference equation is deterministic") {
  DelayLineSpec line;
  auto run = [&] {
    FeedbackState state;
    state.command_ps = 750.0;
    state.gain = 0.7;
    std::vector<double> commands;
    double drift = 0.0;
    for (int k = 1; k <= 40; ++k) {
      drift += 3.0;  // steady ramp
      const double measured = drift + (state.command_ps - 750.0);
      control_step(state, 25.0 * k, measured, line);
      commands.push_back(state.command_ps);
    }
    return commands;
  };
  CHECK(run() == run());

  // the loop tracks the ramp: residual settles near drift-rate/gain
  FeedbackState state;
  state.command_ps = 750.0;
  state.gain = 1.0;
  double drift = 0.0;
  double residual = 0.0;
  for (int k = 1; k <= 100; ++k) {
    drift += 3.0;
    residual = drift + (state.command_ps - 750.0);
    control_step(state, 25.0 * k, residual, line);
  }
  CHECK(std::abs(residual) <= 3.0 + 1e-9);
}

TEST_CASE("feedback CSV header and rows") {
  std::vector<FeedbackSample> history = {
      {25.0, 1.5, 749.0, false, false},
      {50.0, -0.5, 749.5, true, false},
  };
  std::ostringstream out;
  write_feedback_csv(out, history);
  const std::string text = out.str();
  CHECK(text.find("epoch_s,delta_ps,command_ps,saturated") == 0);
  CHECK(text.find("50,-0.5,749.5,1") != std::string::npos);
}
