#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qlink/config.hpp"

using namespace qlink;

TEST_CASE("shipped presets parse and validate cleanly") {
  for (const auto& name : preset_names()) {
    const auto diagnostics = validate_scenario_text(preset_text(name), name);
    for (const auto& d : diagnostics) {
      INFO(d.format());
      CHECK(false);
    }
    const Scenario s = load_scenario(name);
    CHECK(s.name == name);
    s.validate();
  }
  CHECK(preset_names().size() == 2);
}

TEST_CASE("paper preset carries the hardware numbers") {
  const Scenario s = load_scenario("paper_12p3km");
  CHECK(s.node.fiber_user_relay.length_km == 6.15);
  CHECK(s.node.fiber_relay_central.length_km == 6.15);
  CHECK(s.node.fiber_user_relay.dispersion_ps_per_nm_km == 4.0);
  CHECK(s.node.fiber_user_relay.thermal_delay_coeff_ps_per_km_k == 32.5);
  CHECK(s.node.detector(Channel::Herald).efficiency == 0.8);
  CHECK(s.node.detector(Channel::C1).efficiency == 0.9);
  CHECK(s.node.feedback_period_s == 25.0);
  CHECK(s.node.delay_line.range_ps == 1500.0);

  const Scenario b = load_scenario("back_to_back");
  CHECK(b.node.fiber_user_relay.length_km == 0.0);
  CHECK(b.node.user_source.mean_pairs == s.node.user_source.mean_pairs);
}

TEST_CASE("range violations produce keyed line diagnostics") {
  const std::string text =
      "name = bad\n"
      "user.source.mean_pairs = 0.9\n"
      "link.user_relay.length_km = -2\n";
  const auto diagnostics = validate_scenario_text(text, "bad.cfg");
  REQUIRE(diagnostics.size() == 2);
  CHECK(diagnostics[0].key == "user.source.mean_pairs");
  CHECK(diagnostics[0].line == 2);
  CHECK(diagnostics[1].key == "link.user_relay.length_km");
  CHECK(diagnostics[1].line == 3);
}

TEST_CASE("unknown keys and malformed lines are reported") {
  const auto diagnostics = validate_scenario_text(
      "frobnicate = 1\nnot a key value pair\n", "x.cfg");
  REQUIRE(diagnostics.size() == 2);
  CHECK(diagnostics[0].key == "frobnicate");
  CHECK(diagnostics[0].message == "unknown key");
  CHECK(diagnostics[1].line == 2);

  CHECK_THROWS_AS(parse_scenario("frobnicate = 1\n", "x.cfg"), ConfigError);
}

TEST_CASE("overrides apply through the same validation") {
  Scenario s = load_scenario("paper_12p3km");
  apply_override(s, "user.source.mean_pairs", "0.03", "--set");
  CHECK(s.node.user_source.mean_pairs == 0.03);
  CHECK_THROWS_AS(apply_override(s, "user.source.mean_pairs", "2.0", "--set"),
                  ConfigError);
  CHECK_THROWS_AS(apply_override(s, "nope", "1", "--set"), ConfigError);
  apply_override(s, "experiment", "drift_study", "--set");
  CHECK(s.experiment == "drift_study");
  CHECK_THROWS_AS(apply_override(s, "experiment", "bogus", "--set"),
                  ConfigError);
}

TEST_CASE("resolved config text round trips") {
  Scenario s = load_scenario("paper_12p3km");
  apply_override(s, "seed", "777", "--set");
  apply_override(s, "relay.source.mean_pairs", "0.0123", "--set");
  const std::string dump = resolved_config_text(s);
  const Scenario back = parse_scenario(dump, "dump");
  CHECK(back.seed == 777);
  CHECK(back.node.relay_source.mean_pairs == 0.0123);
  CHECK(back.node.fiber_user_relay.length_km ==
        s.node.fiber_user_relay.length_km);
  CHECK(resolved_config_text(back) == dump);
}

TEST_CASE("comments, whitespace and hom delay grids") {
  const Scenario s = parse_scenario(
      "name = t\n"
      "# a comment line\n"
      "  hom.delay_min_ps = -10  # trailing comment\n"
      "hom.delay_max_ps = 10\n"
      "hom.delay_step_ps = 5\n",
      "inline");
  CHECK(s.name == "t");
  const auto delays = s.hom_delays();
  REQUIRE(delays.size() == 5);
  CHECK(delays.front() == -10.0);
  CHECK(delays.back() == 10.0);
}

TEST_CASE("loading precedence: file path, then preset, then error") {
  CHECK_THROWS(load_scenario("definitely_not_a_scenario"));
  const Scenario s = load_scenario("back_to_back");
  CHECK(s.name == "back_to_back");
}
