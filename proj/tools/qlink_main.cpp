#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "qlink/analysis.hpp"
#include "qlink/config.hpp"
#include "qlink/detection.hpp"
#include "qlink/protocol.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace qlink;

namespace {

json json_complex(const cxd& z) { return json{z.real(), z.imag()}; }

json json_density(const Eigen::Matrix2cd& m) {
  json rows = json::array();
  for (int r = 0; r < 2; ++r) {
    json row = json::array();
    for (int c = 0; c < 2; ++c) row.push_back(json_complex(m(r, c)));
    rows.push_back(row);
  }
  return rows;
}

json json_bookkeeping(const Bookkeeping& b) {
  return json{{"pulses", b.pulses},
              {"heralds", b.heralds},
              {"threefolds", b.threefolds},
              {"fourfold_candidates", b.fourfold_candidates},
              {"fourfolds", b.fourfolds},
              {"ambiguous_bsm", b.ambiguous_bsm},
              {"multi_central", b.multi_central},
              {"bin_rejects", b.bin_rejects}};
}

json json_fit(const FringeFit& f) {
  return json{{"amplitude", f.amplitude},
              {"offset", f.offset},
              {"phase0", f.phase0},
              {"visibility", f.visibility},
              {"amplitude_stderr", f.amplitude_stderr},
              {"offset_stderr", f.offset_stderr},
              {"phase_stderr", f.phase_stderr},
              {"chi2", f.chi2},
              {"dof", f.dof}};
}

json json_feedback(const FeedbackRunLog& log) {
  json samples = json::array();
  for (std::size_t i = 0; i < log.samples.size(); ++i) {
    const auto& s = log.samples[i];
    samples.push_back(json{{"epoch_s", s.epoch_s},
                           {"measured_delta_ps", s.measured_delta_ps},
                           {"command_ps", s.command_ps},
                           {"saturated", s.saturated},
                           {"held", s.held},
                           {"true_residual_ps", log.true_residual_ps[i]},
                           {"drift_ps", log.drift_ps[i]},
                           {"temperature_c", log.temperature_c[i]}});
  }
  return json{{"residual_std_ps", log.residual_std_ps()},
              {"measured_std_ps", log.measured_std_ps()},
              {"samples", samples}};
}

Bookkeeping total_counts(const std::vector<SettingResult>& settings) {
  Bookkeeping total;
  for (const auto& s : settings) {
    total.pulses += s.counts.pulses;
    total.heralds += s.counts.heralds;
    total.threefolds += s.counts.threefolds;
    total.fourfold_candidates += s.counts.fourfold_candidates;
    total.fourfolds += s.counts.fourfolds;
    total.ambiguous_bsm += s.counts.ambiguous_bsm;
    total.multi_central += s.counts.multi_central;
    total.bin_rejects += s.counts.bin_rejects;
  }
  return total;
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
}

int run_command(const std::string& scenario_arg,
                const std::vector<std::string>& overrides,
                const std::string& experiment_flag, double duration_flag,
                std::int64_t seed_flag, const std::string& feedback_flag,
                const std::string& out_flag, bool tags_flag) {
  Scenario scenario = load_scenario(scenario_arg);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw ConfigError({"--set", 0, kv, "expected key=value"});
    }
    apply_override(scenario, kv.substr(0, eq), kv.substr(eq + 1), "--set");
  }
  if (!experiment_flag.empty()) {
    apply_override(scenario, "experiment", experiment_flag, "--experiment");
  }
  if (duration_flag > 0.0) scenario.duration_h = duration_flag;
  if (seed_flag >= 0) scenario.seed = static_cast<std::uint64_t>(seed_flag);
  if (!feedback_flag.empty()) {
    apply_override(scenario, "feedback", feedback_flag, "--feedback");
  }
  if (!out_flag.empty()) scenario.out_dir = out_flag;
  if (tags_flag) scenario.write_tags = true;
  scenario.validate();

  fs::create_directories(scenario.out_dir);
  const fs::path out_dir(scenario.out_dir);

  json report;
  report["tool"] = "qlink";
  report["scenario"] = scenario.name;
  report["experiment"] = scenario.experiment;
  report["seed"] = scenario.seed;
  report["resolved_config"] = resolved_config_text(scenario);

  std::string summary_csv;
  std::string console;
  TagStream tags;
  FeedbackRunLog feedback_log;
  const double duration_s = scenario.duration_h * 3600.0;

  if (scenario.experiment == "fringe_scan") {
    auto scan = run_fringe_scan(scenario.node, scenario.fringe_points,
                                duration_s, scenario.feedback_on,
                                scenario.seed);
    auto fringe = analyze_fringe_scan(scan);
    feedback_log = scan.feedback;
    tags = std::move(scan.tags);

    json fits;
    for (const auto& [key, fit] : fringe.fits) fits[key] = json_fit(fit);
    json series;
    for (const auto& [key, pts] : fringe.series) {
      json arr = json::array();
      for (const auto& p : pts) arr.push_back(json{p.phase, p.counts});
      series[key] = arr;
    }
    report["results"] = json{
        {"average_visibility", fringe.average_visibility},
        {"psi_plus_fringe_max", fringe.psi_plus_fringe_max},
        {"psi_minus_fringe_max", fringe.psi_minus_fringe_max},
        {"psi_plus_events", fringe.psi_plus_events},
        {"psi_minus_events", fringe.psi_minus_events},
        {"fits", fits},
        {"series", series}};
    report["bookkeeping"] = json_bookkeeping(total_counts(scan.settings));

    summary_csv = "phase_rad,psi_plus_b1,psi_plus_b2,psi_minus_b1,psi_minus_b2\n";
    for (std::size_t i = 0; i < scan.phases.size(); ++i) {
      summary_csv += std::to_string(scan.phases[i]);
      for (const char* key : {"psi_plus_b1", "psi_plus_b2", "psi_minus_b1",
                              "psi_minus_b2"}) {
        summary_csv += "," +
                       std::to_string(static_cast<std::int64_t>(
                           fringe.series.at(key)[i].counts));
      }
      summary_csv += "\n";
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "fringe scan: average visibility %.3f, fringe maxima "
                  "psi+ %.1f / psi- %.1f\n",
                  fringe.average_visibility, fringe.psi_plus_fringe_max,
                  fringe.psi_minus_fringe_max);
    console = buf;
  } else if (scenario.experiment == "tomography_suite") {
    auto suite = run_tomography_suite(scenario.node, duration_s,
                                      scenario.feedback_on, scenario.seed);
    auto tomo = analyze_tomography_suite(suite);
    feedback_log = suite.feedback;
    tags = std::move(suite.tags);

    json rows = json::array();
    summary_csv = "input,bsm,fidelity,events,s1,s2,s3\n";
    for (const auto& row : tomo.rows) {
      const auto& s = row.data.reconstruction.stokes_raw;
      rows.push_back(json{
          {"input", row.input_name},
          {"bsm", to_string(row.outcome)},
          {"fidelity", row.data.fidelity_value},
          {"events", row.data.events},
          {"stokes_raw", json{s.s1, s.s2, s.s3}},
          {"projected", row.data.reconstruction.projected},
          {"rho", json_density(row.data.reconstruction.rho.matrix())},
          {"counts",
           json{{"n0", row.data.counts.n0},
                {"n1", row.data.counts.n1},
                {"n_plus", row.data.counts.n_plus},
                {"n_minus", row.data.counts.n_minus},
                {"n_plus_i", row.data.counts.n_plus_i},
                {"n_minus_i", row.data.counts.n_minus_i}}}});
      char line[160];
      std::snprintf(line, sizeof(line), "%s,%s,%.4f,%lld,%.4f,%.4f,%.4f\n",
                    row.input_name.c_str(), to_string(row.outcome).c_str(),
                    row.data.fidelity_value,
                    static_cast<long long>(row.data.events), s.s1, s.s2,
                    s.s3);
      summary_csv += line;
    }
    report["results"] =
        json{{"average_fidelity_psi_plus", tomo.average_fidelity_psi_plus},
             {"average_fidelity_psi_minus", tomo.average_fidelity_psi_minus},
             {"min_fidelity", tomo.min_fidelity},
             {"total_events", tomo.total_events},
             {"rows", rows}};
    std::vector<SettingResult> all;
    for (const auto& pair : suite.settings) {
      all.push_back(pair[0]);
      all.push_back(pair[1]);
    }
    report["bookkeeping"] = json_bookkeeping(total_counts(all));
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "tomography: avg fidelity psi+ %.3f / psi- %.3f, min %.3f, "
                  "%lld events\n",
                  tomo.average_fidelity_psi_plus,
                  tomo.average_fidelity_psi_minus, tomo.min_fidelity,
                  static_cast<long long>(tomo.total_events));
    console = buf;
  } else if (scenario.experiment == "hom_scan") {
    auto hom = hom_scan(scenario.node, scenario.hom_delays(),
                        scenario.hom_duration_per_point_h * 3600.0,
                        scenario.seed);
    json points = json::array();
    summary_csv = "delay_ps,coincidences,normalized\n";
    for (const auto& p : hom.points) {
      points.push_back(json{{"delay_ps", p.delay_ps},
                            {"coincidences", p.coincidences},
                            {"normalized", p.normalized},
                            {"rate_per_pulse", p.rate_per_pulse}});
      summary_csv += std::to_string(p.delay_ps) + "," +
                     std::to_string(p.coincidences) + "," +
                     std::to_string(p.normalized) + "\n";
    }
    report["results"] = json{{"visibility", hom.visibility},
                             {"plateau", hom.plateau},
                             {"dip_width_ps", hom.dip_width_ps},
                             {"min_normalized", hom.min_normalized},
                             {"user_arm_scale", hom.user_arm_scale},
                             {"relay_arm_scale", hom.relay_arm_scale},
                             {"points", points}};
    char buf[120];
    std::snprintf(buf, sizeof(buf), "hom scan: visibility %.3f (dip width %.1f ps)\n",
                  hom.visibility, hom.dip_width_ps);
    console = buf;
  } else if (scenario.experiment == "drift_study") {
    auto drift = run_drift_study(scenario.node, duration_s,
                                 scenario.feedback_on, scenario.seed);
    feedback_log = drift.log;
    report["results"] =
        json{{"feedback_on", drift.feedback_on},
             {"temperature_swing_c", drift.temperature_swing_c},
             {"drift_swing_ps", drift.drift_swing_ps},
             {"drift_per_degree_ps", drift.temperature_swing_c > 0
                                         ? drift.drift_swing_ps /
                                               drift.temperature_swing_c
                                         : 0.0},
             {"residual_std_ps", drift.residual_std_ps},
             {"measured_std_ps", drift.measured_std_ps}};
    summary_csv = "temperature_swing_c,drift_swing_ps,residual_std_ps,measured_std_ps\n" +
                  std::to_string(drift.temperature_swing_c) + "," +
                  std::to_string(drift.drift_swing_ps) + "," +
                  std::to_string(drift.residual_std_ps) + "," +
                  std::to_string(drift.measured_std_ps) + "\n";
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "drift study (%s): swing %.0f ps over %.2f C, residual std "
                  "%.2f ps, measured std %.2f ps\n",
                  drift.feedback_on ? "closed loop" : "open loop",
                  drift.drift_swing_ps, drift.temperature_swing_c,
                  drift.residual_std_ps, drift.measured_std_ps);
    console = buf;
  } else if (scenario.experiment == "rate_study") {
    auto rate = run_rate_study(scenario.node, duration_s,
                               scenario.feedback_on, scenario.seed);
    report["results"] =
        json{{"events_per_hour", rate.events_per_hour},
             {"events_per_hour_stderr", rate.events_per_hour_stderr},
             {"fourfolds", rate.setting.counts.fourfolds}};
    report["bookkeeping"] = json_bookkeeping(rate.setting.counts);
    tags = std::move(rate.tags);
    summary_csv = "events_per_hour,stderr\n" +
                  std::to_string(rate.events_per_hour) + "," +
                  std::to_string(rate.events_per_hour_stderr) + "\n";
    char buf[120];
    std::snprintf(buf, sizeof(buf), "rate study: %.1f +- %.1f events/hour\n",
                  rate.events_per_hour, rate.events_per_hour_stderr);
    console = buf;
  } else {
    throw std::runtime_error("unhandled experiment: " + scenario.experiment);
  }

  if (!feedback_log.samples.empty()) {
    report["feedback"] = json_feedback(feedback_log);
    std::ostringstream fb;
    write_feedback_csv(fb, feedback_log.samples);
    write_file(out_dir / "feedback.csv", fb.str());
  }

  write_file(out_dir / "report.json", report.dump(2) + "\n");
  write_file(out_dir / "summary.csv", summary_csv);
  if (scenario.write_tags && !tags.empty()) {
    std::ofstream bin(out_dir / "tags.bin", std::ios::binary);
    write_tags_binary(bin, tags);
  }

  std::cout << "scenario " << scenario.name << " (" << scenario.experiment
            << "), seed " << scenario.seed << "\n"
            << console << "wrote " << (out_dir / "report.json").string()
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo simulator of a three-node time-bin "
               "quantum-teleportation fiber link"};
  app.require_subcommand(1);

  std::string scenario_arg;
  std::vector<std::string> overrides;
  std::string experiment_flag, feedback_flag, out_flag;
  double duration_flag = 0.0;
  std::int64_t seed_flag = -1;
  bool tags_flag = false;

  auto* run = app.add_subcommand("run", "run a scenario");
  run->add_option("scenario", scenario_arg,
                  "scenario file or preset (paper_12p3km, back_to_back)")
      ->required();
  run->add_option("--set", overrides, "override a config key (key=value)");
  run->add_option("--experiment", experiment_flag,
                  "fringe_scan | tomography_suite | hom_scan | drift_study | "
                  "rate_study");
  run->add_option("--duration-h", duration_flag, "duration in hours");
  run->add_option("--seed", seed_flag, "64-bit random seed");
  run->add_option("--feedback", feedback_flag, "on | off");
  run->add_option("--out", out_flag, "output directory");
  run->add_flag("--tags", tags_flag, "write tags.bin");

  std::string validate_arg;
  auto* validate = app.add_subcommand("validate", "check a scenario file");
  validate->add_option("scenario", validate_arg, "scenario file or preset")
      ->required();

  auto* presets = app.add_subcommand("presets", "list shipped presets");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      return run_command(scenario_arg, overrides, experiment_flag,
                         duration_flag, seed_flag, feedback_flag, out_flag,
                         tags_flag);
    }
    if (validate->parsed()) {
      std::string text;
      std::ifstream in(validate_arg);
      if (in) {
        std::stringstream buffer;
        buffer << in.rdbuf();
        text = buffer.str();
      } else {
        text = preset_text(validate_arg);
      }
      const auto diagnostics = validate_scenario_text(text, validate_arg);
      for (const auto& d : diagnostics) std::cerr << d.format() << "\n";
      if (diagnostics.empty()) {
        std::cout << validate_arg << ": ok\n";
        return 0;
      }
      return 1;
    }
    if (presets->parsed()) {
      for (const auto& name : preset_names()) std::cout << name << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
