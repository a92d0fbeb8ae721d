#include "qlink/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace qlink {

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& v) {
  std::size_t pos = 0;
  const double x = std::stod(v, &pos);
  while (pos < v.size() && std::isspace(static_cast<unsigned char>(v[pos]))) {
    ++pos;
  }
  if (pos != v.size()) throw std::invalid_argument("trailing characters");
  return x;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw std::invalid_argument("expected true/false/on/off");
}

struct KeyDef {
  std::string key;
  std::function<void(Scenario&, const std::string&)> set;
  std::function<std::string(const Scenario&)> get;
};

template <typename Accessor>
KeyDef double_key(std::string key, Accessor acc, double lo, double hi) {
  return KeyDef{
      key,
      [acc, lo, hi, key](Scenario& s, const std::string& v) {
        const double x = parse_double(v);
        if (x < lo || x > hi) {
          throw std::invalid_argument(
              key + " must be in [" + format_double(lo) + ", " +
              format_double(hi) + "]");
        }
        *acc(s) = x;
      },
      [acc](const Scenario& s) {
        return format_double(*acc(const_cast<Scenario&>(s)));
      }};
}

template <typename Accessor>
KeyDef int_key(std::string key, Accessor acc, int lo, int hi) {
  return KeyDef{
      key,
      [acc, lo, hi, key](Scenario& s, const std::string& v) {
        const double x = parse_double(v);
        if (x != std::floor(x) || x < lo || x > hi) {
          throw std::invalid_argument(key + " must be an integer in range");
        }
        *acc(s) = static_cast<int>(x);
      },
      [acc](const Scenario& s) {
        return std::to_string(*acc(const_cast<Scenario&>(s)));
      }};
}

template <typename Accessor>
KeyDef bool_key(std::string key, Accessor acc) {
  return KeyDef{
      key,
      [acc](Scenario& s, const std::string& v) { *acc(s) = parse_bool(v); },
      [acc](const Scenario& s) {
        return *acc(const_cast<Scenario&>(s)) ? "true" : "false";
      }};
}

const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> table = [] {
    std::vector<KeyDef> t;
    t.push_back(KeyDef{
        "name",
        [](Scenario& s, const std::string& v) { s.name = v; },
        [](const Scenario& s) { return s.name; }});
    t.push_back(KeyDef{
        "experiment",
        [](Scenario& s, const std::string& v) {
          static const char* kinds[] = {"fringe_scan", "tomography_suite",
                                        "hom_scan", "drift_study",
                                        "rate_study"};
          if (std::find(std::begin(kinds), std::end(kinds), v) ==
              std::end(kinds)) {
            throw std::invalid_argument(
                "experiment must be one of fringe_scan, tomography_suite, "
                "hom_scan, drift_study, rate_study");
          }
          s.experiment = v;
        },
        [](const Scenario& s) { return s.experiment; }});
    t.push_back(double_key(
        "duration_h", [](Scenario& s) { return &s.duration_h; }, 1e-9, 1e5));
    t.push_back(KeyDef{
        "seed",
        [](Scenario& s, const std::string& v) {
          s.seed = std::stoull(v);
        },
        [](const Scenario& s) { return std::to_string(s.seed); }});
    t.push_back(bool_key("feedback", [](Scenario& s) { return &s.feedback_on; }));
    t.push_back(bool_key("output.write_tags",
                         [](Scenario& s) { return &s.write_tags; }));
    t.push_back(int_key("fringe.points",
                        [](Scenario& s) { return &s.fringe_points; }, 5, 1000));
    t.push_back(double_key("hom.delay_min_ps",
                           [](Scenario& s) { return &s.hom_delay_min_ps; },
                           -1e6, 1e6));
    t.push_back(double_key("hom.delay_max_ps",
                           [](Scenario& s) { return &s.hom_delay_max_ps; },
                           -1e6, 1e6));
    t.push_back(double_key("hom.delay_step_ps",
                           [](Scenario& s) { return &s.hom_delay_step_ps; },
                           1e-3, 1e6));
    t.push_back(double_key(
        "hom.duration_per_point_h",
        [](Scenario& s) { return &s.hom_duration_per_point_h; }, 1e-9, 1e4));
    t.push_back(bool_key("hom.balance_arms", [](Scenario& s) {
      return &s.node.hom_balance_arms;
    }));

    // user node
    t.push_back(double_key(
        "user.source.mean_pairs",
        [](Scenario& s) { return &s.node.user_source.mean_pairs; }, 0.0,
        0.499999));
    t.push_back(int_key("user.source.max_pairs",
                        [](Scenario& s) { return &s.node.user_source.max_pairs; },
                        2, 8));
    t.push_back(double_key(
        "user.source.sigma_ps",
        [](Scenario& s) { return &s.node.user_source.sigma_ps; }, 1e-3, 1e4));
    t.push_back(double_key(
        "user.source.chirp_per_ps2",
        [](Scenario& s) { return &s.node.user_source.chirp_rad_per_ps2; },
        -1.0, 1.0));
    t.push_back(double_key("user.vbs_ratio",
                           [](Scenario& s) { return &s.node.user_vbs_ratio; },
                           0.0, 1.0));
    t.push_back(double_key("user.phase_rad",
                           [](Scenario& s) { return &s.node.user_phase; },
                           -100.0, 100.0));
    t.push_back(double_key(
        "user.herald.transmittance",
        [](Scenario& s) { return &s.node.herald_path_transmittance; }, 0.0,
        1.0));
    t.push_back(double_key(
        "user.herald.pd_jitter_ps",
        [](Scenario& s) { return &s.node.herald_pd_jitter_ps; }, 0.0, 1e4));

    // relay node
    t.push_back(double_key(
        "relay.source.mean_pairs",
        [](Scenario& s) { return &s.node.relay_source.mean_pairs; }, 0.0,
        0.499999));
    t.push_back(int_key(
        "relay.source.max_pairs",
        [](Scenario& s) { return &s.node.relay_source.max_pairs; }, 2, 8));
    t.push_back(double_key(
        "relay.source.sigma_ps",
        [](Scenario& s) { return &s.node.relay_source.sigma_ps; }, 1e-3, 1e4));
    t.push_back(double_key(
        "relay.source.chirp_per_ps2",
        [](Scenario& s) { return &s.node.relay_source.chirp_rad_per_ps2; },
        -1.0, 1.0));
    t.push_back(double_key("relay.pair_phase_rad",
                           [](Scenario& s) { return &s.node.relay_pair_phase; },
                           -100.0, 100.0));
    t.push_back(double_key(
        "relay.idler_transmittance",
        [](Scenario& s) { return &s.node.relay_idler_transmittance; }, 0.0,
        1.0));
    t.push_back(double_key(
        "relay.local_transmittance",
        [](Scenario& s) { return &s.node.local_path_transmittance; }, 0.0,
        1.0));
    t.push_back(bool_key("relay.resolve_same_port_bins", [](Scenario& s) {
      return &s.node.resolve_same_port_bins;
    }));

    // central node
    t.push_back(double_key(
        "central.measurement_phase_rad",
        [](Scenario& s) { return &s.node.measurement_phase; }, -100.0, 100.0));
    t.push_back(double_key(
        "central.vbs_ratio",
        [](Scenario& s) { return &s.node.central_vbs_ratio; }, 0.0, 1.0));

    // links
    auto fiber_keys = [&t](const std::string& prefix,
                           FiberSpec NodeConfig::* fiber,
                           double NodeConfig::* extra) {
      t.push_back(double_key(
          prefix + ".length_km",
          [fiber](Scenario& s) { return &(s.node.*fiber).length_km; }, 0.0,
          1e4));
      t.push_back(double_key(
          prefix + ".attenuation_db_per_km",
          [fiber](Scenario& s) {
            return &(s.node.*fiber).attenuation_db_per_km;
          },
          0.0, 100.0));
      t.push_back(double_key(
          prefix + ".dispersion_ps_per_nm_km",
          [fiber](Scenario& s) {
            return &(s.node.*fiber).dispersion_ps_per_nm_km;
          },
          -100.0, 100.0));
      t.push_back(double_key(
          prefix + ".thermal_coeff_ps_per_km_k",
          [fiber](Scenario& s) {
            return &(s.node.*fiber).thermal_delay_coeff_ps_per_km_k;
          },
          0.0, 1e4));
      t.push_back(double_key(
          prefix + ".filter_bandwidth_nm",
          [fiber](Scenario& s) {
            return &(s.node.*fiber).filter_bandwidth_nm;
          },
          1e-4, 100.0));
      t.push_back(double_key(
          prefix + ".extra_loss_db",
          [extra](Scenario& s) { return &(s.node.*extra); }, 0.0, 200.0));
    };
    fiber_keys("link.user_relay", &NodeConfig::fiber_user_relay,
               &NodeConfig::user_path_extra_db);
    fiber_keys("link.relay_central", &NodeConfig::fiber_relay_central,
               &NodeConfig::central_path_extra_db);

    // detectors
    const std::pair<const char*, Channel> channels[] = {
        {"herald", Channel::Herald}, {"c1", Channel::C1},
        {"c2", Channel::C2},         {"c3", Channel::C3},
        {"c4", Channel::C4},         {"b1", Channel::B1},
        {"b2", Channel::B2},         {"local", Channel::Local}};
    for (const auto& [cname, channel] : channels) {
      const std::string prefix = std::string("detectors.") + cname;
      const Channel ch = channel;
      t.push_back(double_key(
          prefix + ".efficiency",
          [ch](Scenario& s) { return &s.node.detectors[ch].efficiency; }, 0.0,
          1.0));
      t.push_back(double_key(
          prefix + ".dark_rate_hz",
          [ch](Scenario& s) { return &s.node.detectors[ch].dark_rate_hz; },
          0.0, 1e9));
      t.push_back(double_key(
          prefix + ".jitter_ps",
          [ch](Scenario& s) { return &s.node.detectors[ch].jitter_sigma_ps; },
          0.0, 1e5));
      t.push_back(double_key(
          prefix + ".dead_time_ns",
          [ch](Scenario& s) { return &s.node.detectors[ch].dead_time_ns; },
          0.0, 1e6));
    }

    t.push_back(double_key(
        "noise.bsm_background_hz",
        [](Scenario& s) { return &s.node.bsm_background_hz; }, 0.0, 1e9));

    // detection
    t.push_back(double_key(
        "detection.coincidence_window_ps",
        [](Scenario& s) { return &s.node.coincidence_window_ps; }, 1.0, 1e6));
    t.push_back(double_key(
        "detection.fourfold_window_ps",
        [](Scenario& s) { return &s.node.fourfold_window_ps; }, 1.0, 9000.0));
    t.push_back(double_key("detection.gate_width_ps",
                           [](Scenario& s) { return &s.node.gate_width_ps; },
                           1.0, 400.0));
    t.push_back(double_key(
        "detection.bin_separation_ps",
        [](Scenario& s) { return &s.node.bin_separation_ps; }, 1.0, 5000.0));

    // feedback
    t.push_back(double_key("feedback.period_s",
                           [](Scenario& s) { return &s.node.feedback_period_s; },
                           1e-3, 1e5));
    t.push_back(double_key("feedback.gain",
                           [](Scenario& s) { return &s.node.feedback_gain; },
                           0.0, 2.0));
    t.push_back(int_key(
        "feedback.min_tags",
        [](Scenario& s) { return &s.node.feedback_min_tags; }, 1, 1000000));
    t.push_back(int_key(
        "feedback.pairs_per_window",
        [](Scenario& s) { return &s.node.feedback_pairs_per_window; }, 1,
        10000000));
    t.push_back(double_key(
        "feedback.setpoint_ps",
        [](Scenario& s) { return &s.node.feedback_setpoint_ps; }, -5000.0,
        5000.0));
    t.push_back(double_key(
        "feedback.odl_range_ps",
        [](Scenario& s) { return &s.node.delay_line.range_ps; }, 1.0, 1e6));
    t.push_back(double_key(
        "feedback.odl_resolution_ps",
        [](Scenario& s) { return &s.node.delay_line.resolution_ps; }, 1e-4,
        100.0));

    // temperature
    t.push_back(double_key(
        "temperature.base_c",
        [](Scenario& s) { return &s.node.temperature.base_temp_c; }, -50.0,
        80.0));
    t.push_back(double_key(
        "temperature.amplitude_c",
        [](Scenario& s) { return &s.node.temperature.sinusoid_amplitude_c; },
        0.0, 20.0));
    t.push_back(double_key(
        "temperature.period_h",
        [](Scenario& s) { return &s.node.temperature.sinusoid_period_h; },
        1e-3, 1e3));
    t.push_back(double_key(
        "temperature.walk_sigma_c_per_step",
        [](Scenario& s) {
          return &s.node.temperature.walk_sigma_c_per_step;
        },
        0.0, 1.0));
    t.push_back(KeyDef{
        "temperature.csv_path",
        [](Scenario& s, const std::string& v) { s.node.temperature_csv = v; },
        [](const Scenario& s) { return s.node.temperature_csv; }});

    t.push_back(bool_key("sim.postselect_single_pair", [](Scenario& s) {
      return &s.node.postselect_single_pair;
    }));
    t.push_back(KeyDef{
        "out_dir",
        [](Scenario& s, const std::string& v) { s.out_dir = v; },
        [](const Scenario& s) { return s.out_dir; }});
    return t;
  }();
  return table;
}

const KeyDef* find_key(const std::string& key) {
  for (const auto& def : key_table()) {
    if (def.key == key) return &def;
  }
  return nullptr;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

std::vector<double> Scenario::hom_delays() const {
  std::vector<double> delays;
  for (double d = hom_delay_min_ps; d <= hom_delay_max_ps + 1e-9;
       d += hom_delay_step_ps) {
    delays.push_back(d);
  }
  return delays;
}

void Scenario::validate() const {
  node.validate();
  if (duration_h <= 0.0) throw std::invalid_argument("duration must be > 0");
  if (fringe_points < 5) {
    throw std::invalid_argument("fringe scan needs >= 5 points");
  }
  if (hom_delay_min_ps >= hom_delay_max_ps) {
    throw std::invalid_argument("hom delay range is empty");
  }
}

Scenario default_scenario() {
  Scenario s;
  DetectorSpec snspd;  // 0.9 / 100 Hz / 30 ps / 40 ns defaults
  for (Channel c : {Channel::C1, Channel::C2, Channel::C3, Channel::C4,
                    Channel::B1, Channel::B2, Channel::Local}) {
    s.node.detectors[c] = snspd;
  }
  DetectorSpec herald = snspd;
  herald.efficiency = 0.8;
  s.node.detectors[Channel::Herald] = herald;
  return s;
}

std::string ConfigDiagnostic::format() const {
  std::string out = source;
  if (line > 0) out += ":" + std::to_string(line);
  if (!key.empty()) out += ": [" + key + "]";
  out += ": " + message;
  return out;
}

std::vector<ConfigDiagnostic> validate_scenario_text(
    const std::string& text, const std::string& source_name) {
  std::vector<ConfigDiagnostic> diagnostics;
  Scenario scenario = default_scenario();
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      diagnostics.push_back(
          {source_name, line_no, "", "expected 'key = value'"});
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const KeyDef* def = find_key(key);
    if (!def) {
      diagnostics.push_back({source_name, line_no, key, "unknown key"});
      continue;
    }
    try {
      def->set(scenario, value);
    } catch (const std::exception& e) {
      diagnostics.push_back({source_name, line_no, key, e.what()});
    }
  }
  try {
    scenario.validate();
  } catch (const std::exception& e) {
    diagnostics.push_back({source_name, 0, "", e.what()});
  }
  return diagnostics;
}

Scenario parse_scenario(const std::string& text,
                        const std::string& source_name) {
  const auto diagnostics = validate_scenario_text(text, source_name);
  if (!diagnostics.empty()) throw ConfigError(diagnostics.front());
  Scenario scenario = default_scenario();
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    find_key(key)->set(scenario, value);
  }
  return scenario;
}

void apply_override(Scenario& scenario, const std::string& key,
                    const std::string& value, const std::string& source) {
  const KeyDef* def = find_key(key);
  if (!def) {
    throw ConfigError({source, 0, key, "unknown key"});
  }
  try {
    def->set(scenario, value);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError({source, 0, key, e.what()});
  }
}

std::string resolved_config_text(const Scenario& scenario) {
  std::string out;
  for (const auto& def : key_table()) {
    const std::string value = def.get(scenario);
    if (def.key == "temperature.csv_path" && value.empty()) continue;
    out += def.key + " = " + value + "\n";
  }
  return out;
}

namespace {

// Calibration note: source brightness, lumped path losses and the analyzer
// background are fitted to the measured four-fold rate, fringe visibility,
// HOM visibility and fidelity table; fiber, filter, clock and detector
// parameters are taken from the hardware description.
const std::string kPaperPreset = R"cfg(
name = paper_12p3km
experiment = tomography_suite
duration_h = 12
seed = 424242
feedback = on

user.source.mean_pairs = 0.050        # fitted
user.source.max_pairs = 2
user.source.sigma_ps = 8.5            # 20 ps FWHM wavepacket
user.source.chirp_per_ps2 = 0.0037    # fitted residual source chirp
user.vbs_ratio = 0.5
user.phase_rad = 0
user.herald.transmittance = 0.105     # fitted
user.herald.pd_jitter_ps = 35

relay.source.mean_pairs = 0.050       # fitted, per time-bin mode
relay.source.max_pairs = 2
relay.source.sigma_ps = 8.5
relay.source.chirp_per_ps2 = 0.0
relay.pair_phase_rad = 0
relay.idler_transmittance = 0.035     # fitted
relay.local_transmittance = 0.08
relay.resolve_same_port_bins = false

central.measurement_phase_rad = 0
central.vbs_ratio = 0.5

link.user_relay.length_km = 6.15
link.user_relay.attenuation_db_per_km = 0.25
link.user_relay.dispersion_ps_per_nm_km = 4.0
link.user_relay.thermal_coeff_ps_per_km_k = 32.5
link.user_relay.filter_bandwidth_nm = 0.18
link.user_relay.extra_loss_db = 18.5  # fitted (chip coupling, ODL, DWDM)
link.relay_central.length_km = 6.15
link.relay_central.attenuation_db_per_km = 0.25
link.relay_central.dispersion_ps_per_nm_km = 4.0
link.relay_central.thermal_coeff_ps_per_km_k = 32.5
link.relay_central.filter_bandwidth_nm = 0.18
link.relay_central.extra_loss_db = 23.5  # fitted

detectors.herald.efficiency = 0.80
detectors.c1.efficiency = 0.90
detectors.c2.efficiency = 0.90
detectors.c3.efficiency = 0.90
detectors.c4.efficiency = 0.90
detectors.b1.efficiency = 0.90
detectors.b2.efficiency = 0.90
detectors.local.efficiency = 0.90

noise.bsm_background_hz = 2000        # fitted residual-pump background

feedback.period_s = 25
feedback.gain = 0.65
feedback.min_tags = 100
feedback.pairs_per_window = 1600
feedback.odl_range_ps = 1500
feedback.odl_resolution_ps = 0.1

temperature.base_c = 23
temperature.amplitude_c = 1.0
temperature.period_h = 24
temperature.walk_sigma_c_per_step = 0.002
)cfg";

const std::string kBackToBackPreset = R"cfg(
name = back_to_back
experiment = tomography_suite
duration_h = 12
seed = 424243
feedback = on

user.source.mean_pairs = 0.050
user.source.max_pairs = 2
user.source.sigma_ps = 8.5
user.source.chirp_per_ps2 = 0.0037
user.vbs_ratio = 0.5
user.phase_rad = 0
user.herald.transmittance = 0.105
user.herald.pd_jitter_ps = 35

relay.source.mean_pairs = 0.050
relay.source.max_pairs = 2
relay.source.sigma_ps = 8.5
relay.source.chirp_per_ps2 = 0.0
relay.pair_phase_rad = 0
relay.idler_transmittance = 0.035
relay.local_transmittance = 0.08
relay.resolve_same_port_bins = false

central.measurement_phase_rad = 0
central.vbs_ratio = 0.5

# fiber spools removed; chip and component losses stay
link.user_relay.length_km = 0
link.user_relay.attenuation_db_per_km = 0.25
link.user_relay.dispersion_ps_per_nm_km = 4.0
link.user_relay.thermal_coeff_ps_per_km_k = 32.5
link.user_relay.filter_bandwidth_nm = 0.18
link.user_relay.extra_loss_db = 18.5
link.relay_central.length_km = 0
link.relay_central.attenuation_db_per_km = 0.25
link.relay_central.dispersion_ps_per_nm_km = 4.0
link.relay_central.thermal_coeff_ps_per_km_k = 32.5
link.relay_central.filter_bandwidth_nm = 0.18
link.relay_central.extra_loss_db = 23.5

detectors.herald.efficiency = 0.80
detectors.c1.efficiency = 0.90
detectors.c2.efficiency = 0.90
detectors.c3.efficiency = 0.90
detectors.c4.efficiency = 0.90
detectors.b1.efficiency = 0.90
detectors.b2.efficiency = 0.90
detectors.local.efficiency = 0.90

noise.bsm_background_hz = 2000

feedback.period_s = 25
feedback.gain = 0.65
feedback.min_tags = 100
feedback.pairs_per_window = 1600
feedback.odl_range_ps = 1500
feedback.odl_resolution_ps = 0.1

temperature.base_c = 23
temperature.amplitude_c = 1.0
temperature.period_h = 24
temperature.walk_sigma_c_per_step = 0.002
)cfg";

const std::map<std::string, const std::string*>& preset_map() {
  static const std::map<std::string, const std::string*> presets = {
      {"paper_12p3km", &kPaperPreset},
      {"back_to_back", &kBackToBackPreset},
  };
  return presets;
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, text] : preset_map()) {
    (void)text;
    names.push_back(name);
  }
  return names;
}

const std::string& preset_text(const std::string& name) {
  auto it = preset_map().find(name);
  if (it == preset_map().end()) {
    throw std::invalid_argument("unknown preset: " + name);
  }
  return *it->second;
}

Scenario load_scenario(const std::string& path_or_preset) {
  std::ifstream in(path_or_preset);
  if (in) {
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_scenario(buffer.str(), path_or_preset);
  }
  auto it = preset_map().find(path_or_preset);
  if (it != preset_map().end()) {
    return parse_scenario(*it->second, path_or_preset);
  }
  throw std::runtime_error("no such scenario file or preset: " +
                           path_or_preset);
}

}  // namespace qlink
