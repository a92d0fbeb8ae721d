#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qlink/protocol.hpp"

namespace qlink {

/// A named, fully resolved simulation scenario.
struct Scenario {
  std::string name = "unnamed";
  NodeConfig node;
  std::string experiment = "tomography_suite";
  double duration_h = 1.0;  ///< per phase point / per analyzer setting / total
  int fringe_points = 12;
  double hom_delay_min_ps = -60.0;
  double hom_delay_max_ps = 60.0;
  double hom_delay_step_ps = 5.0;
  double hom_duration_per_point_h = 2.0;
  std::uint64_t seed = 1;
  bool feedback_on = true;
  bool write_tags = false;
  std::string out_dir = ".";

  std::vector<double> hom_delays() const;
  void validate() const;
};

Scenario default_scenario();

struct ConfigDiagnostic {
  std::string source;
  int line = 0;
  std::string key;
  std::string message;

  std::string format() const;
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const ConfigDiagnostic& d)
      : std::runtime_error(d.format()), diagnostic(d) {}
  ConfigDiagnostic diagnostic;
};

/// Parses `key = value` text (comments with '#') into a scenario. Unknown
/// keys and invalid values throw ConfigError with the offending line.
Scenario parse_scenario(const std::string& text,
                        const std::string& source_name);

/// Applies one `key=value` override.
void apply_override(Scenario& scenario, const std::string& key,
                    const std::string& value, const std::string& source);

/// Collects every diagnostic instead of stopping at the first.
std::vector<ConfigDiagnostic> validate_scenario_text(
    const std::string& text, const std::string& source_name);

/// Loads from a file path, or from a shipped preset name.
Scenario load_scenario(const std::string& path_or_preset);

std::vector<std::string> preset_names();
const std::string& preset_text(const std::string& name);

/// Canonical `key = value` dump of every setting, suitable for re-parsing.
std::string resolved_config_text(const Scenario& scenario);

}  // namespace qlink
