#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qlink/channel.hpp"
#include "qlink/detection.hpp"
#include "qlink/feedback.hpp"
#include "qlink/photonics.hpp"
#include "qlink/pulse_kernel.hpp"
#include "qlink/rng.hpp"

namespace qlink {

constexpr double kClockRateHz = 1e8;

/// Full static description of the three-node link.
struct NodeConfig {
  // user node
  SourceSpec user_source;
  double user_vbs_ratio = 0.5;
  double user_phase = 0.0;
  double herald_path_transmittance = 1.0;  ///< chip escape + filter, before the SNSPD
  double herald_pd_jitter_ps = 35.0;       ///< classical PD recording T_Herald

  // relay node
  SourceSpec relay_source;
  double relay_pair_phase = 0.0;
  double relay_idler_transmittance = 1.0;  ///< source to analyzer input
  double local_path_transmittance = 0.1;   ///< source to the C7 reference detector
  bool resolve_same_port_bins = false;

  // central node
  double measurement_phase = 0.0;
  double central_vbs_ratio = 0.5;

  // links; extra_db lumps chip coupling, DWDM and ODL insertion losses
  FiberSpec fiber_user_relay;
  FiberSpec fiber_relay_central;
  double user_path_extra_db = 0.0;
  double central_path_extra_db = 0.0;

  // per-channel detectors (missing channels fall back to a default spec)
  std::map<Channel, DetectorSpec> detectors;

  // residual-pump noise folded into the analyzer detectors' dark rate
  double bsm_background_hz = 0.0;

  // detection configuration
  double coincidence_window_ps = 200.0;
  double fourfold_window_ps = 1200.0;
  double gate_width_ps = 200.0;
  double bin_separation_ps = 400.0;

  // feedback
  double feedback_period_s = 25.0;
  double feedback_gain = 1.0;
  int feedback_min_tags = 100;
  int feedback_pairs_per_window = 1200;
  double feedback_setpoint_ps = 0.0;
  DelayLineSpec delay_line;

  // ambient temperature
  TemperatureModelParams temperature;
  std::string temperature_csv;  ///< replay file; empty = use the model

  // simulation switches
  bool postselect_single_pair = false;
  bool hom_balance_arms = true;

  void validate() const;

  DetectorSpec detector(Channel c) const;
  double user_idler_transmittance_total() const;
  double central_transmittance_total() const;
  double herald_click_prob() const;

  /// Wavepackets as they arrive at the Bell analyzer.
  Wavepacket user_packet_at_bsm(double arrival_offset_ps) const;
  Wavepacket relay_packet_at_bsm() const;
  double bsm_gamma_abs(double arrival_offset_ps) const;

  KernelSettings kernel_settings(const TimeBinQubit& user_state,
                                 double measurement_phase_override,
                                 double bsm_arrival_offset_ps,
                                 double user_arm_scale = 1.0,
                                 double relay_arm_scale = 1.0) const;
};

/// One accepted four-fold teleportation event.
struct TeleportationEvent {
  std::int64_t pulse_index = 0;
  BellState bsm = BellState::PsiMinus;
  int central_port = 0;  ///< 0 = B1, 1 = B2
  int central_slot = 0;  ///< 0..2 = t0..t2
  bool herald_present = true;
};

struct Bookkeeping {
  std::int64_t pulses = 0;
  std::int64_t heralds = 0;
  std::int64_t threefolds = 0;
  std::int64_t fourfold_candidates = 0;
  std::int64_t fourfolds = 0;
  std::int64_t ambiguous_bsm = 0;
  std::int64_t multi_central = 0;
  std::int64_t bin_rejects = 0;
};

struct SettingResult {
  std::string label;
  double duration_s = 0.0;
  double user_phase = 0.0;
  double measurement_phase = 0.0;
  TimeBinQubit input_state;
  std::vector<TeleportationEvent> events;
  Bookkeeping counts;
};

struct FeedbackRunLog {
  std::vector<FeedbackSample> samples;
  std::vector<double> true_residual_ps;
  std::vector<double> drift_ps;
  std::vector<double> temperature_c;

  double residual_std_ps() const;
  double measured_std_ps() const;
};

struct RunArchives {
  std::vector<SettingResult> settings;
  FeedbackRunLog feedback;
  TagStream tags;  ///< synthesized candidate bundles incl. sync tags
  std::uint64_t seed = 0;
};

/// Simulates the link across one or more measurement settings with shared
/// drift and feedback state. Event statistics come from the exact per-pulse
/// kernel; accepted events are re-derived from synthesized time tags through
/// the coincidence pipeline.
class LinkSession {
 public:
  LinkSession(NodeConfig cfg, std::uint64_t seed, double planned_duration_s,
              bool feedback_on);
  ~LinkSession();
  LinkSession(const LinkSession&) = delete;
  LinkSession& operator=(const LinkSession&) = delete;

  struct Setting {
    std::string label;
    TimeBinQubit input_state;
    double user_phase = 0.0;
    double measurement_phase = 0.0;
    double duration_s = 0.0;
    double bsm_delay_offset_ps = 0.0;  ///< deliberate scan delay (HOM)
    double user_arm_scale = 1.0;
    double relay_arm_scale = 1.0;
    bool sample_events = true;
  };

  SettingResult run_setting(const Setting& setting);

  const FeedbackRunLog& feedback_log() const { return feedback_log_; }
  TagStream take_tag_archive();
  double epoch_s() const { return epoch_s_; }
  const NodeConfig& config() const { return cfg_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  NodeConfig cfg_;
  FeedbackRunLog feedback_log_;
  double epoch_s_ = 0.0;
};

/// One clock cycle sampled end to end. Returns the synthesized tags of the
/// cycle and the accepted event, when the pattern classifies.
struct PulseResult {
  std::optional<TeleportationEvent> event;
  TagStream tags;
  PulseOutcomeKey key;
};

PulseResult run_pulse(const NodeConfig& cfg, std::int64_t pulse_index,
                      double bsm_arrival_offset_ps, RngStream& rng);

/// Single-setting experiment run (the config's own encoder and analyzer
/// settings), deterministic in the seed.
RunArchives run_experiment(const NodeConfig& cfg, double duration_s,
                           bool feedback_on, std::uint64_t seed);

/// Per-cycle herald/local emission flags, the raw material of the
/// synchronization streams.
struct CycleRecord {
  std::int64_t pulse_index = 0;
  bool herald = false;
  bool local = false;
};

struct HeraldSyncStreams {
  TagStream herald;
  TagStream local;
  TagStream sync;
};

/// Builds T_Herald / T_Local / sync tag streams for the given cycles.
/// Herald tags ride the user->relay fiber and carry `delta_ps`; local tags
/// come from the relay's C7 reference; sync tags mark each cycle's frame at
/// the central node.
HeraldSyncStreams herald_and_sync_tags(const std::vector<CycleRecord>& cycles,
                                       const NodeConfig& cfg, double delta_ps,
                                       RngStream& rng);

/// Experiment drivers.
struct FringeScanResult {
  std::vector<SettingResult> settings;  ///< one per phase point
  std::vector<double> phases;
  FeedbackRunLog feedback;
  TagStream tags;
  std::uint64_t seed = 0;
};
FringeScanResult run_fringe_scan(const NodeConfig& cfg, int phase_points,
                                 double duration_per_point_s, bool feedback_on,
                                 std::uint64_t seed);

struct TomographySuiteResult {
  /// settings[input][alpha], alpha 0 -> phase 0, alpha 1 -> phase pi/2
  std::vector<std::array<SettingResult, 2>> settings;
  FeedbackRunLog feedback;
  TagStream tags;
  std::uint64_t seed = 0;
};
TomographySuiteResult run_tomography_suite(const NodeConfig& cfg,
                                           double duration_per_alpha_s,
                                           bool feedback_on,
                                           std::uint64_t seed);

struct DriftStudyResult {
  FeedbackRunLog log;
  bool feedback_on = false;
  double duration_s = 0.0;
  double temperature_swing_c = 0.0;
  double drift_swing_ps = 0.0;
  double residual_std_ps = 0.0;
  double measured_std_ps = 0.0;
  std::uint64_t seed = 0;
};
DriftStudyResult run_drift_study(const NodeConfig& cfg, double duration_s,
                                 bool feedback_on, std::uint64_t seed);

struct RateStudyResult {
  SettingResult setting;
  double events_per_hour = 0.0;
  double events_per_hour_stderr = 0.0;
  TagStream tags;
  std::uint64_t seed = 0;
};
RateStudyResult run_rate_study(const NodeConfig& cfg, double duration_s,
                               bool feedback_on, std::uint64_t seed);

}  // namespace qlink
