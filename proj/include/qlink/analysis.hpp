#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qlink/protocol.hpp"
#include "qlink/qstate.hpp"

namespace qlink {

struct FringePoint {
  double phase;
  double counts;
};

/// Least-squares fit of A cos(phase - phase0) + C with Poisson weights; the
/// period is fixed at 2 pi (the encoder phase is commanded, not free).
struct FringeFit {
  double amplitude = 0.0;
  double offset = 0.0;
  double phase0 = 0.0;
  double visibility = 0.0;  ///< amplitude / offset, clamped to [0, 1]
  double amplitude_stderr = 0.0;
  double offset_stderr = 0.0;
  double phase_stderr = 0.0;
  double chi2 = 0.0;
  int dof = 0;
};

FringeFit fit_sinusoid(const std::vector<FringePoint>& points);

/// Rate with Poisson standard error.
struct EventRate {
  double per_hour = 0.0;
  double stderr_per_hour = 0.0;
};
EventRate event_rate(std::int64_t events, double duration_h);

/// Aggregated fringe-scan analysis: one fit per (BSM outcome, central port).
struct FringeAnalysis {
  std::map<std::string, FringeFit> fits;
  double average_visibility = 0.0;
  double psi_plus_fringe_max = 0.0;   ///< fitted A + C, averaged over ports
  double psi_minus_fringe_max = 0.0;
  std::int64_t psi_plus_events = 0;
  std::int64_t psi_minus_events = 0;
  /// raw per-point counts, keyed like `fits`
  std::map<std::string, std::vector<FringePoint>> series;
};
FringeAnalysis analyze_fringe_scan(const FringeScanResult& scan);

/// Tomography of the teleported state from the two analyzer settings.
struct TomographyOutcome {
  ProjectionCounts counts;
  TomographyResult reconstruction;
  TimeBinQubit aim;
  double fidelity_value = 0.0;
  std::int64_t events = 0;
};

std::map<BellState, TomographyOutcome> teleport_tomography(
    const std::vector<TeleportationEvent>& events_alpha0,
    const std::vector<TeleportationEvent>& events_alpha90,
    const TimeBinQubit& input);

struct TomographyRow {
  std::string input_name;
  BellState outcome;
  TomographyOutcome data;
};

struct TomographyAnalysis {
  std::vector<TomographyRow> rows;
  double average_fidelity_psi_plus = 0.0;
  double average_fidelity_psi_minus = 0.0;
  double min_fidelity = 1.0;
  std::int64_t total_events = 0;
};
TomographyAnalysis analyze_tomography_suite(const TomographySuiteResult& suite);

/// Hong-Ou-Mandel scan between the merged first-splitter arms. Sources are
/// unheralded; the user encoder is parked on the early bin. Coincidence
/// counts are Poisson-sampled from the exact per-pulse rates and fitted with
/// a Gaussian dip.
struct HomPoint {
  double delay_ps = 0.0;
  double rate_per_pulse = 0.0;
  std::int64_t coincidences = 0;
  double normalized = 0.0;
};

struct HomScanResult {
  std::vector<HomPoint> points;
  double plateau = 0.0;        ///< fitted plateau counts
  double visibility = 0.0;     ///< fitted dip depth
  double dip_width_ps = 0.0;   ///< fitted Gaussian 1/e half-width
  double min_normalized = 1.0;
  double user_arm_scale = 1.0;
  double relay_arm_scale = 1.0;
};

HomScanResult hom_scan(const NodeConfig& cfg,
                       const std::vector<double>& delays_ps,
                       double duration_per_point_s, std::uint64_t seed);

}  // namespace qlink
