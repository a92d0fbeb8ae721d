#pragma once

#include <string>
#include <vector>

#include "qlink/photonics.hpp"
#include "qlink/rng.hpp"

namespace qlink {

/// Optical fiber span parameters.
struct FiberSpec {
  double length_km = 0.0;
  double attenuation_db_per_km = 0.25;
  double dispersion_ps_per_nm_km = 4.0;
  double thermal_delay_coeff_ps_per_km_k = 32.5;
  double filter_bandwidth_nm = 0.18;  ///< bandwidth of the carried photons

  void validate() const;
};

/// Power transmittance 10^(-attenuation * length / 10).
double fiber_transmittance(const FiberSpec& fiber);

/// Group-velocity dispersion beta2 * L in ps^2 for the given channel,
/// beta2 = -D lambda^2 / (2 pi c).
double beta2_length_ps2(const FiberSpec& fiber, ItuChannel channel);

/// Group delay of the span (n_g = 1.468).
double fiber_delay_ps(const FiberSpec& fiber);

/// Closed-form chirped-Gaussian propagation through group-velocity
/// dispersion: both width and chirp are updated; the envelope stays
/// Gaussian and normalized.
Wavepacket apply_dispersion(const Wavepacket& w, double beta2l_ps2);

/// Ambient-temperature record, strictly increasing in time.
struct TemperatureTrace {
  struct Sample {
    double epoch_s;
    double temp_c;
  };
  std::vector<Sample> samples;

  void validate() const;
  /// Linear interpolation; throws outside the trace span.
  double temperature_at(double epoch_s) const;
  double span_start() const;
  double span_end() const;
};

/// Diurnal sinusoid plus a slow random walk, sampled on a regular grid.
struct TemperatureModelParams {
  double duration_s = 48 * 3600.0;
  double step_s = 5.0;
  double base_temp_c = 23.0;
  double sinusoid_amplitude_c = 1.0;
  double sinusoid_period_h = 24.0;
  double walk_sigma_c_per_step = 0.002;
};

TemperatureTrace make_temperature_trace(const TemperatureModelParams& params,
                                        RngStream& rng);

/// CSV ingestion, header `epoch_s,temp_c`.
TemperatureTrace load_temperature_csv(const std::string& path);

/// Thermal group-delay drift relative to the trace start:
/// coeff * length * (T(t) - T(0)).
double drift_offset_at(const TemperatureTrace& trace, const FiberSpec& fiber,
                       double epoch_s);

/// Propagates one photon through the span: Bernoulli survival, group delay
/// plus drift offset, dispersion applied to the wavepacket.
PhotonRecord propagate(const PhotonRecord& photon, const FiberSpec& fiber,
                       double drift_offset_ps, RngStream& rng);

}  // namespace qlink
