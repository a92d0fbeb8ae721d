#include "qlink/channel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace qlink {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kSpeedOfLightNmPerPs = 2.99792458e5;
constexpr double kGroupIndex = 1.468;
}  // namespace

void FiberSpec::validate() const {
  if (length_km < 0.0) throw std::invalid_argument("fiber length must be >= 0");
  if (attenuation_db_per_km < 0.0) {
    throw std::invalid_argument("fiber attenuation must be >= 0");
  }
  if (filter_bandwidth_nm <= 0.0) {
    throw std::invalid_argument("filter bandwidth must be positive");
  }
}

double fiber_transmittance(const FiberSpec& fiber) {
  return std::pow(10.0, -fiber.attenuation_db_per_km * fiber.length_km / 10.0);
}

double beta2_length_ps2(const FiberSpec& fiber, ItuChannel channel) {
  const double lambda = wavelength_nm(channel);
  const double beta2 = -fiber.dispersion_ps_per_nm_km * lambda * lambda /
                       (2.0 * kPi * kSpeedOfLightNmPerPs);
  return beta2 * fiber.length_km;
}

double fiber_delay_ps(const FiberSpec& fiber) {
  return fiber.length_km * 1e12 * kGroupIndex / (kSpeedOfLightNmPerPs * 1e7);
}

Wavepacket apply_dispersion(const Wavepacket& w, double beta2l_ps2) {
  if (beta2l_ps2 == 0.0) return w;
  const cxd a(1.0 / (4.0 * w.sigma_ps * w.sigma_ps), -w.chirp_rad_per_ps2);
  const cxd a_out = a / (cxd(1.0, 0.0) - cxd(0.0, 2.0 * beta2l_ps2) * a);
  Wavepacket out = w;
  out.sigma_ps = std::sqrt(1.0 / (4.0 * a_out.real()));
  out.chirp_rad_per_ps2 = -a_out.imag();
  return out;
}

void TemperatureTrace::validate() const {
  if (samples.size() < 2) {
    throw std::invalid_argument("temperature trace needs >= 2 samples");
  }
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (samples[i].epoch_s <= samples[i - 1].epoch_s) {
      throw std::invalid_argument("temperature trace epochs must increase");
    }
  }
}

double TemperatureTrace::span_start() const {
  if (samples.empty()) throw std::domain_error("empty temperature trace");
  return samples.front().epoch_s;
}

double TemperatureTrace::span_end() const {
  if (samples.empty()) throw std::domain_error("empty temperature trace");
  return samples.back().epoch_s;
}

double TemperatureTrace::temperature_at(double epoch_s) const {
  if (samples.empty()) throw std::domain_error("empty temperature trace");
  if (epoch_s < span_start() || epoch_s > span_end()) {
    throw std::out_of_range("epoch outside temperature trace span");
  }
  auto it = std::lower_bound(
      samples.begin(), samples.end(), epoch_s,
      [](const Sample& s, double t) { return s.epoch_s < t; });
  if (it == samples.begin()) return it->temp_c;
  if (it == samples.end()) return samples.back().temp_c;
  const Sample& hi = *it;
  const Sample& lo = *(it - 1);
  const double f = (epoch_s - lo.epoch_s) / (hi.epoch_s - lo.epoch_s);
  return lo.temp_c + f * (hi.temp_c - lo.temp_c);
}

TemperatureTrace make_temperature_trace(const TemperatureModelParams& params,
                                        RngStream& rng) {
  if (params.step_s <= 0.0 || params.duration_s <= 0.0) {
    throw std::invalid_argument("temperature model needs positive durations");
  }
  TemperatureTrace trace;
  const auto steps = static_cast<std::size_t>(
      std::ceil(params.duration_s / params.step_s));
  trace.samples.reserve(steps + 1);
  double walk = 0.0;
  const double omega = 2.0 * kPi / (params.sinusoid_period_h * 3600.0);
  for (std::size_t i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) * params.step_s;
    trace.samples.push_back(
        {t, params.base_temp_c +
                params.sinusoid_amplitude_c * std::sin(omega * t) + walk});
    walk += rng.gauss(0.0, params.walk_sigma_c_per_step);
  }
  trace.validate();
  return trace;
}

TemperatureTrace load_temperature_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open temperature CSV: " + path);
  TemperatureTrace trace;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "epoch_s,temp_c") {
        throw std::runtime_error(path + ": expected header 'epoch_s,temp_c'");
      }
      header_seen = true;
      continue;
    }
    std::istringstream ss(line);
    double epoch, temp;
    char comma;
    if (!(ss >> epoch >> comma >> temp) || comma != ',') {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": malformed row");
    }
    trace.samples.push_back({epoch, temp});
  }
  trace.validate();
  return trace;
}

double drift_offset_at(const TemperatureTrace& trace, const FiberSpec& fiber,
                       double epoch_s) {
  const double t0 = trace.temperature_at(trace.span_start());
  const double t = trace.temperature_at(epoch_s);
  return fiber.thermal_delay_coeff_ps_per_km_k * fiber.length_km * (t - t0);
}

PhotonRecord propagate(const PhotonRecord& photon, const FiberSpec& fiber,
                       double drift_offset_ps, RngStream& rng) {
  if (!photon.alive) throw std::invalid_argument("cannot propagate dead photon");
  fiber.validate();
  PhotonRecord out = photon;
  if (fiber.length_km == 0.0 && drift_offset_ps == 0.0) return out;
  out.alive = rng.bernoulli(fiber_transmittance(fiber));
  out.packet.t_center_ps += fiber_delay_ps(fiber) + drift_offset_ps;
  out.packet = apply_dispersion(
      out.packet, beta2_length_ps2(fiber, out.packet.channel));
  return out;
}

}  // namespace qlink
