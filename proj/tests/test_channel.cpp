#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <vector>

#include "qlink/channel.hpp"
#include "qlink/rng.hpp"

using namespace qlink;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Discrete Fourier propagation oracle for chirped Gaussian envelopes:
// psi_out = IFT[ FT[psi] * exp(i beta2 L omega^2 / 2) ], output width from
// the second moment of |psi_out|^2.
double fft_propagated_sigma(double sigma_in, double chirp_in,
                            double beta2l_ps2) {
  const int n = 2048;
  const double span = 60.0 * sigma_in;
  const double dt = span / n;
  std::vector<std::complex<double>> f(n);
  for (int i = 0; i < n; ++i) {
    const double t = -span / 2 + i * dt;
    f[static_cast<std::size_t>(i)] =
        std::exp(std::complex<double>(-t * t / (4 * sigma_in * sigma_in),
                                      chirp_in * t * t));
  }
  // direct DFT (n^2), adequate at this size
  std::vector<std::complex<double>> spec(n);
  for (int k = 0; k < n; ++k) {
    const double omega = 2.0 * kPi * (k < n / 2 ? k : k - n) / span;
    std::complex<double> acc(0, 0);
    for (int i = 0; i < n; ++i) {
      const double t = -span / 2 + i * dt;
      acc += f[static_cast<std::size_t>(i)] *
             std::exp(std::complex<double>(0, omega * t));
    }
    spec[static_cast<std::size_t>(k)] =
        acc * std::exp(std::complex<double>(0, beta2l_ps2 * omega * omega / 2));
  }
  std::vector<double> intensity(n);
  double norm = 0.0, mean = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = -span / 2 + i * dt;
    std::complex<double> acc(0, 0);
    for (int k = 0; k < n; ++k) {
      const double omega = 2.0 * kPi * (k < n / 2 ? k : k - n) / span;
      acc += spec[static_cast<std::size_t>(k)] *
             std::exp(std::complex<double>(0, -omega * t));
    }
    intensity[static_cast<std::size_t>(i)] = std::norm(acc);
    norm += intensity[static_cast<std::size_t>(i)];
    mean += t * intensity[static_cast<std::size_t>(i)];
  }
  mean /= norm;
  double var = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = -span / 2 + i * dt;
    var += (t - mean) * (t - mean) * intensity[static_cast<std::size_t>(i)];
  }
  return std::sqrt(var / norm);
}

}  // namespace

TEST_CASE("zero-length fiber is a no-op") {
  RngStream rng(1, "prop");
  PhotonRecord p;
  p.packet = {12.0, 8.5, 0.001, ItuChannel::C40};
  FiberSpec fiber;
  fiber.length_km = 0.0;
  const PhotonRecord out = propagate(p, fiber, 0.0, rng);
  CHECK(out.alive);
  CHECK(out.packet.t_center_ps == p.packet.t_center_ps);
  CHECK(out.packet.sigma_ps == p.packet.sigma_ps);
  CHECK(out.packet.chirp_rad_per_ps2 == p.packet.chirp_rad_per_ps2);
}

TEST_CASE("attenuation survival statistics") {
  FiberSpec fiber;
  fiber.length_km = 6.15;
  fiber.attenuation_db_per_km = 0.25;
  const double expected = std::pow(10.0, -0.25 * 6.15 / 10.0);
  CHECK(fiber_transmittance(fiber) == doctest::Approx(0.702).epsilon(0.002));

  RngStream rng(2, "loss");
  PhotonRecord p;
  int survived = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    if (propagate(p, fiber, 0.0, rng).alive) ++survived;
  }
  CHECK(static_cast<double>(survived) / n ==
        doctest::Approx(expected).epsilon(0.01));
}

TEST_CASE("dispersion transform matches Fourier propagation") {
  FiberSpec fiber;
  fiber.length_km = 6.15;
  fiber.dispersion_ps_per_nm_km = 4.0;
  const double b2l = beta2_length_ps2(fiber, ItuChannel::C40);
  CHECK(b2l == doctest::Approx(-31.2).epsilon(0.01));

  // transform-limited input
  Wavepacket w{0.0, 8.5, 0.0, ItuChannel::C40};
  const Wavepacket out = apply_dispersion(w, b2l);
  const double sigma_oracle = fft_propagated_sigma(8.5, 0.0, b2l);
  CHECK(out.sigma_ps == doctest::Approx(sigma_oracle).epsilon(0.01));
  CHECK(out.chirp_rad_per_ps2 != 0.0);

  // chirped input: the linear cross term dominates the broadening
  Wavepacket wc{0.0, 8.5, 0.005, ItuChannel::C40};
  const Wavepacket out_c = apply_dispersion(wc, b2l);
  const double sigma_oracle_c = fft_propagated_sigma(8.5, 0.005, b2l);
  CHECK(out_c.sigma_ps == doctest::Approx(sigma_oracle_c).epsilon(0.01));

  // unitarity: the packet stays normalized, |overlap with itself| = 1
  const cxd self = mode_overlap(out_c, out_c);
  CHECK(std::abs(self) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("propagation composes delay, drift and dispersion") {
  RngStream rng(3, "prop2");
  FiberSpec fiber;
  fiber.length_km = 6.15;
  fiber.attenuation_db_per_km = 0.0;
  PhotonRecord p;
  p.packet = {0.0, 8.5, 0.0, ItuChannel::C40};
  const PhotonRecord out = propagate(p, fiber, 37.0, rng);
  CHECK(out.alive);
  CHECK(out.packet.t_center_ps ==
        doctest::Approx(fiber_delay_ps(fiber) + 37.0));
  CHECK(out.packet.sigma_ps > 8.5);
}

TEST_CASE("drift offset from temperature") {
  FiberSpec fiber;
  fiber.length_km = 6.15;
  fiber.thermal_delay_coeff_ps_per_km_k = 32.5;

  TemperatureTrace flat;
  flat.samples = {{0.0, 23.0}, {100.0, 23.0}, {200.0, 23.0}};
  for (double t : {0.0, 50.0, 199.0}) {
    CHECK(drift_offset_at(flat, fiber, t) == doctest::Approx(0.0));
  }

  TemperatureTrace step;
  step.samples = {{0.0, 23.0}, {100.0, 25.0}};
  // 32.5 ps/(km K) x 6.15 km x 2 K = 399.75 ps, the rounded-coefficient
  // version of the 400 ps / 2 C figure
  CHECK(drift_offset_at(step, fiber, 100.0) ==
        doctest::Approx(400.0).epsilon(0.002));

  // linearity in the temperature deviation
  TemperatureTrace sin_trace;
  for (int i = 0; i <= 100; ++i) {
    const double t = i * 10.0;
    sin_trace.samples.push_back({t, 23.0 + 0.7 * std::sin(0.01 * t)});
  }
  for (int i = 0; i <= 100; ++i) {
    const double t = i * 10.0;
    const double expect = 32.5 * 6.15 * 0.7 * std::sin(0.01 * t);
    CHECK(drift_offset_at(sin_trace, fiber, t) ==
          doctest::Approx(expect).epsilon(1e-9));
  }

  CHECK_THROWS_AS(drift_offset_at(step, fiber, 101.0), std::out_of_range);
  CHECK_THROWS_AS(drift_offset_at(step, fiber, -1.0), std::out_of_range);
}

TEST_CASE("temperature model and CSV round trip") {
  RngStream rng(4, "temp");
  TemperatureModelParams params;
  params.duration_s = 3600.0;
  params.step_s = 10.0;
  const TemperatureTrace trace = make_temperature_trace(params, rng);
  CHECK(trace.samples.size() == 361);
  trace.validate();

  const char* path = "test_trace.csv";
  {
    std::ofstream out(path);
    out << "epoch_s,temp_c\n";
    for (const auto& s : trace.samples) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.6f,%.6f\n", s.epoch_s, s.temp_c);
      out << buf;
    }
  }
  const TemperatureTrace loaded = load_temperature_csv(path);
  REQUIRE(loaded.samples.size() == trace.samples.size());
  CHECK(loaded.samples[100].temp_c ==
        doctest::Approx(trace.samples[100].temp_c).epsilon(1e-5));
  std::remove(path);

  TemperatureTrace bad;
  bad.samples = {{10.0, 23.0}, {10.0, 24.0}};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
