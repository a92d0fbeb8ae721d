#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "qlink/analysis.hpp"
#include "qlink/rng.hpp"

using namespace qlink;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<FringePoint> cosine_points(double amplitude, double offset,
                                       double phase0, int n) {
  std::vector<FringePoint> pts;
  for (int i = 0; i < n; ++i) {
    const double phi = 2.0 * kPi * i / n;
    pts.push_back({phi, offset + amplitude * std::cos(phi - phase0)});
  }
  return pts;
}

// Synthetic teleportation events whose central-click statistics follow a
// chosen teleported-state density matrix.
void append_events(std::vector<TeleportationEvent>& out, BellState outcome,
                   const DensityMatrix& rho, double alpha, std::int64_t n) {
  const auto p = projection_probabilities(rho);
  const double p_b1t1 = (alpha == 0.0 ? p.p_plus : p.p_plus_i) / 2.0;
  const double p_b2t1 = (alpha == 0.0 ? p.p_minus : p.p_minus_i) / 2.0;
  const double probs[2][3] = {{p.p0 / 4, p_b1t1, p.p1 / 4},
                              {p.p0 / 4, p_b2t1, p.p1 / 4}};
  for (int port = 0; port < 2; ++port) {
    for (int slot = 0; slot < 3; ++slot) {
      const auto count =
          static_cast<std::int64_t>(std::llround(probs[port][slot] * n));
      for (std::int64_t i = 0; i < count; ++i) {
        out.push_back({0, outcome, port, slot, true});
      }
    }
  }
}

}  // namespace

TEST_CASE("fit_sinusoid recovers exact parameters") {
  const auto pts = cosine_points(40.0, 90.0, 0.7, 12);
  const FringeFit fit = fit_sinusoid(pts);
  CHECK(fit.amplitude == doctest::Approx(40.0).epsilon(1e-9));
  CHECK(fit.offset == doctest::Approx(90.0).epsilon(1e-9));
  CHECK(fit.phase0 == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(fit.visibility == doctest::Approx(40.0 / 90.0).epsilon(1e-9));
}

TEST_CASE("fit_sinusoid under Poisson noise recovers the paper visibility") {
  RngStream rng(1, "fit");
  const double v = 0.633;
  int hits = 0;
  const int trials = 20;
  for (int t = 0; t < trials; ++t) {
    std::vector<FringePoint> pts;
    for (int i = 0; i < 12; ++i) {
      const double phi = 2.0 * kPi * i / 12;
      const double mean = 90.0 * (1.0 + v * std::cos(phi)) / 2.0;
      pts.push_back({phi, static_cast<double>(rng.poisson(mean))});
    }
    const FringeFit fit = fit_sinusoid(pts);
    if (std::abs(fit.visibility - v) < 0.05) ++hits;
    CHECK(fit.amplitude_stderr > 0.0);
  }
  CHECK(hits >= trials / 2);
}

TEST_CASE("fit_sinusoid on flat data reports no visibility") {
  RngStream rng(2, "flat");
  std::vector<FringePoint> pts;
  for (int i = 0; i < 12; ++i) {
    pts.push_back({2.0 * kPi * i / 12,
                   static_cast<double>(rng.poisson(200.0))});
  }
  const FringeFit fit = fit_sinusoid(pts);
  CHECK(fit.visibility < 0.05);
  CHECK(fit.amplitude < 3.0 * fit.amplitude_stderr + 5.0);
}

TEST_CASE("fit_sinusoid shift equivariance and rescale invariance") {
  const auto pts = cosine_points(40.0, 90.0, 0.4, 16);
  const FringeFit base = fit_sinusoid(pts);

  const double delta = 0.9;
  auto shifted = pts;
  for (auto& p : shifted) p.phase += delta;
  const FringeFit sh = fit_sinusoid(shifted);
  CHECK(sh.amplitude == doctest::Approx(base.amplitude).epsilon(1e-9));
  CHECK(sh.offset == doctest::Approx(base.offset).epsilon(1e-9));
  CHECK(std::remainder(sh.phase0 - base.phase0 - delta, 2 * kPi) ==
        doctest::Approx(0.0).epsilon(1e-9));

  auto scaled = pts;
  for (auto& p : scaled) p.counts *= 7.0;
  const FringeFit sc = fit_sinusoid(scaled);
  CHECK(sc.visibility == doctest::Approx(base.visibility).epsilon(1e-9));
}

TEST_CASE("fit_sinusoid preconditions") {
  CHECK_THROWS_AS(fit_sinusoid({{0.0, 1.0}, {1.0, 2.0}}),
                  std::invalid_argument);
  // five points but covering only a third of the period
  std::vector<FringePoint> narrow;
  for (int i = 0; i < 5; ++i) narrow.push_back({i * 0.4, 10.0});
  CHECK_THROWS_AS(fit_sinusoid(narrow), std::invalid_argument);
}

TEST_CASE("event_rate") {
  CHECK(event_rate(0, 4.0).per_hour == 0.0);
  const EventRate r = event_rate(136, 4.0);
  CHECK(r.per_hour == doctest::Approx(34.0));
  CHECK(r.stderr_per_hour == doctest::Approx(std::sqrt(136.0) / 4.0));
  CHECK_THROWS_AS(event_rate(1, 0.0), std::invalid_argument);
}

TEST_CASE("teleport_tomography reconstructs synthetic states") {
  // teleported state = expected aim exactly: fidelity 1, trace distance ~ 0
  for (int input = 0; input < 6; ++input) {
    const TimeBinQubit in_state = cardinal_state(input);
    std::vector<TeleportationEvent> a0, a90;
    for (BellState outcome : {BellState::PsiPlus, BellState::PsiMinus}) {
      const DensityMatrix aim =
          DensityMatrix::pure(expected_teleported_state(in_state, outcome));
      append_events(a0, outcome, aim, 0.0, 1000000);
      append_events(a90, outcome, aim, kPi / 2, 1000000);
    }
    const auto tomo = teleport_tomography(a0, a90, in_state);
    for (const auto& [outcome, data] : tomo) {
      (void)outcome;
      CHECK(data.fidelity_value == doctest::Approx(1.0).epsilon(1e-4));
    }
  }

  // a known mixed state round-trips through the count pipeline
  Eigen::Matrix2cd m;
  m << 0.7, cxd(0.18, -0.1), cxd(0.18, 0.1), 0.3;
  const DensityMatrix mixed{m};
  std::vector<TeleportationEvent> a0, a90;
  append_events(a0, BellState::PsiPlus, mixed, 0.0, 1000000);
  append_events(a90, BellState::PsiPlus, mixed, kPi / 2, 1000000);
  append_events(a0, BellState::PsiMinus, mixed, 0.0, 1000);
  append_events(a90, BellState::PsiMinus, mixed, kPi / 2, 1000);
  const auto tomo = teleport_tomography(a0, a90, cardinal_state(0));
  CHECK(trace_distance(tomo.at(BellState::PsiPlus).reconstruction.rho,
                       mixed) < 1e-3);

  // missing one analyzer setting is an error naming the absent bases
  CHECK_THROWS_WITH_AS(
      (void)teleport_tomography(a0, {}, cardinal_state(0)),
      doctest::Contains("pi/2"), std::runtime_error);
}

TEST_CASE("hom_scan shows the thermal one-third dip for balanced arms") {
  NodeConfig cfg;
  cfg.user_source.mean_pairs = 0.02;
  cfg.relay_source.mean_pairs = 0.02;
  cfg.fiber_user_relay.length_km = 0.0;
  cfg.fiber_relay_central.length_km = 0.0;
  DetectorSpec det{0.9, 0.0, 30.0, 40.0};
  for (Channel c : {Channel::Herald, Channel::C1, Channel::C2, Channel::C3,
                    Channel::C4, Channel::B1, Channel::B2, Channel::Local}) {
    cfg.detectors[c] = det;
  }
  cfg.temperature.duration_s = 600.0;

  std::vector<double> delays;
  for (double d = -60.0; d <= 60.0; d += 7.5) delays.push_back(d);
  const HomScanResult hom = hom_scan(cfg, delays, 200.0, 11);
  CHECK(std::abs(hom.visibility - 1.0 / 3.0) < 0.02);
  CHECK(hom.min_normalized < 0.75);
  CHECK(hom.dip_width_ps == doctest::Approx(2.0 * 8.5).epsilon(0.25));
  // plateau region is flat
  CHECK(hom.points.front().normalized == doctest::Approx(1.0).epsilon(0.05));
}
