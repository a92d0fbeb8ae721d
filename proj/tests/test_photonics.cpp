#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <map>
#include <set>
#include <vector>

#include "qlink/photonics.hpp"
#include "qlink/rng.hpp"

using namespace qlink;

namespace {

constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Independent two-photon analyzer oracle: first-quantized symmetric
// wavefunction over output basis (port 1..4) x (bin) x (layer), evolved by
// the single-photon transfer amplitudes of the cascaded splitters.

struct OracleOutcome {
  std::map<BsmSignature, double> probs;
};

int oracle_index(int port, int bin, int layer) {
  return (port - 1) * 4 + bin * 2 + layer;
}

OracleOutcome bsm_oracle(const TwoPhotonBinState& state, double gamma,
                         bool resolve_same_port_bins) {
  const double kappa = std::sqrt(std::max(0.0, 1.0 - gamma * gamma));
  // Single-photon output amplitudes.
  auto user_amp = [&](int bin, int o) -> cxd {
    for (int port = 1; port <= 4; ++port) {
      if (o == oracle_index(port, bin, 0)) return 0.5 * gamma;
      if (o == oracle_index(port, bin, 1)) return 0.5 * kappa;
    }
    return 0.0;
  };
  auto relay_amp = [&](int bin, int o) -> cxd {
    for (int port = 1; port <= 4; ++port) {
      if (o == oracle_index(port, bin, 0)) {
        return port <= 2 ? 0.5 : -0.5;
      }
    }
    return 0.0;
  };

  // Ordered two-photon amplitude psi(o1, o2), symmetric by construction.
  const int dim = 16;
  std::vector<cxd> psi(static_cast<std::size_t>(dim * dim), cxd(0, 0));
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) {
      const cxd a = state.amp[x][y];
      if (std::abs(a) == 0.0) continue;
      for (int o1 = 0; o1 < dim; ++o1) {
        for (int o2 = 0; o2 < dim; ++o2) {
          psi[static_cast<std::size_t>(o1 * dim + o2)] +=
              a / std::sqrt(2.0) *
              (user_amp(x, o1) * relay_amp(y, o2) +
               relay_amp(y, o1) * user_amp(x, o2));
        }
      }
    }
  }

  OracleOutcome out;
  for (int o1 = 0; o1 < dim; ++o1) {
    for (int o2 = o1; o2 < dim; ++o2) {
      const cxd a = psi[static_cast<std::size_t>(o1 * dim + o2)];
      const double p = (o1 == o2 ? 1.0 : 2.0) * std::norm(a);
      if (p < 1e-30) continue;
      std::set<std::pair<int, int>> clicks;
      for (int o : {o1, o2}) clicks.insert({o / 4 + 1, (o % 4) / 2});
      BsmSignature sig;
      sig.clicks.assign(clicks.begin(), clicks.end());
      sig.outcome = classify_bsm_clicks(sig.clicks, resolve_same_port_bins);
      out.probs[sig] += p;
    }
  }
  return out;
}

// Numerical overlap integral for Gaussian wavepackets with chirp.
cxd quadrature_overlap(const Wavepacket& w1, const Wavepacket& w2) {
  auto psi = [](const Wavepacket& w, double t) -> cxd {
    const double dt = t - w.t_center_ps;
    const double norm =
        std::pow(2.0 * kPi * w.sigma_ps * w.sigma_ps, -0.25);
    return norm * std::exp(cxd(-dt * dt / (4.0 * w.sigma_ps * w.sigma_ps),
                               w.chirp_rad_per_ps2 * dt * dt));
  };
  const double lo = std::min(w1.t_center_ps, w2.t_center_ps) -
                    12.0 * std::max(w1.sigma_ps, w2.sigma_ps);
  const double hi = std::max(w1.t_center_ps, w2.t_center_ps) +
                    12.0 * std::max(w1.sigma_ps, w2.sigma_ps);
  const int n = 40000;
  const double h = (hi - lo) / n;
  cxd acc(0, 0);
  for (int i = 0; i <= n; ++i) {
    const double t = lo + i * h;
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    acc += w * std::conj(psi(w1, t)) * psi(w2, t);
  }
  return acc * h;
}

}  // namespace

TEST_CASE("thermal pair statistics") {
  SourceSpec spec;
  spec.mean_pairs = 0.0;
  RngStream rng(1, "pairs");
  for (int i = 0; i < 1000; ++i) CHECK(sample_pair_count(spec, rng) == 0);

  spec.mean_pairs = 0.05;
  spec.max_pairs = 4;
  // analytic moments of the truncated thermal law
  double z = 0.0, m1 = 0.0, m2 = 0.0;
  for (int n = 0; n <= spec.max_pairs; ++n) {
    const double p = std::pow(spec.mean_pairs, n) /
                     std::pow(1.0 + spec.mean_pairs, n + 1);
    z += p;
    m1 += n * p;
    m2 += n * (n - 1.0) * p;
  }
  const double mean_expected = m1 / z;
  const double g2_expected = (m2 / z) / (mean_expected * mean_expected);
  CHECK(g2_expected == doctest::Approx(2.0).epsilon(0.02));

  double sum = 0.0, sum_nn1 = 0.0;
  const int draws = 10000000;
  for (int i = 0; i < draws; ++i) {
    const auto n = static_cast<double>(sample_pair_count(spec, rng));
    sum += n;
    sum_nn1 += n * (n - 1.0);
  }
  const double mean = sum / draws;
  CHECK(mean == doctest::Approx(0.05).epsilon(0.04));
  CHECK(std::abs(mean - mean_expected) < 0.002);
  const double g2 = (sum_nn1 / draws) / (mean * mean);
  CHECK(g2 == doctest::Approx(2.0).epsilon(0.05));
  CHECK(g2 == doctest::Approx(g2_expected).epsilon(0.03));
}

TEST_CASE("pair distributions are normalized and correctly shaped") {
  const auto th = thermal_pair_distribution(0.08, 3);
  double total = 0.0;
  for (double p : th) total += p;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(th[1] / th[0] == doctest::Approx(0.08 / 1.08).epsilon(1e-12));

  const auto dual = dual_mode_pair_distribution(0.08, 3);
  total = 0.0;
  for (double p : dual) total += p;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  // P(n) ~ (n+1) mu^n
  CHECK(dual[2] / dual[1] ==
        doctest::Approx(1.5 * 0.08 / 1.08).epsilon(1e-12));
}

TEST_CASE("user qubit encoder") {
  PhotonRecord idler;
  idler.bin_amp_early = 1.0;
  idler.bin_amp_late = 0.0;

  const PhotonRecord zero = encode_user_qubit(idler, 0.0, 0.0);
  CHECK(std::abs(zero.bin_amp_early - 1.0) < 1e-12);

  const PhotonRecord plus = encode_user_qubit(idler, 0.5, 0.0);
  CHECK(std::abs(plus.bin_amp_early - 1.0 / std::sqrt(2.0)) < 1e-12);
  CHECK(std::abs(plus.bin_amp_late - 1.0 / std::sqrt(2.0)) < 1e-12);

  const PhotonRecord plus_i = encode_user_qubit(idler, 0.5, kPi / 2);
  CHECK(std::abs(plus_i.bin_amp_late - cxd(0, 1.0 / std::sqrt(2.0))) < 1e-12);

  PhotonRecord dead = idler;
  dead.alive = false;
  CHECK_THROWS_AS(encode_user_qubit(dead, 0.5, 0.0), std::invalid_argument);

  PhotonRecord late = idler;
  late.bin_amp_early = 0.0;
  late.bin_amp_late = 1.0;
  CHECK_THROWS_AS(encode_user_qubit(late, 0.5, 0.0), std::invalid_argument);

  // settings round trip
  for (int i = 0; i < 6; ++i) {
    const auto enc = encoder_settings_for(cardinal_state(i));
    const TimeBinQubit q = encoded_qubit(enc.vbs_ratio, enc.phase);
    CHECK(overlap2(q, cardinal_state(i)) == doctest::Approx(1.0));
  }
}

TEST_CASE("bell pair generation") {
  RngStream rng(17, "bell");
  SourceSpec spec;
  spec.mean_pairs = 0.0;
  CHECK(generate_bell_pair(0.0, rng, spec).photons.empty());

  spec.mean_pairs = 0.2;
  for (double theta : {0.0, kPi}) {
    for (int attempt = 0; attempt < 2000; ++attempt) {
      const PulseEvent ev = generate_bell_pair(theta, rng, spec);
      if (ev.pairs.size() != 1) continue;
      const auto& pair = ev.pairs.front();
      CHECK(std::abs(pair.amp_early - cxd(1 / std::sqrt(2.0), 0)) < 1e-12);
      CHECK(std::abs(pair.amp_late - std::polar(1 / std::sqrt(2.0), theta)) <
            1e-12);
      CHECK(ev.photons[pair.signal_index].role == PhotonRole::Signal);
      CHECK(ev.photons[pair.idler_index].role == PhotonRole::Idler);
      break;
    }
  }
}

TEST_CASE("apply_loss survival statistics") {
  RngStream rng(23, "loss");
  PhotonRecord p;
  for (int i = 0; i < 200; ++i) {
    CHECK(apply_loss(p, 1.0, rng).alive);
    CHECK(!apply_loss(p, 0.0, rng).alive);
  }
  int survived = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    if (apply_loss(p, 0.5, rng).alive) ++survived;
  }
  CHECK(static_cast<double>(survived) / n == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("mode overlap closed form") {
  Wavepacket a{0.0, 8.5, 0.0, ItuChannel::C40};
  CHECK(std::abs(mode_overlap(a, a)) == doctest::Approx(1.0).epsilon(1e-12));

  // time offset of 2 sigma: |gamma| = exp(-1/2)
  Wavepacket b = a;
  b.t_center_ps = 2.0 * a.sigma_ps;
  const cxd g = mode_overlap(a, b);
  CHECK(std::abs(g) == doctest::Approx(std::exp(-0.5)).epsilon(1e-9));
  const cxd gq = quadrature_overlap(a, b);
  CHECK(std::abs(g - gq) < 1e-6);

  // chirped case: 6.15 km of D = 4 ps/(nm km) fiber at 1545.32 nm gives
  // beta2 L = -31.2 ps^2 and a chirp of about 7.3e-4 rad/ps^2
  Wavepacket c = a;
  c.sigma_ps = 8.70;
  c.chirp_rad_per_ps2 = 7.3e-4;
  const cxd g2 = mode_overlap(a, c);
  CHECK(std::abs(g2) < 1.0);
  CHECK(std::abs(g2 - quadrature_overlap(a, c)) < 1e-6);

  // Hermitian
  const cxd fwd = mode_overlap(a, c);
  const cxd rev = mode_overlap(c, a);
  CHECK(std::abs(fwd - std::conj(rev)) < 1e-12);

  // channel mismatch is orthogonal by definition
  Wavepacket d = a;
  d.channel = ItuChannel::C48;
  CHECK(std::abs(mode_overlap(a, d)) == 0.0);
}

TEST_CASE("bell analyzer matches the independent Fock oracle") {
  for (BellState b : {BellState::PhiPlus, BellState::PhiMinus,
                      BellState::PsiPlus, BellState::PsiMinus}) {
    for (double gamma : {0.0, 0.5, 1.0}) {
      const TwoPhotonBinState state = TwoPhotonBinState::bell(b);
      const auto got = bell_analyzer_probabilities(state, gamma);
      const auto want = bsm_oracle(state, gamma, false);
      double total = 0.0;
      for (const auto& [sig, p] : got) total += p;
      CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
      for (const auto& [sig, p] : want.probs) {
        REQUIRE(got.count(sig) == 1);
        CHECK(std::abs(got.at(sig) - p) < 1e-9);
      }
      for (const auto& [sig, p] : got) {
        if (!want.probs.count(sig)) CHECK(p < 1e-12);
      }
    }
  }
}

TEST_CASE("bell analyzer headline numbers") {
  auto outcome_prob = [](const std::map<BsmSignature, double>& probs,
                         BsmOutcome o) {
    double total = 0.0;
    for (const auto& [sig, p] : probs) {
      if (sig.outcome == o) total += p;
    }
    return total;
  };

  // Psi-, indistinguishable: always identified.
  const auto psim = bell_analyzer_probabilities(
      TwoPhotonBinState::bell(BellState::PsiMinus), 1.0);
  CHECK(outcome_prob(psim, BsmOutcome::PsiMinus) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(outcome_prob(psim, BsmOutcome::PsiPlus) < 1e-12);

  // Psi+, indistinguishable: success probability exactly one half.
  const auto psip = bell_analyzer_probabilities(
      TwoPhotonBinState::bell(BellState::PsiPlus), 1.0);
  CHECK(outcome_prob(psip, BsmOutcome::PsiPlus) ==
        doctest::Approx(0.5).epsilon(1e-12));
  CHECK(outcome_prob(psip, BsmOutcome::PsiMinus) < 1e-12);

  // Phi states never classify.
  for (BellState b : {BellState::PhiPlus, BellState::PhiMinus}) {
    const auto probs =
        bell_analyzer_probabilities(TwoPhotonBinState::bell(b), 1.0);
    CHECK(outcome_prob(probs, BsmOutcome::PsiPlus) < 1e-12);
    CHECK(outcome_prob(probs, BsmOutcome::PsiMinus) < 1e-12);
  }

  // Fully distinguishable photons: cross-arm coincidences happen half the
  // time regardless of the input Bell state.
  for (BellState b : {BellState::PhiPlus, BellState::PhiMinus,
                      BellState::PsiPlus, BellState::PsiMinus}) {
    const auto probs =
        bell_analyzer_probabilities(TwoPhotonBinState::bell(b), 0.0);
    double cross = 0.0;
    for (const auto& [sig, p] : probs) {
      if (sig.clicks.size() != 2) continue;
      const bool g1 = sig.clicks[0].first >= 3;
      const bool g2 = sig.clicks[1].first >= 3;
      if (g1 != g2) cross += p;
    }
    CHECK(cross == doctest::Approx(0.5).epsilon(1e-9));
  }
}

TEST_CASE("two-photon HOM coincidence scales as (1 - gamma^2)/2") {
  for (double gamma : {0.0, 0.3, 0.7, 0.95, 1.0}) {
    // both photons in the early bin
    TwoPhotonBinState st;
    st.amp[0][0] = 1.0;
    const auto probs = bell_analyzer_probabilities(st, gamma);
    double cross_same_bin = 0.0;
    for (const auto& [sig, p] : probs) {
      if (sig.clicks.size() != 2) continue;
      if (sig.clicks[0].second != sig.clicks[1].second) continue;
      const bool g1 = sig.clicks[0].first >= 3;
      const bool g2 = sig.clicks[1].first >= 3;
      if (g1 != g2) cross_same_bin += p;
    }
    CHECK(cross_same_bin ==
          doctest::Approx((1.0 - gamma * gamma) / 2.0).epsilon(1e-9));
  }
}

TEST_CASE("same-port different-bin resolution switch") {
  const auto unresolved = bell_analyzer_probabilities(
      TwoPhotonBinState::bell(BellState::PsiPlus), 1.0, false);
  const auto resolved = bell_analyzer_probabilities(
      TwoPhotonBinState::bell(BellState::PsiPlus), 1.0, true);
  auto psi_plus_prob = [](const std::map<BsmSignature, double>& probs) {
    double total = 0.0;
    for (const auto& [sig, p] : probs) {
      if (sig.outcome == BsmOutcome::PsiPlus) total += p;
    }
    return total;
  };
  CHECK(psi_plus_prob(unresolved) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(psi_plus_prob(resolved) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("projective umzi probabilities") {
  // |0>: half the photons land in t0, the t1 halves split evenly
  const auto p0 = projective_umzi(cardinal_state(0), 0.0);
  CHECK(p0.slot_total(0) == doctest::Approx(0.5));
  CHECK(p0.slot_total(2) == doctest::Approx(0.0));
  CHECK(p0.p[0][1] == doctest::Approx(0.25));
  CHECK(p0.p[1][1] == doctest::Approx(0.25));
  CHECK(p0.total() == doctest::Approx(1.0).epsilon(1e-12));

  // |+> at alpha = 0 interferes fully into B1
  const auto pp = projective_umzi(cardinal_state(2), 0.0);
  CHECK(pp.p[0][1] == doctest::Approx(0.5));
  CHECK(pp.p[1][1] == doctest::Approx(0.0));

  // |+i> at alpha = 0: mutually unbiased, both ports equal
  const auto pi = projective_umzi(cardinal_state(4), 0.0);
  CHECK(pi.p[0][1] == doctest::Approx(0.25));
  CHECK(pi.p[1][1] == doctest::Approx(0.25));

  // |+i> at alpha = pi/2 interferes fully into B1
  const auto pi2 = projective_umzi(cardinal_state(4), kPi / 2);
  CHECK(pi2.p[0][1] == doctest::Approx(0.5));
  CHECK(pi2.p[1][1] == doctest::Approx(0.0));

  PhotonRecord dead;
  dead.alive = false;
  CHECK_THROWS_AS(projective_umzi(dead, 0.0), std::invalid_argument);
}

TEST_CASE("projective umzi against an explicit path-sum oracle") {
  RngStream rng(31, "umzi");
  for (int trial = 0; trial < 40; ++trial) {
    const TimeBinQubit q = make_qubit(rng.uniform(0, kPi),
                                      rng.uniform(0, 2 * kPi));
    const double alpha = rng.uniform(0, 2 * kPi);
    const double r = rng.uniform(0.0, 1.0);
    const auto got = projective_umzi(q, alpha, r);

    // Path sum: (bin, arm) -> (slot, port) with explicit amplitudes; the
    // phase shifter sits in the long arm.
    cxd amp[2][3] = {};
    const double short_arm = std::sqrt((1.0 - r) / 2.0);
    const cxd long_arm = std::polar(std::sqrt(r / 2.0), alpha);
    const cxd bins[2] = {q.a0, q.a1};
    for (int bin = 0; bin < 2; ++bin) {
      amp[0][bin] += bins[bin] * short_arm;        // B1, short path
      amp[1][bin] += bins[bin] * short_arm;        // B2, short path
      amp[0][bin + 1] += bins[bin] * long_arm;     // B1, long path
      amp[1][bin + 1] -= bins[bin] * long_arm;     // B2, long path
    }
    double total = 0.0;
    for (int port = 0; port < 2; ++port) {
      for (int slot = 0; slot < 3; ++slot) {
        CHECK(got.p[port][slot] ==
              doctest::Approx(std::norm(amp[port][slot])).epsilon(1e-9));
        total += got.p[port][slot];
      }
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
}
