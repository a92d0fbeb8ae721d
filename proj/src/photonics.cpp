#include "qlink/photonics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "qlink/fock.hpp"

namespace qlink {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

std::string to_string(ItuChannel c) {
  switch (c) {
    case ItuChannel::C40: return "C40";
    case ItuChannel::C44: return "C44";
    case ItuChannel::C48: return "C48";
  }
  return "?";
}

double wavelength_nm(ItuChannel c) {
  switch (c) {
    case ItuChannel::C40: return 1545.32;
    case ItuChannel::C44: return 1542.14;
    case ItuChannel::C48: return 1538.98;
  }
  return 0.0;
}

cxd mode_overlap(const Wavepacket& w1, const Wavepacket& w2) {
  if (w1.sigma_ps <= 0.0 || w2.sigma_ps <= 0.0) {
    throw std::invalid_argument("wavepacket sigma must be positive");
  }
  if (w1.channel != w2.channel) return cxd(0.0, 0.0);
  const cxd a1(1.0 / (4.0 * w1.sigma_ps * w1.sigma_ps), -w1.chirp_rad_per_ps2);
  const cxd a2(1.0 / (4.0 * w2.sigma_ps * w2.sigma_ps), -w2.chirp_rad_per_ps2);
  const cxd p = std::conj(a1) + a2;
  const double n1 = std::pow(2.0 * a1.real() / kPi, 0.25);
  const double n2 = std::pow(2.0 * a2.real() / kPi, 0.25);
  const double dt = w1.t_center_ps - w2.t_center_ps;
  return n1 * n2 * std::sqrt(kPi / p) *
         std::exp(-std::conj(a1) * a2 * (dt * dt) / p);
}

void SourceSpec::validate() const {
  if (mean_pairs < 0.0 || mean_pairs >= 0.5) {
    throw std::invalid_argument("source mean_pairs must be in [0, 0.5)");
  }
  if (max_pairs < 2) {
    throw std::invalid_argument("source max_pairs must be >= 2");
  }
  if (sigma_ps <= 0.0) {
    throw std::invalid_argument("source sigma_ps must be positive");
  }
}

std::vector<double> thermal_pair_distribution(double mean_pairs,
                                              int max_pairs) {
  if (mean_pairs < 0.0) throw std::invalid_argument("negative mean_pairs");
  if (max_pairs < 0) throw std::invalid_argument("negative max_pairs");
  std::vector<double> p(static_cast<std::size_t>(max_pairs) + 1);
  const double q = mean_pairs / (1.0 + mean_pairs);
  double term = 1.0 / (1.0 + mean_pairs);
  double sum = 0.0;
  for (auto& pi : p) {
    pi = term;
    sum += term;
    term *= q;
  }
  for (auto& pi : p) pi /= sum;
  return p;
}

std::vector<double> dual_mode_pair_distribution(double mean_pairs_per_mode,
                                                int max_pairs) {
  if (mean_pairs_per_mode < 0.0) {
    throw std::invalid_argument("negative mean_pairs");
  }
  if (max_pairs < 0) throw std::invalid_argument("negative max_pairs");
  std::vector<double> p(static_cast<std::size_t>(max_pairs) + 1);
  const double q = mean_pairs_per_mode / (1.0 + mean_pairs_per_mode);
  double base = 1.0 / ((1.0 + mean_pairs_per_mode) *
                       (1.0 + mean_pairs_per_mode));
  double sum = 0.0;
  for (int n = 0; n <= max_pairs; ++n) {
    p[static_cast<std::size_t>(n)] = (n + 1) * base;
    sum += p[static_cast<std::size_t>(n)];
    base *= q;
  }
  for (auto& pi : p) pi /= sum;
  return p;
}

int sample_pair_count(const SourceSpec& spec, RngStream& rng) {
  spec.validate();
  if (spec.mean_pairs == 0.0) return 0;
  const auto dist = thermal_pair_distribution(spec.mean_pairs, spec.max_pairs);
  double u = rng.uniform();
  for (std::size_t n = 0; n < dist.size(); ++n) {
    if (u < dist[n]) return static_cast<int>(n);
    u -= dist[n];
  }
  return spec.max_pairs;
}

TimeBinQubit encoded_qubit(double vbs_ratio, double phase) {
  if (vbs_ratio < 0.0 || vbs_ratio > 1.0) {
    throw std::invalid_argument("vbs_ratio must be in [0, 1]");
  }
  return TimeBinQubit{cxd(std::sqrt(1.0 - vbs_ratio), 0.0),
                      std::polar(std::sqrt(vbs_ratio), phase)};
}

EncoderSettings encoder_settings_for(const TimeBinQubit& target) {
  const TimeBinQubit t = target.normalized();
  const double r = std::norm(t.a1);
  double phase = 0.0;
  if (std::abs(t.a1) > 1e-15 && std::abs(t.a0) > 1e-15) {
    phase = std::arg(t.a1) - std::arg(t.a0);
  }
  return EncoderSettings{r, phase};
}

PhotonRecord encode_user_qubit(const PhotonRecord& idler, double vbs_ratio,
                               double phase) {
  if (!idler.alive) throw std::invalid_argument("cannot encode a dead photon");
  if (std::abs(std::norm(idler.bin_amp_early) - 1.0) > 1e-9 ||
      std::norm(idler.bin_amp_late) > 1e-12) {
    throw std::invalid_argument("encoder expects a single early-bin input");
  }
  const TimeBinQubit q = encoded_qubit(vbs_ratio, phase);
  PhotonRecord out = idler;
  out.bin_amp_early = q.a0;
  out.bin_amp_late = q.a1;
  return out;
}

PulseEvent generate_bell_pair(double theta, RngStream& rng,
                              const SourceSpec& spec) {
  spec.validate();
  PulseEvent ev;
  const auto dist =
      dual_mode_pair_distribution(spec.mean_pairs, spec.max_pairs);
  double u = rng.uniform();
  int n = spec.max_pairs;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (u < dist[i]) {
      n = static_cast<int>(i);
      break;
    }
    u -= dist[i];
  }
  if (n == 0) return ev;

  auto add_pair = [&](cxd amp_early, cxd amp_late) {
    PhotonRecord signal;
    signal.role = PhotonRole::Signal;
    signal.origin = SourceId::RelaySource;
    signal.packet = Wavepacket{0.0, spec.sigma_ps, spec.chirp_rad_per_ps2,
                               spec.signal_channel};
    PhotonRecord idler = signal;
    idler.role = PhotonRole::Idler;
    idler.packet.channel = spec.idler_channel;
    const double norm =
        std::sqrt(std::norm(amp_early) + std::norm(amp_late));
    signal.bin_amp_early = idler.bin_amp_early = amp_early / norm;
    signal.bin_amp_late = idler.bin_amp_late = amp_late / norm;
    EntangledPair pair;
    pair.signal_index = static_cast<int>(ev.photons.size());
    pair.idler_index = pair.signal_index + 1;
    pair.amp_early = amp_early / norm;
    pair.amp_late = amp_late / norm;
    ev.photons.push_back(signal);
    ev.photons.push_back(idler);
    ev.pairs.push_back(pair);
  };

  const cxd late_phase = std::polar(1.0, theta);
  if (n == 1) {
    add_pair(cxd(1.0 / std::sqrt(2.0), 0.0),
             late_phase / std::sqrt(2.0));
    return ev;
  }
  // Multi-pair pulses: the k early / n-k late configurations carry equal
  // weight; sampled here in the bin basis.
  const auto k = static_cast<int>(rng.uniform_index(
      static_cast<std::uint64_t>(n) + 1));
  for (int i = 0; i < n; ++i) {
    if (i < k) {
      add_pair(cxd(1.0, 0.0), cxd(0.0, 0.0));
    } else {
      add_pair(cxd(0.0, 0.0), late_phase);
    }
  }
  return ev;
}

PhotonRecord apply_loss(const PhotonRecord& p, double transmittance,
                        RngStream& rng) {
  if (transmittance < 0.0 || transmittance > 1.0) {
    throw std::invalid_argument("transmittance must be in [0, 1]");
  }
  PhotonRecord out = p;
  if (out.alive) out.alive = rng.bernoulli(transmittance);
  return out;
}

std::string to_string(BsmOutcome o) {
  switch (o) {
    case BsmOutcome::PsiPlus: return "Psi+";
    case BsmOutcome::PsiMinus: return "Psi-";
    case BsmOutcome::None: return "none";
  }
  return "?";
}

BsmOutcome classify_bsm_clicks(const std::vector<std::pair<int, int>>& clicks,
                               bool resolve_same_port_bins) {
  if (clicks.size() != 2) return BsmOutcome::None;
  const auto& [port_a, bin_a] = clicks[0];
  const auto& [port_b, bin_b] = clicks[1];
  if (bin_a == bin_b) return BsmOutcome::None;
  if (port_a == port_b) {
    return resolve_same_port_bins ? BsmOutcome::PsiPlus : BsmOutcome::None;
  }
  const bool group_a = port_a >= 3;
  const bool group_b = port_b >= 3;
  return group_a == group_b ? BsmOutcome::PsiPlus : BsmOutcome::PsiMinus;
}

TwoPhotonBinState TwoPhotonBinState::bell(BellState b) {
  const double s = 1.0 / std::sqrt(2.0);
  TwoPhotonBinState st;
  switch (b) {
    case BellState::PhiPlus:
      st.amp[0][0] = s;
      st.amp[1][1] = s;
      break;
    case BellState::PhiMinus:
      st.amp[0][0] = s;
      st.amp[1][1] = -s;
      break;
    case BellState::PsiPlus:
      st.amp[0][1] = s;
      st.amp[1][0] = s;
      break;
    case BellState::PsiMinus:
      st.amp[0][1] = s;
      st.amp[1][0] = -s;
      break;
  }
  return st;
}

TwoPhotonBinState TwoPhotonBinState::product(const TimeBinQubit& user,
                                             const TimeBinQubit& relay) {
  const TimeBinQubit u = user.normalized();
  const TimeBinQubit r = relay.normalized();
  TwoPhotonBinState st;
  const cxd ua[2] = {u.a0, u.a1};
  const cxd ra[2] = {r.a0, r.a1};
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) st.amp[x][y] = ua[x] * ra[y];
  }
  return st;
}

double TwoPhotonBinState::norm2() const {
  double n = 0.0;
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) n += std::norm(amp[x][y]);
  }
  return n;
}

namespace {

// Analyzer output mode ids: (port 1..4, bin 0..1, layer 0..1).
inline fock::Mode analyzer_mode(int port, int bin, int layer) {
  return static_cast<fock::Mode>((port - 1) * 4 + bin * 2 + layer);
}

// First splitter: user port -> (c + d)/sqrt2, relay port -> (c - d)/sqrt2;
// second splitters: c -> (C1 + C2)/sqrt2, d -> (C3 + C4)/sqrt2. The
// composition sends the user input to all four ports with +1/2 and the
// relay input to (C1, C2, C3, C4) with (+,+,-,-)/2.
std::vector<fock::ModeAmp> user_output_op(int bin, int layer, cxd scale) {
  std::vector<fock::ModeAmp> op;
  for (int port = 1; port <= 4; ++port) {
    op.push_back({analyzer_mode(port, bin, layer), 0.5 * scale});
  }
  return op;
}

std::vector<fock::ModeAmp> relay_output_op(int bin) {
  std::vector<fock::ModeAmp> op;
  for (int port = 1; port <= 4; ++port) {
    const double sign = port <= 2 ? 0.5 : -0.5;
    op.push_back({analyzer_mode(port, bin, 0), cxd(sign, 0.0)});
  }
  return op;
}

}  // namespace

std::map<BsmSignature, double> bell_analyzer_probabilities(
    const TwoPhotonBinState& state, cxd gamma, bool resolve_same_port_bins) {
  const double g2 = std::norm(gamma);
  if (g2 > 1.0 + 1e-9) {
    throw std::invalid_argument("|gamma| must be <= 1");
  }
  const double kappa = std::sqrt(std::max(0.0, 1.0 - g2));
  const double norm = std::sqrt(state.norm2());
  if (norm <= 0.0) {
    throw std::invalid_argument("two-photon state has zero norm");
  }

  fock::State total;
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) {
      const cxd amp = state.amp[x][y] / norm;
      if (std::abs(amp) == 0.0) continue;
      fock::State part = fock::State::vacuum();
      // User photon: matched layer weighted by gamma, orthogonal by kappa.
      std::vector<fock::ModeAmp> user_op = user_output_op(x, 0, gamma);
      const auto perp = user_output_op(x, 1, cxd(kappa, 0.0));
      user_op.insert(user_op.end(), perp.begin(), perp.end());
      part.apply_creation(user_op);
      part.apply_creation(relay_output_op(y));
      part.scale(amp);
      for (const auto& [photons, a] : part.terms()) total.add_term(photons, a);
    }
  }

  std::map<BsmSignature, double> result;
  for (const auto& [photons, prob] : total.pattern_probabilities()) {
    if (prob <= 0.0) continue;
    std::set<std::pair<int, int>> clicks;
    for (fock::Mode m : photons) {
      clicks.insert({m / 4 + 1, (m % 4) / 2});
    }
    BsmSignature sig;
    sig.clicks.assign(clicks.begin(), clicks.end());
    sig.outcome = classify_bsm_clicks(sig.clicks, resolve_same_port_bins);
    result[sig] += prob;
  }
  return result;
}

UmziProbabilities projective_umzi(const TimeBinQubit& state,
                                  double measurement_phase,
                                  double vbs_ratio) {
  if (vbs_ratio < 0.0 || vbs_ratio > 1.0) {
    throw std::invalid_argument("vbs_ratio must be in [0, 1]");
  }
  const TimeBinQubit q = state.normalized();
  const double r = vbs_ratio;
  // The analyzer phase rides the long arm, so port B1 projects onto
  // |0> + e^{i alpha} |1> and B2 onto the orthogonal basis state.
  UmziProbabilities out;
  out.p[0][0] = out.p[1][0] = 0.5 * std::norm(q.a0) * (1.0 - r);
  out.p[0][2] = out.p[1][2] = 0.5 * std::norm(q.a1) * r;
  const cxd early_long =
      q.a0 * std::polar(std::sqrt(r), measurement_phase);
  const cxd late_short = q.a1 * std::sqrt(1.0 - r);
  out.p[0][1] = 0.5 * std::norm(early_long + late_short);
  out.p[1][1] = 0.5 * std::norm(early_long - late_short);
  return out;
}

UmziProbabilities projective_umzi(const PhotonRecord& photon,
                                  double measurement_phase,
                                  double vbs_ratio) {
  if (!photon.alive) {
    throw std::invalid_argument("cannot project a dead photon");
  }
  return projective_umzi(
      TimeBinQubit{photon.bin_amp_early, photon.bin_amp_late},
      measurement_phase, vbs_ratio);
}

double UmziProbabilities::total() const {
  double t = 0.0;
  for (const auto& row : p) {
    for (double v : row) t += v;
  }
  return t;
}

}  // namespace qlink
