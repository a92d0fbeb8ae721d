#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qlink/qstate.hpp"
#include "qlink/rng.hpp"

namespace qlink {

/// ITU grid channels used by the link: C40 carries the interfering idler
/// photons, C48 the signal photons, C44 the pump / heralding carrier.
enum class ItuChannel { C40, C44, C48 };

std::string to_string(ItuChannel c);
double wavelength_nm(ItuChannel c);

/// Gaussian temporal envelope with quadratic phase:
///   psi(t) ~ exp(-(t - t_center)^2 / (4 sigma^2) + i chirp (t - t_center)^2)
/// sigma is the standard deviation of the arrival-time density |psi|^2.
struct Wavepacket {
  double t_center_ps = 0.0;
  double sigma_ps = 8.5;
  double chirp_rad_per_ps2 = 0.0;
  ItuChannel channel = ItuChannel::C40;
};

/// <w1|w2> for Gaussian envelopes, in closed form. |gamma| = 1 iff the
/// packets are identical; different channels are orthogonal by definition.
cxd mode_overlap(const Wavepacket& w1, const Wavepacket& w2);

/// Pair source with thermal per-mode statistics.
struct SourceSpec {
  double mean_pairs = 0.0;  ///< mean pair number per pulse per time-bin mode
  int max_pairs = 2;        ///< truncation order of the emission expansion
  double sigma_ps = 8.5;
  double chirp_rad_per_ps2 = 0.0;
  ItuChannel idler_channel = ItuChannel::C40;
  ItuChannel signal_channel = ItuChannel::C48;

  void validate() const;
};

/// Thermal distribution P(n) = mu^n / (1+mu)^(n+1), truncated at max_pairs
/// and renormalized. Governs one squeezer mode.
std::vector<double> thermal_pair_distribution(double mean_pairs, int max_pairs);

/// Total-pair distribution of two equally pumped squeezer modes (the relay
/// source's early/late arms): P(n) ~ (n+1) mu^n / (1+mu)^(n+2), truncated
/// and renormalized.
std::vector<double> dual_mode_pair_distribution(double mean_pairs_per_mode,
                                                int max_pairs);

/// Draws a pair count from the truncated thermal distribution.
int sample_pair_count(const SourceSpec& spec, RngStream& rng);

enum class PhotonRole { Signal, Idler };
enum class SourceId { UserSource, RelaySource };

constexpr double kBinSeparationPs = 400.0;

/// One photon with its time-bin amplitudes and temporal envelope. The late
/// bin's arrival is t_center + 400 ps; the envelope shape is shared by both
/// bins.
struct PhotonRecord {
  PhotonRole role = PhotonRole::Idler;
  cxd bin_amp_early{1.0, 0.0};
  cxd bin_amp_late{0.0, 0.0};
  Wavepacket packet;
  SourceId origin = SourceId::UserSource;
  bool alive = true;

  double bin_arrival_ps(int bin) const {
    return packet.t_center_ps + bin * kBinSeparationPs;
  }
};

/// Pair-level entanglement bookkeeping: amp_early multiplies |0_s 0_i>,
/// amp_late multiplies |1_s 1_i>.
struct EntangledPair {
  int signal_index = -1;
  int idler_index = -1;
  cxd amp_early{0.0, 0.0};
  cxd amp_late{0.0, 0.0};
};

/// Emission record of one 10 ns clock cycle (100 MHz).
struct PulseEvent {
  static constexpr std::int64_t kSpacingPs = 10000;

  std::int64_t pulse_index = 0;
  std::vector<PhotonRecord> photons;
  std::vector<EntangledPair> pairs;

  std::int64_t time_ps() const { return pulse_index * kSpacingPs; }
};

/// VBS + phase settings realizing a target qubit: amplitudes
/// (sqrt(1-r), sqrt(r) e^{i phase}).
TimeBinQubit encoded_qubit(double vbs_ratio, double phase);

/// Settings that the encoder needs to produce `target` (up to global phase).
struct EncoderSettings {
  double vbs_ratio;
  double phase;
};
EncoderSettings encoder_settings_for(const TimeBinQubit& target);

/// Sends a single early-bin idler through the 400 ps encoder UMZI.
PhotonRecord encode_user_qubit(const PhotonRecord& idler, double vbs_ratio,
                               double phase);

/// Emits one pulse of the relay's time-bin entangled source. A single pair
/// carries the coherent amplitudes (1/sqrt2, e^{i theta}/sqrt2) over
/// (|0_s 0_i>, |1_s 1_i>); multi-pair emission samples a bin configuration
/// (the exact coherent multi-pair amplitudes live in the pulse kernel).
PulseEvent generate_bell_pair(double theta, RngStream& rng,
                              const SourceSpec& spec);

/// Bernoulli survival with the given transmittance.
PhotonRecord apply_loss(const PhotonRecord& p, double transmittance,
                        RngStream& rng);

enum class BsmOutcome { PsiPlus, PsiMinus, None };

std::string to_string(BsmOutcome o);

/// Click pattern at the analyzer outputs: ports 1..4 (C1..C4), bins 0/1.
struct BsmSignature {
  BsmOutcome outcome = BsmOutcome::None;
  std::vector<std::pair<int, int>> clicks;  ///< sorted (port, bin)

  bool operator<(const BsmSignature& other) const {
    if (outcome != other.outcome) return outcome < other.outcome;
    return clicks < other.clicks;
  }
  bool operator==(const BsmSignature& other) const {
    return outcome == other.outcome && clicks == other.clicks;
  }
};

/// Classifies a two-click analyzer pattern. Psi-: one click in {C1,C2} and
/// one in {C3,C4}, different bins. Psi+: both clicks in the same group,
/// different ports, different bins. Same-port different-bin patterns count
/// as Psi+ only when `resolve_same_port_bins` is set.
BsmOutcome classify_bsm_clicks(const std::vector<std::pair<int, int>>& clicks,
                               bool resolve_same_port_bins = false);

/// Joint bin amplitudes of the two photons entering the analyzer:
/// amp[user_bin][relay_bin].
struct TwoPhotonBinState {
  cxd amp[2][2]{{cxd(0, 0), cxd(0, 0)}, {cxd(0, 0), cxd(0, 0)}};

  static TwoPhotonBinState bell(BellState b);
  static TwoPhotonBinState product(const TimeBinQubit& user,
                                   const TimeBinQubit& relay);
  double norm2() const;
};

/// Full click-pattern distribution of the cascaded-splitter Bell analyzer
/// for two photons with mutual wavepacket overlap `gamma`. Interference is
/// scaled by gamma exactly (the distinguishable component is carried in an
/// orthogonal temporal layer). Probabilities sum to 1.
std::map<BsmSignature, double> bell_analyzer_probabilities(
    const TwoPhotonBinState& state, cxd gamma,
    bool resolve_same_port_bins = false);

/// Projective measurement UMZI at the central node: probability of each
/// (port, time slot) outcome, ports 1 = B1, 2 = B2, slots t0..t2.
/// vbs_ratio is the long-arm fraction of the first splitter.
struct UmziProbabilities {
  double p[2][3]{};  ///< [port-1][slot]

  double slot_total(int slot) const { return p[0][slot] + p[1][slot]; }
  double total() const;
};

UmziProbabilities projective_umzi(const PhotonRecord& photon,
                                  double measurement_phase,
                                  double vbs_ratio = 0.5);
UmziProbabilities projective_umzi(const TimeBinQubit& state,
                                  double measurement_phase,
                                  double vbs_ratio = 0.5);

}  // namespace qlink
