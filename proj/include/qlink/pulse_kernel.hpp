#pragma once

#include <cstdint>
#include <map>
#include <optional>

#include "qlink/photonics.hpp"

namespace qlink {

/// Everything the per-pulse quantum evaluation needs. Transmittances are
/// lumped per path segment; detector efficiencies act after the
/// interferometers; dark/noise clicks are folded in to first order.
struct KernelSettings {
  TimeBinQubit user_state;          ///< encoded user qubit
  double relay_pair_phase = 0.0;    ///< theta of the relay Bell source
  double measurement_phase = 0.0;   ///< central analyzer phase
  double central_vbs_ratio = 0.5;
  double gamma_abs = 1.0;           ///< |overlap| of the two BSM wavepackets

  double user_mean_pairs = 0.0;          ///< per pulse, single squeezer mode
  double relay_mean_pairs_per_bin = 0.0; ///< per pulse per time-bin mode
  int max_pairs = 2;
  bool postselect_single_pair = false;

  double herald_click_prob = 1.0;        ///< per user signal photon
  double user_idler_transmittance = 1.0; ///< emission -> analyzer input
  double relay_idler_transmittance = 1.0;
  double central_transmittance = 1.0;    ///< emission -> central UMZI input

  double bsm_efficiency[4] = {1.0, 1.0, 1.0, 1.0};
  double central_efficiency[2] = {1.0, 1.0};

  double dark_prob_bsm_slot = 0.0;      ///< per (C port, bin) gate per pulse
  double dark_prob_central_slot = 0.0;  ///< per (B port, slot) gate per pulse

  bool resolve_same_port_bins = false;
};

/// Click pattern of one pulse. BSM bits: (port-1)*2 + bin over C1..C4 and
/// bins {early, late}; central bits: port*3 + slot over B1/B2 and t0..t2.
struct PulseOutcomeKey {
  bool herald = false;
  std::uint16_t bsm_mask = 0;
  std::uint8_t central_mask = 0;

  bool operator<(const PulseOutcomeKey& o) const {
    if (herald != o.herald) return herald < o.herald;
    if (bsm_mask != o.bsm_mask) return bsm_mask < o.bsm_mask;
    return central_mask < o.central_mask;
  }
  bool operator==(const PulseOutcomeKey& o) const {
    return herald == o.herald && bsm_mask == o.bsm_mask &&
           central_mask == o.central_mask;
  }

  static std::uint16_t bsm_bit(int port, int bin) {
    return static_cast<std::uint16_t>(1u << ((port - 1) * 2 + bin));
  }
  static std::uint8_t central_bit(int port, int slot) {
    return static_cast<std::uint8_t>(1u << (port * 3 + slot));
  }
  std::vector<std::pair<int, int>> bsm_clicks() const;
  int central_click_count() const;
  std::optional<std::pair<int, int>> single_central_click() const;
};

/// Probability of each click pattern for one clock cycle. Sums to 1 over
/// all keys (the empty pattern carries the remaining mass).
using PulseDistribution = std::map<PulseOutcomeKey, double>;

PulseDistribution evaluate_pulse_kernel(const KernelSettings& settings);

/// Fourfold teleportation candidate: herald, a Psi+/Psi- analyzer pattern
/// and exactly one central click.
struct FourfoldClass {
  BsmOutcome outcome;
  int central_port;  ///< 0 = B1, 1 = B2
  int central_slot;  ///< 0..2
};

std::optional<FourfoldClass> classify_fourfold_key(const PulseOutcomeKey& key,
                                                   bool resolve_same_port_bins);

/// Herald plus a valid Psi+/Psi- pattern, central state ignored.
bool key_is_threefold(const PulseOutcomeKey& key, bool resolve_same_port_bins);

/// Herald plus >= 2 analyzer clicks that do not classify.
bool key_is_ambiguous_bsm(const PulseOutcomeKey& key,
                          bool resolve_same_port_bins);

/// Coincidence between the merged first-splitter arms (C1+C2 vs C3+C4) in
/// the early time bin, the interference bin of an unencoded probe photon;
/// heralding is ignored.
int hom_coincidences(const PulseOutcomeKey& key);

}  // namespace qlink
