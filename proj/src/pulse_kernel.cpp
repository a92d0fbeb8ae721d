#include "qlink/pulse_kernel.hpp"

#include <cmath>
#include <stdexcept>

#include "qlink/fock.hpp"

namespace qlink {

namespace {

// Mode ids. 0..15: analyzer outputs (port-1)*4 + bin*2 + layer, layer 0
// shares the relay wavepacket, layer 1 is orthogonal to it. 16..21:
// central outputs 16 + port*3 + slot. 22..27: loss environments. 100..105:
// transient source modes.
constexpr fock::Mode kUidlE = 100, kUidlL = 101;
constexpr fock::Mode kRidlE = 102, kRidlL = 103;
constexpr fock::Mode kRsigE = 104, kRsigL = 105;

inline fock::Mode analyzer_mode(int port, int bin, int layer) {
  return static_cast<fock::Mode>((port - 1) * 4 + bin * 2 + layer);
}
inline fock::Mode central_mode(int port, int slot) {
  return static_cast<fock::Mode>(16 + port * 3 + slot);
}
constexpr fock::Mode kEnvBase = 22;

std::vector<fock::ModeAmp> user_idler_image(int bin, double t, double gamma,
                                            double kappa) {
  std::vector<fock::ModeAmp> image;
  const double amp = 0.5 * std::sqrt(t);
  for (int port = 1; port <= 4; ++port) {
    if (gamma != 0.0) {
      image.push_back({analyzer_mode(port, bin, 0), cxd(amp * gamma, 0.0)});
    }
    if (kappa != 0.0) {
      image.push_back({analyzer_mode(port, bin, 1), cxd(amp * kappa, 0.0)});
    }
  }
  if (t < 1.0) {
    image.push_back({static_cast<fock::Mode>(kEnvBase + bin),
                     cxd(std::sqrt(1.0 - t), 0.0)});
  }
  return image;
}

std::vector<fock::ModeAmp> relay_idler_image(int bin, double t) {
  std::vector<fock::ModeAmp> image;
  const double amp = 0.5 * std::sqrt(t);
  for (int port = 1; port <= 4; ++port) {
    const double sign = port <= 2 ? 1.0 : -1.0;
    image.push_back({analyzer_mode(port, bin, 0), cxd(sign * amp, 0.0)});
  }
  if (t < 1.0) {
    image.push_back({static_cast<fock::Mode>(kEnvBase + 2 + bin),
                     cxd(std::sqrt(1.0 - t), 0.0)});
  }
  return image;
}

std::vector<fock::ModeAmp> relay_signal_image(int bin, double t, double vbs,
                                              double phase) {
  // bin 0 feeds slots (t0, t1), bin 1 feeds (t1, t2); the long-arm path
  // carries the analyzer phase, so B1 projects onto |0> + e^{i alpha} |1>.
  std::vector<fock::ModeAmp> image;
  const double root_t = std::sqrt(t);
  const cxd short_amp(root_t * std::sqrt((1.0 - vbs) / 2.0), 0.0);
  const cxd long_amp =
      std::polar(root_t * std::sqrt(vbs / 2.0), phase);
  const int short_slot = bin == 0 ? 0 : 1;
  const int long_slot = bin == 0 ? 1 : 2;
  image.push_back({central_mode(0, short_slot), short_amp});
  image.push_back({central_mode(1, short_slot), short_amp});
  image.push_back({central_mode(0, long_slot), long_amp});
  image.push_back({central_mode(1, long_slot), -long_amp});
  if (t < 1.0) {
    image.push_back({static_cast<fock::Mode>(kEnvBase + 4 + bin),
                     cxd(std::sqrt(1.0 - t), 0.0)});
  }
  return image;
}

struct ClickOption {
  std::uint16_t bits;
  double prob;
};

// Threshold detection of one port with dead time inside the pulse frame:
// only the earliest occupied bin can register unless `resolve` is set.
template <int Slots>
void port_click_options(const int (&occ)[Slots], double efficiency,
                        bool resolve, int bit_base,
                        std::vector<ClickOption>& out) {
  out.clear();
  const double miss = 1.0 - efficiency;
  if (resolve) {
    out.push_back({0, 1.0});
    for (int s = 0; s < Slots; ++s) {
      if (occ[s] == 0) continue;
      const double p_click = 1.0 - std::pow(miss, occ[s]);
      std::vector<ClickOption> next;
      next.reserve(out.size() * 2);
      for (const auto& o : out) {
        next.push_back({o.bits, o.prob * (1.0 - p_click)});
        next.push_back(
            {static_cast<std::uint16_t>(o.bits | (1u << (bit_base + s))),
             o.prob * p_click});
      }
      out = std::move(next);
    }
    return;
  }
  double none_so_far = 1.0;
  for (int s = 0; s < Slots; ++s) {
    if (occ[s] == 0) continue;
    const double p_click = 1.0 - std::pow(miss, occ[s]);
    out.push_back({static_cast<std::uint16_t>(1u << (bit_base + s)),
                   none_so_far * p_click});
    none_so_far *= 1.0 - p_click;
  }
  out.push_back({0, none_so_far});
}

}  // namespace

std::vector<std::pair<int, int>> PulseOutcomeKey::bsm_clicks() const {
  std::vector<std::pair<int, int>> clicks;
  for (int port = 1; port <= 4; ++port) {
    for (int bin = 0; bin < 2; ++bin) {
      if (bsm_mask & bsm_bit(port, bin)) clicks.emplace_back(port, bin);
    }
  }
  return clicks;
}

int PulseOutcomeKey::central_click_count() const {
  int n = 0;
  for (int b = 0; b < 6; ++b) {
    if (central_mask & (1u << b)) ++n;
  }
  return n;
}

std::optional<std::pair<int, int>> PulseOutcomeKey::single_central_click()
    const {
  if (central_click_count() != 1) return std::nullopt;
  for (int port = 0; port < 2; ++port) {
    for (int slot = 0; slot < 3; ++slot) {
      if (central_mask & central_bit(port, slot)) return {{port, slot}};
    }
  }
  return std::nullopt;
}

PulseDistribution evaluate_pulse_kernel(const KernelSettings& s) {
  if (s.gamma_abs < 0.0 || s.gamma_abs > 1.0 + 1e-9) {
    throw std::invalid_argument("gamma_abs must be in [0, 1]");
  }
  const double gamma = std::min(s.gamma_abs, 1.0);
  const double kappa = std::sqrt(std::max(0.0, 1.0 - gamma * gamma));
  const TimeBinQubit user = s.user_state.normalized();

  const auto p_user =
      thermal_pair_distribution(s.user_mean_pairs, s.max_pairs);
  const auto p_relay =
      dual_mode_pair_distribution(s.relay_mean_pairs_per_bin, s.max_pairs);

  PulseDistribution quantum;
  auto accumulate = [&quantum](const PulseOutcomeKey& key, double p) {
    if (p <= 0.0) return;
    quantum[key] += p;
  };

  std::vector<ClickOption> port_opts;
  std::vector<std::pair<std::uint32_t, double>> partial, next_partial;

  for (int n_u = 0; n_u <= s.max_pairs; ++n_u) {
    for (int n_r = 0; n_r <= s.max_pairs; ++n_r) {
      double weight = p_user[static_cast<std::size_t>(n_u)] *
                      p_relay[static_cast<std::size_t>(n_r)];
      if (s.postselect_single_pair) {
        if (n_u != 1 || n_r != 1) continue;
        weight = 1.0;
      }
      if (weight <= 0.0) continue;

      const double herald_prob =
          1.0 - std::pow(1.0 - s.herald_click_prob, n_u);

      if (n_u == 0 && n_r == 0) {
        accumulate(PulseOutcomeKey{false, 0, 0}, weight);
        continue;
      }

      // User idler: n_u photons, all in the encoded superposition mode.
      fock::State state = fock::State::vacuum();
      for (int i = 0; i < n_u; ++i) {
        state.apply_creation({{kUidlE, user.a0}, {kUidlL, user.a1}});
      }
      state.scale(1.0 / std::sqrt(fock::factorial(n_u)));

      // Relay source: coherent superposition of the k early / n_r - k late
      // pair configurations, each with equal weight.
      if (n_r > 0) {
        fock::State relay;
        for (int k = 0; k <= n_r; ++k) {
          const cxd coeff =
              std::polar(1.0 / (std::sqrt(static_cast<double>(n_r + 1)) *
                                fock::factorial(k) *
                                fock::factorial(n_r - k)),
                         s.relay_pair_phase * (n_r - k));
          fock::Photons photons;
          for (int i = 0; i < k; ++i) {
            photons.push_back(kRidlE);
            photons.push_back(kRsigE);
          }
          for (int i = 0; i < n_r - k; ++i) {
            photons.push_back(kRidlL);
            photons.push_back(kRsigL);
          }
          relay.add_term(std::move(photons), coeff);
        }
        state = state.tensor(relay);
      }

      state.substitute(kUidlE,
                       user_idler_image(0, s.user_idler_transmittance, gamma,
                                        kappa));
      state.substitute(kUidlL,
                       user_idler_image(1, s.user_idler_transmittance, gamma,
                                        kappa));
      state.substitute(kRidlE,
                       relay_idler_image(0, s.relay_idler_transmittance));
      state.substitute(kRidlL,
                       relay_idler_image(1, s.relay_idler_transmittance));
      state.substitute(kRsigE,
                       relay_signal_image(0, s.central_transmittance,
                                          s.central_vbs_ratio,
                                          s.measurement_phase));
      state.substitute(kRsigL,
                       relay_signal_image(1, s.central_transmittance,
                                          s.central_vbs_ratio,
                                          s.measurement_phase));

      state.for_each_pattern([&](const fock::Photons& photons, double prob) {
        int c_occ[4][2] = {};
        int b_occ[2][3] = {};
        for (fock::Mode m : photons) {
          if (m < 16) {
            c_occ[m / 4][(m % 4) / 2] += 1;
          } else if (m < 22) {
            const int rel = m - 16;
            b_occ[rel / 3][rel % 3] += 1;
          }
          // env photons are traced out
        }

        partial.clear();
        partial.emplace_back(0u, prob);
        for (int port = 0; port < 4; ++port) {
          port_click_options<2>(c_occ[port], s.bsm_efficiency[port],
                                s.resolve_same_port_bins, port * 2,
                                port_opts);
          next_partial.clear();
          for (const auto& [mask, p0] : partial) {
            for (const auto& opt : port_opts) {
              if (opt.prob <= 0.0) continue;
              next_partial.emplace_back(mask | opt.bits, p0 * opt.prob);
            }
          }
          partial.swap(next_partial);
        }
        // Central ports occupy bits 8.. in the working mask.
        for (int port = 0; port < 2; ++port) {
          port_click_options<3>(b_occ[port], s.central_efficiency[port],
                                false, 8 + port * 3, port_opts);
          next_partial.clear();
          for (const auto& [mask, p0] : partial) {
            for (const auto& opt : port_opts) {
              if (opt.prob <= 0.0) continue;
              next_partial.emplace_back(
                  mask | (static_cast<std::uint32_t>(opt.bits)),
                  p0 * opt.prob);
            }
          }
          partial.swap(next_partial);
        }

        for (const auto& [mask, p0] : partial) {
          PulseOutcomeKey key;
          key.bsm_mask = static_cast<std::uint16_t>(mask & 0xff);
          key.central_mask = static_cast<std::uint8_t>((mask >> 8) & 0x3f);
          if (herald_prob > 0.0) {
            key.herald = true;
            accumulate(key, weight * herald_prob * p0);
          }
          if (herald_prob < 1.0) {
            key.herald = false;
            accumulate(key, weight * (1.0 - herald_prob) * p0);
          }
        }
      });
    }
  }

  if (s.dark_prob_bsm_slot <= 0.0 && s.dark_prob_central_slot <= 0.0) {
    return quantum;
  }

  // First-order dark/noise click insertion on ports without a quantum
  // click (a later dark on an already-fired port is absorbed by dead time).
  PulseDistribution with_darks;
  for (const auto& [key, p] : quantum) {
    double stay = 1.0;
    for (int port = 1; port <= 4; ++port) {
      const bool port_hit =
          (key.bsm_mask & (PulseOutcomeKey::bsm_bit(port, 0) |
                           PulseOutcomeKey::bsm_bit(port, 1))) != 0;
      if (port_hit) continue;
      for (int bin = 0; bin < 2; ++bin) {
        PulseOutcomeKey aug = key;
        aug.bsm_mask |= PulseOutcomeKey::bsm_bit(port, bin);
        with_darks[aug] += p * s.dark_prob_bsm_slot;
        stay -= s.dark_prob_bsm_slot;
      }
    }
    for (int port = 0; port < 2; ++port) {
      const bool port_hit =
          (key.central_mask & (PulseOutcomeKey::central_bit(port, 0) |
                               PulseOutcomeKey::central_bit(port, 1) |
                               PulseOutcomeKey::central_bit(port, 2))) != 0;
      if (port_hit) continue;
      for (int slot = 0; slot < 3; ++slot) {
        PulseOutcomeKey aug = key;
        aug.central_mask |= PulseOutcomeKey::central_bit(port, slot);
        with_darks[aug] += p * s.dark_prob_central_slot;
        stay -= s.dark_prob_central_slot;
      }
    }
    with_darks[key] += p * stay;
  }
  return with_darks;
}

std::optional<FourfoldClass> classify_fourfold_key(
    const PulseOutcomeKey& key, bool resolve_same_port_bins) {
  if (!key.herald) return std::nullopt;
  const auto central = key.single_central_click();
  if (!central) return std::nullopt;
  const BsmOutcome outcome =
      classify_bsm_clicks(key.bsm_clicks(), resolve_same_port_bins);
  if (outcome == BsmOutcome::None) return std::nullopt;
  return FourfoldClass{outcome, central->first, central->second};
}

bool key_is_threefold(const PulseOutcomeKey& key,
                      bool resolve_same_port_bins) {
  if (!key.herald) return false;
  return classify_bsm_clicks(key.bsm_clicks(), resolve_same_port_bins) !=
         BsmOutcome::None;
}

bool key_is_ambiguous_bsm(const PulseOutcomeKey& key,
                          bool resolve_same_port_bins) {
  if (!key.herald) return false;
  const auto clicks = key.bsm_clicks();
  return clicks.size() >= 2 &&
         classify_bsm_clicks(clicks, resolve_same_port_bins) ==
             BsmOutcome::None;
}

int hom_coincidences(const PulseOutcomeKey& key) {
  // Gated on the early bin: the scan probes interference of an unencoded
  // (early-bin) photon against the relay idler, and the histogram bin is
  // chosen where that interference happens. The relay's late-bin pairs
  // would otherwise add a dip-free background.
  const bool arm_a = key.bsm_mask & (PulseOutcomeKey::bsm_bit(1, 0) |
                                     PulseOutcomeKey::bsm_bit(2, 0));
  const bool arm_b = key.bsm_mask & (PulseOutcomeKey::bsm_bit(3, 0) |
                                     PulseOutcomeKey::bsm_bit(4, 0));
  return arm_a && arm_b ? 1 : 0;
}

}  // namespace qlink
