#include "qlink/protocol.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qlink {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr std::int64_t kPulsePs = PulseEvent::kSpacingPs;

double db_to_transmittance(double db) { return std::pow(10.0, -db / 10.0); }

double vector_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) /
                      static_cast<double>(v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

BellState to_bell_state(BsmOutcome o) {
  switch (o) {
    case BsmOutcome::PsiPlus: return BellState::PsiPlus;
    case BsmOutcome::PsiMinus: return BellState::PsiMinus;
    default: throw std::logic_error("no Bell state for outcome none");
  }
}

}  // namespace

void NodeConfig::validate() const {
  user_source.validate();
  relay_source.validate();
  fiber_user_relay.validate();
  fiber_relay_central.validate();
  delay_line.validate();
  for (const auto& [channel, spec] : detectors) {
    (void)channel;
    spec.validate();
  }
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(user_vbs_ratio) || !in_unit(central_vbs_ratio)) {
    throw std::invalid_argument("vbs ratios must be in [0, 1]");
  }
  if (!in_unit(herald_path_transmittance) ||
      !in_unit(relay_idler_transmittance) ||
      !in_unit(local_path_transmittance)) {
    throw std::invalid_argument("path transmittances must be in [0, 1]");
  }
  if (user_path_extra_db < 0.0 || central_path_extra_db < 0.0) {
    throw std::invalid_argument("extra path losses must be >= 0 dB");
  }
  if (bsm_background_hz < 0.0) {
    throw std::invalid_argument("background rate must be >= 0");
  }
  if (coincidence_window_ps <= 0.0 || fourfold_window_ps <= 0.0 ||
      gate_width_ps <= 0.0 || bin_separation_ps <= 0.0) {
    throw std::invalid_argument("detection windows must be positive");
  }
  if (feedback_period_s <= 0.0) {
    throw std::invalid_argument("feedback period must be positive");
  }
  if (feedback_min_tags < 1 || feedback_pairs_per_window < 1) {
    throw std::invalid_argument("feedback tag counts must be >= 1");
  }
  if (herald_pd_jitter_ps < 0.0) {
    throw std::invalid_argument("herald PD jitter must be >= 0");
  }
}

DetectorSpec NodeConfig::detector(Channel c) const {
  auto it = detectors.find(c);
  if (it != detectors.end()) return it->second;
  return DetectorSpec{};
}

double NodeConfig::user_idler_transmittance_total() const {
  return fiber_transmittance(fiber_user_relay) *
         db_to_transmittance(user_path_extra_db);
}

double NodeConfig::central_transmittance_total() const {
  return fiber_transmittance(fiber_relay_central) *
         db_to_transmittance(central_path_extra_db);
}

double NodeConfig::herald_click_prob() const {
  return herald_path_transmittance * detector(Channel::Herald).efficiency;
}

Wavepacket NodeConfig::user_packet_at_bsm(double arrival_offset_ps) const {
  Wavepacket w{0.0, user_source.sigma_ps, user_source.chirp_rad_per_ps2,
               user_source.idler_channel};
  w = apply_dispersion(w, beta2_length_ps2(fiber_user_relay, w.channel));
  w.t_center_ps += arrival_offset_ps;
  return w;
}

Wavepacket NodeConfig::relay_packet_at_bsm() const {
  return Wavepacket{0.0, relay_source.sigma_ps,
                    relay_source.chirp_rad_per_ps2,
                    relay_source.idler_channel};
}

double NodeConfig::bsm_gamma_abs(double arrival_offset_ps) const {
  return std::abs(
      mode_overlap(relay_packet_at_bsm(), user_packet_at_bsm(arrival_offset_ps)));
}

KernelSettings NodeConfig::kernel_settings(const TimeBinQubit& user_state,
                                           double measurement_phase_override,
                                           double bsm_arrival_offset_ps,
                                           double user_arm_scale,
                                           double relay_arm_scale) const {
  KernelSettings s;
  s.user_state = user_state;
  s.relay_pair_phase = relay_pair_phase;
  s.measurement_phase = measurement_phase_override;
  s.central_vbs_ratio = central_vbs_ratio;
  s.gamma_abs = bsm_gamma_abs(bsm_arrival_offset_ps);
  s.user_mean_pairs = user_source.mean_pairs;
  s.relay_mean_pairs_per_bin = relay_source.mean_pairs;
  s.max_pairs = std::min(user_source.max_pairs, relay_source.max_pairs);
  s.postselect_single_pair = postselect_single_pair;
  s.herald_click_prob = herald_click_prob();
  s.user_idler_transmittance =
      user_idler_transmittance_total() * user_arm_scale;
  s.relay_idler_transmittance = relay_idler_transmittance * relay_arm_scale;
  s.central_transmittance = central_transmittance_total();
  const Channel cports[4] = {Channel::C1, Channel::C2, Channel::C3,
                             Channel::C4};
  double dark_sum = 0.0;
  for (int i = 0; i < 4; ++i) {
    const DetectorSpec d = detector(cports[i]);
    s.bsm_efficiency[i] = d.efficiency;
    dark_sum += d.dark_rate_hz;
  }
  s.dark_prob_bsm_slot = (dark_sum / 4.0 + bsm_background_hz) *
                         gate_width_ps * 1e-12;
  const Channel bports[2] = {Channel::B1, Channel::B2};
  double bdark = 0.0;
  for (int i = 0; i < 2; ++i) {
    const DetectorSpec d = detector(bports[i]);
    s.central_efficiency[i] = d.efficiency;
    bdark += d.dark_rate_hz;
  }
  s.dark_prob_central_slot = (bdark / 2.0) * gate_width_ps * 1e-12;
  s.resolve_same_port_bins = resolve_same_port_bins;
  return s;
}

double FeedbackRunLog::residual_std_ps() const {
  return vector_std(true_residual_ps);
}

double FeedbackRunLog::measured_std_ps() const {
  std::vector<double> measured;
  for (const auto& s : samples) {
    if (!s.held) measured.push_back(s.measured_delta_ps);
  }
  return vector_std(measured);
}

// ---------------------------------------------------------------------------
// Session internals

namespace {

// With the emission expansion truncated at two pairs per source, every
// click probability is an exact quadratic polynomial in g = |gamma|^2 (each
// user photon carries one factor of gamma or kappa). Three kernel
// evaluations therefore give exact probabilities at any overlap.
constexpr double kPolyNodes[3] = {0.2, 0.5, 0.8};

double lagrange3(const std::array<double, 3>& values, double g) {
  const double n0 = kPolyNodes[0], n1 = kPolyNodes[1], n2 = kPolyNodes[2];
  const double l0 = (g - n1) * (g - n2) / ((n0 - n1) * (n0 - n2));
  const double l1 = (g - n0) * (g - n2) / ((n1 - n0) * (n1 - n2));
  const double l2 = (g - n0) * (g - n1) / ((n2 - n0) * (n2 - n1));
  const double p = values[0] * l0 + values[1] * l1 + values[2] * l2;
  return p < 0.0 ? 0.0 : p;
}

struct ClassPolyTable {
  std::vector<std::pair<PulseOutcomeKey, std::array<double, 3>>> synth;
  std::array<double, 3> herald{};
  std::array<double, 3> threefold{};
  std::array<double, 3> threefold_synth{};
  bool built = false;
};

ClassPolyTable build_class_poly(const KernelSettings& base, bool resolve) {
  ClassPolyTable t;
  std::map<PulseOutcomeKey, std::array<double, 3>> synth_map;
  for (int i = 0; i < 3; ++i) {
    KernelSettings ks = base;
    ks.gamma_abs = std::sqrt(kPolyNodes[i]);
    for (const auto& [key, p] : evaluate_pulse_kernel(ks)) {
      if (key.herald) t.herald[static_cast<std::size_t>(i)] += p;
      const bool threefold = key_is_threefold(key, resolve);
      if (threefold) t.threefold[static_cast<std::size_t>(i)] += p;
      const bool synth = key.herald && key.bsm_clicks().size() >= 2 &&
                         key.central_click_count() >= 1;
      if (synth) {
        synth_map[key][static_cast<std::size_t>(i)] += p;
        if (threefold) {
          t.threefold_synth[static_cast<std::size_t>(i)] += p;
        }
      }
    }
  }
  t.synth.assign(synth_map.begin(), synth_map.end());
  t.built = true;
  return t;
}

struct EventBundle {
  std::int64_t pulse_index;
  PulseOutcomeKey key;
};

}  // namespace

struct LinkSession::Impl {
  NodeConfig cfg;
  std::uint64_t seed;
  bool feedback_on;
  TemperatureTrace trace;
  FeedbackState fb;
  double command0;
  double next_fb_epoch;
  double p_herald_pulse;
  double p_local_pulse;
  double herald_tag_jitter;
  RngStream rng_events;
  RngStream rng_tags;
  RngStream rng_feedback;
  TagStream archive;
  ClassPolyTable poly;

  Impl(const NodeConfig& c, std::uint64_t s, double planned_duration_s,
       bool fb_on)
      : cfg(c),
        seed(s),
        feedback_on(fb_on),
        rng_events(s, "protocol.events"),
        rng_tags(s, "protocol.tags"),
        rng_feedback(s, "protocol.feedback") {
    cfg.validate();
    RngStream rng_temp(s, "channel.temperature");
    if (!cfg.temperature_csv.empty()) {
      trace = load_temperature_csv(cfg.temperature_csv);
    } else {
      TemperatureModelParams params = cfg.temperature;
      params.duration_s =
          std::max(params.duration_s,
                   planned_duration_s + 4.0 * cfg.feedback_period_s);
      trace = make_temperature_trace(params, rng_temp);
    }
    command0 = cfg.delay_line.range_ps / 2.0;
    fb.command_ps = command0;
    fb.gain = cfg.feedback_gain;
    fb.setpoint_ps = cfg.feedback_setpoint_ps;
    fb.min_tags = cfg.feedback_min_tags;
    next_fb_epoch = cfg.feedback_period_s;

    const auto pu = thermal_pair_distribution(cfg.user_source.mean_pairs,
                                              cfg.user_source.max_pairs);
    const double h = cfg.herald_click_prob();
    p_herald_pulse = 0.0;
    for (std::size_t n = 0; n < pu.size(); ++n) {
      p_herald_pulse +=
          pu[n] * (1.0 - std::pow(1.0 - h, static_cast<double>(n)));
    }
    const auto pr = dual_mode_pair_distribution(cfg.relay_source.mean_pairs,
                                                cfg.relay_source.max_pairs);
    const double lt = cfg.local_path_transmittance *
                      cfg.detector(Channel::Local).efficiency;
    p_local_pulse = 0.0;
    for (std::size_t n = 0; n < pr.size(); ++n) {
      p_local_pulse +=
          pr[n] * (1.0 - std::pow(1.0 - lt, static_cast<double>(n)));
    }
    herald_tag_jitter = std::hypot(
        cfg.detector(Channel::Herald).jitter_sigma_ps, cfg.herald_pd_jitter_ps);
  }

  double drift_ps(double epoch_s) const {
    return drift_offset_at(trace, cfg.fiber_user_relay, epoch_s);
  }

  double command_offset() const { return fb.command_ps - command0; }

  double residual_ps(double epoch_s) const {
    return drift_ps(epoch_s) + command_offset();
  }

  double bsm_base_delay() const {
    return fiber_delay_ps(cfg.fiber_user_relay) + command0;
  }
  double central_base_delay() const {
    return fiber_delay_ps(cfg.fiber_relay_central);
  }

  const ClassPolyTable& class_poly(const KernelSettings& settings) {
    if (!poly.built) {
      poly = build_class_poly(settings, cfg.resolve_same_port_bins);
    }
    return poly;
  }

  /// Tag bundle of one synthesized pulse; residual enters the user-origin
  /// analyzer clicks (picked at random) and the heralding channel.
  void synthesize_bundle(const EventBundle& bundle, double residual,
                         TagStream& out) {
    const double t0 = static_cast<double>(bundle.pulse_index) *
                      static_cast<double>(kPulsePs);
    const double d_bsm = bsm_base_delay();
    const double d_c = central_base_delay();
    auto push = [&out](Channel ch, double t) {
      out.push_back({ch, static_cast<std::int64_t>(std::llround(t))});
    };
    if (bundle.key.herald) {
      push(Channel::Herald,
           t0 + d_bsm + residual + rng_tags.gauss(0.0, herald_tag_jitter));
    }
    for (const auto& [port, bin] : bundle.key.bsm_clicks()) {
      const Channel ch = static_cast<Channel>(port);
      const double jitter = rng_tags.gauss(
          0.0, cfg.detector(ch).jitter_sigma_ps);
      const double user_origin = rng_tags.bernoulli(0.5) ? residual : 0.0;
      push(ch, t0 + d_bsm + bin * cfg.bin_separation_ps + user_origin + jitter);
    }
    for (int port = 0; port < 2; ++port) {
      for (int slot = 0; slot < 3; ++slot) {
        if (!(bundle.key.central_mask &
              PulseOutcomeKey::central_bit(port, slot))) {
          continue;
        }
        const Channel ch = port == 0 ? Channel::B1 : Channel::B2;
        push(ch, t0 + d_c + slot * cfg.bin_separation_ps +
                     rng_tags.gauss(0.0, cfg.detector(ch).jitter_sigma_ps));
      }
    }
    push(Channel::Sync, t0 + d_c);
  }

  void feedback_boundary(double epoch, FeedbackRunLog& log) {
    const double period = cfg.feedback_period_s;
    const double window_start = epoch - period;
    const double pulses_in_window = period * kClockRateHz;
    const auto n_herald = rng_feedback.poisson(p_herald_pulse * pulses_in_window);
    const auto n_local = rng_feedback.poisson(p_local_pulse * pulses_in_window);
    const auto pairs = std::min<std::int64_t>(
        {n_herald, n_local,
         static_cast<std::int64_t>(cfg.feedback_pairs_per_window)});

    std::optional<double> measured;
    if (pairs >= cfg.feedback_min_tags) {
      TagStream herald_tags, local_tags;
      herald_tags.reserve(static_cast<std::size_t>(pairs));
      local_tags.reserve(static_cast<std::size_t>(pairs));
      const double d_bsm = bsm_base_delay();
      const double local_jitter = cfg.detector(Channel::Local).jitter_sigma_ps;
      for (std::int64_t i = 0; i < pairs; ++i) {
        const double t = rng_feedback.uniform(window_start, epoch);
        const auto pulse = static_cast<std::int64_t>(t * kClockRateHz);
        const double tp = static_cast<double>(pulse) *
                          static_cast<double>(kPulsePs);
        const double delta = residual_ps(t);
        herald_tags.push_back(
            {Channel::Herald,
             static_cast<std::int64_t>(std::llround(
                 tp + d_bsm + delta +
                 rng_feedback.gauss(0.0, herald_tag_jitter)))});
        local_tags.push_back(
            {Channel::Local,
             static_cast<std::int64_t>(std::llround(
                 tp + d_bsm + rng_feedback.gauss(0.0, local_jitter)))});
      }
      std::sort(herald_tags.begin(), herald_tags.end());
      std::sort(local_tags.begin(), local_tags.end());
      measured = estimate_delta(herald_tags, local_tags, cfg.feedback_min_tags);
    }

    FeedbackSample sample;
    if (measured && feedback_on) {
      sample = control_step(fb, epoch, *measured, cfg.delay_line);
    } else {
      sample.epoch_s = epoch;
      sample.measured_delta_ps = measured.value_or(0.0);
      sample.command_ps = fb.command_ps;
      sample.held = !measured.has_value();
      fb.history.push_back(sample);
    }
    log.samples.push_back(sample);
    log.true_residual_ps.push_back(residual_ps(epoch));
    log.drift_ps.push_back(drift_ps(epoch));
    log.temperature_c.push_back(trace.temperature_at(epoch));
  }
};

LinkSession::LinkSession(NodeConfig cfg, std::uint64_t seed,
                         double planned_duration_s, bool feedback_on)
    : impl_(std::make_unique<Impl>(cfg, seed, planned_duration_s, feedback_on)),
      cfg_(std::move(cfg)) {}

LinkSession::~LinkSession() = default;

TagStream LinkSession::take_tag_archive() {
  TagStream out = std::move(impl_->archive);
  impl_->archive.clear();
  return out;
}

SettingResult LinkSession::run_setting(const Setting& setting) {
  if (setting.duration_s < 0.0) {
    throw std::invalid_argument("setting duration must be >= 0");
  }
  SettingResult result;
  result.label = setting.label;
  result.duration_s = setting.duration_s;
  result.user_phase = setting.user_phase;
  result.measurement_phase = setting.measurement_phase;
  result.input_state = setting.input_state;

  impl_->poly.built = false;

  TagStream bundle_tags;
  const double t_end = epoch_s_ + setting.duration_s;
  double epoch = epoch_s_;
  double lambda_threefold_rest = 0.0;
  double lambda_herald_rest = 0.0;

  while (epoch < t_end - 1e-9) {
    const double seg_end = std::min(t_end, impl_->next_fb_epoch);
    const auto pulse_lo = static_cast<std::int64_t>(epoch * kClockRateHz);
    const auto pulse_hi = static_cast<std::int64_t>(seg_end * kClockRateHz);
    const auto n_pulses = pulse_hi - pulse_lo;
    result.counts.pulses += n_pulses;

    if (n_pulses > 0 && setting.sample_events) {
      const double mid = 0.5 * (epoch + seg_end);
      const double residual =
          impl_->residual_ps(mid) + setting.bsm_delay_offset_ps;
      const KernelSettings ks = cfg_.kernel_settings(
          setting.input_state, setting.measurement_phase, residual,
          setting.user_arm_scale, setting.relay_arm_scale);
      const ClassPolyTable& table = impl_->class_poly(ks);
      const double g = std::min(1.0, ks.gamma_abs * ks.gamma_abs);

      const double p_herald = lagrange3(table.herald, g);
      const double p_threefold = lagrange3(table.threefold, g);
      const double p_threefold_synth = lagrange3(table.threefold_synth, g);
      lambda_herald_rest +=
          (p_herald - p_threefold) * static_cast<double>(n_pulses);
      lambda_threefold_rest += (p_threefold - p_threefold_synth) *
                               static_cast<double>(n_pulses);

      for (const auto& [key, nodes] : table.synth) {
        const double p = lagrange3(nodes, g);
        const auto m = impl_->rng_events.poisson(
            p * static_cast<double>(n_pulses));
        for (std::int64_t i = 0; i < m; ++i) {
          EventBundle bundle;
          bundle.pulse_index =
              pulse_lo + static_cast<std::int64_t>(impl_->rng_events.uniform_index(
                             static_cast<std::uint64_t>(n_pulses)));
          bundle.key = key;
          if (key_is_threefold(key, cfg_.resolve_same_port_bins)) {
            result.counts.threefolds += 1;
          }
          if (classify_fourfold_key(key, cfg_.resolve_same_port_bins)) {
            result.counts.fourfold_candidates += 1;
          }
          const double t_pulse = static_cast<double>(bundle.pulse_index) /
                                 kClockRateHz;
          impl_->synthesize_bundle(
              bundle,
              impl_->residual_ps(t_pulse) + setting.bsm_delay_offset_ps,
              bundle_tags);
        }
      }
    } else if (n_pulses > 0) {
      // Drift-only advance still accounts for heralds.
      lambda_herald_rest +=
          impl_->p_herald_pulse * static_cast<double>(n_pulses);
    }

    epoch = seg_end;
    if (epoch >= impl_->next_fb_epoch - 1e-9) {
      impl_->feedback_boundary(impl_->next_fb_epoch, feedback_log_);
      impl_->next_fb_epoch += cfg_.feedback_period_s;
    }
  }
  epoch_s_ = t_end;

  result.counts.threefolds += impl_->rng_events.poisson(lambda_threefold_rest);
  result.counts.heralds =
      result.counts.threefolds + impl_->rng_events.poisson(lambda_herald_rest);

  // Honest re-derivation of the accepted events from the synthesized tags.
  std::sort(bundle_tags.begin(), bundle_tags.end());
  impl_->archive.insert(impl_->archive.end(), bundle_tags.begin(),
                        bundle_tags.end());

  const double d_bsm = impl_->bsm_base_delay();
  const double d_c = impl_->central_base_delay();
  std::map<Channel, TagStream> per_channel;
  for (const TimeTag& tag : bundle_tags) {
    TimeTag corrected = tag;
    switch (tag.channel) {
      case Channel::Herald:
      case Channel::C1:
      case Channel::C2:
      case Channel::C3:
      case Channel::C4:
        corrected.time_ps -= static_cast<std::int64_t>(std::llround(d_bsm));
        break;
      case Channel::B1:
      case Channel::B2:
      case Channel::Sync:
        corrected.time_ps -= static_cast<std::int64_t>(std::llround(d_c));
        break;
      default:
        break;
    }
    per_channel[corrected.channel].push_back(corrected);
  }
  for (auto& [ch, stream] : per_channel) {
    (void)ch;
    std::sort(stream.begin(), stream.end());
  }

  CoincidencePattern pattern;
  pattern.groups.push_back({{Channel::Herald}, 1});
  pattern.groups.push_back(
      {{Channel::C1, Channel::C2, Channel::C3, Channel::C4}, 2});
  pattern.groups.push_back({{Channel::B1, Channel::B2}, 1});

  std::vector<TagStream> streams;
  for (Channel ch : {Channel::Herald, Channel::C1, Channel::C2, Channel::C3,
                     Channel::C4, Channel::B1, Channel::B2}) {
    auto it = per_channel.find(ch);
    if (it != per_channel.end()) streams.push_back(it->second);
  }
  const TagStream& sync = per_channel[Channel::Sync];

  const auto events =
      find_coincidences(streams, cfg_.fourfold_window_ps, pattern);

  // All analyzer tags, used or not, for the extra-click veto.
  TagStream c_tags;
  for (Channel ch : {Channel::C1, Channel::C2, Channel::C3, Channel::C4}) {
    auto it = per_channel.find(ch);
    if (it != per_channel.end()) {
      c_tags.insert(c_tags.end(), it->second.begin(), it->second.end());
    }
  }
  std::sort(c_tags.begin(), c_tags.end());
  TagStream b_tags;
  for (Channel ch : {Channel::B1, Channel::B2}) {
    auto it = per_channel.find(ch);
    if (it != per_channel.end()) {
      b_tags.insert(b_tags.end(), it->second.begin(), it->second.end());
    }
  }
  std::sort(b_tags.begin(), b_tags.end());

  auto count_in_window = [&](const TagStream& tags, std::int64_t lo,
                             std::int64_t hi) {
    auto first = std::lower_bound(
        tags.begin(), tags.end(), TimeTag{Channel::Herald, lo});
    std::int64_t n = 0;
    for (auto it = first; it != tags.end() && it->time_ps <= hi; ++it) ++n;
    return n;
  };

  for (const CoincidenceEvent& ev : events) {
    const std::int64_t lo = ev.tags.front().time_ps;
    const auto hi = lo + static_cast<std::int64_t>(cfg_.fourfold_window_ps);

    std::optional<TimeTag> herald_tag, b_tag;
    for (const TimeTag& tag : ev.tags) {
      if (tag.channel == Channel::Herald) herald_tag = tag;
      if (tag.channel == Channel::B1 || tag.channel == Channel::B2) {
        b_tag = tag;
      }
    }
    if (!herald_tag || !b_tag) continue;

    if (count_in_window(c_tags, lo, hi) > 2) {
      result.counts.ambiguous_bsm += 1;
      continue;
    }
    if (count_in_window(b_tags, lo, hi) > 1) {
      result.counts.multi_central += 1;
      continue;
    }

    const std::int64_t frame =
        ((herald_tag->time_ps + kPulsePs / 2) / kPulsePs) * kPulsePs;
    const BsmOutcome outcome =
        classify_bsm(ev, frame, cfg_.bin_separation_ps, cfg_.gate_width_ps,
                     cfg_.resolve_same_port_bins);
    if (outcome == BsmOutcome::None) {
      result.counts.bin_rejects += 1;
      continue;
    }

    // Frame reference for the central click from the sync stream.
    auto sync_it = std::lower_bound(
        sync.begin(), sync.end(), TimeTag{Channel::Sync, b_tag->time_ps});
    std::int64_t frame_c;
    if (sync_it == sync.end()) {
      frame_c = sync.empty() ? frame : sync.back().time_ps;
    } else if (sync_it == sync.begin()) {
      frame_c = sync_it->time_ps;
    } else {
      const std::int64_t after = sync_it->time_ps;
      const std::int64_t before = (sync_it - 1)->time_ps;
      frame_c = (b_tag->time_ps - before) <= (after - b_tag->time_ps) ? before
                                                                      : after;
    }
    const auto slot = classify_bin(*b_tag, frame_c, cfg_.bin_separation_ps,
                                   cfg_.gate_width_ps);
    if (!slot) {
      result.counts.bin_rejects += 1;
      continue;
    }

    TeleportationEvent tev;
    tev.pulse_index = frame / kPulsePs;
    tev.bsm = to_bell_state(outcome);
    tev.central_port = b_tag->channel == Channel::B1 ? 0 : 1;
    tev.central_slot = *slot;
    tev.herald_present = true;
    result.events.push_back(tev);
    result.counts.fourfolds += 1;
  }

  return result;
}

// ---------------------------------------------------------------------------
// Spec-level single-pulse sampler

PulseResult run_pulse(const NodeConfig& cfg, std::int64_t pulse_index,
                      double bsm_arrival_offset_ps, RngStream& rng) {
  cfg.validate();
  const TimeBinQubit input = encoded_qubit(cfg.user_vbs_ratio, cfg.user_phase);
  const KernelSettings ks = cfg.kernel_settings(
      input, cfg.measurement_phase, bsm_arrival_offset_ps);
  const PulseDistribution dist = evaluate_pulse_kernel(ks);

  double u = rng.uniform();
  PulseOutcomeKey sampled{};
  for (const auto& [key, p] : dist) {
    if (u < p) {
      sampled = key;
      break;
    }
    u -= p;
  }

  PulseResult result;
  result.key = sampled;
  const double t0 = static_cast<double>(pulse_index) *
                    static_cast<double>(kPulsePs);
  auto push = [&](Channel ch, double t) {
    result.tags.push_back({ch, static_cast<std::int64_t>(std::llround(t))});
  };
  const double herald_jitter = std::hypot(
      cfg.detector(Channel::Herald).jitter_sigma_ps, cfg.herald_pd_jitter_ps);
  if (sampled.herald) push(Channel::Herald, t0 + rng.gauss(0.0, herald_jitter));
  for (const auto& [port, bin] : sampled.bsm_clicks()) {
    const auto ch = static_cast<Channel>(port);
    push(ch, t0 + bin * cfg.bin_separation_ps +
                 rng.gauss(0.0, cfg.detector(ch).jitter_sigma_ps));
  }
  for (int port = 0; port < 2; ++port) {
    for (int slot = 0; slot < 3; ++slot) {
      if (!(sampled.central_mask & PulseOutcomeKey::central_bit(port, slot))) {
        continue;
      }
      const Channel ch = port == 0 ? Channel::B1 : Channel::B2;
      push(ch, t0 + slot * cfg.bin_separation_ps +
                   rng.gauss(0.0, cfg.detector(ch).jitter_sigma_ps));
    }
  }
  push(Channel::Sync, t0);
  std::sort(result.tags.begin(), result.tags.end());

  if (const auto cls =
          classify_fourfold_key(sampled, cfg.resolve_same_port_bins)) {
    TeleportationEvent ev;
    ev.pulse_index = pulse_index;
    ev.bsm = to_bell_state(cls->outcome);
    ev.central_port = cls->central_port;
    ev.central_slot = cls->central_slot;
    ev.herald_present = true;
    result.event = ev;
  }
  return result;
}

RunArchives run_experiment(const NodeConfig& cfg, double duration_s,
                           bool feedback_on, std::uint64_t seed) {
  LinkSession session(cfg, seed, duration_s, feedback_on);
  LinkSession::Setting setting;
  setting.label = "run";
  setting.input_state = encoded_qubit(cfg.user_vbs_ratio, cfg.user_phase);
  setting.user_phase = cfg.user_phase;
  setting.measurement_phase = cfg.measurement_phase;
  setting.duration_s = duration_s;
  RunArchives archives;
  archives.seed = seed;
  archives.settings.push_back(session.run_setting(setting));
  archives.feedback = session.feedback_log();
  archives.tags = session.take_tag_archive();
  return archives;
}

HeraldSyncStreams herald_and_sync_tags(const std::vector<CycleRecord>& cycles,
                                       const NodeConfig& cfg, double delta_ps,
                                       RngStream& rng) {
  HeraldSyncStreams out;
  const double d_bsm = fiber_delay_ps(cfg.fiber_user_relay) +
                       cfg.delay_line.range_ps / 2.0;
  const double d_c = fiber_delay_ps(cfg.fiber_relay_central);
  const double herald_jitter = std::hypot(
      cfg.detector(Channel::Herald).jitter_sigma_ps, cfg.herald_pd_jitter_ps);
  const double local_jitter = cfg.detector(Channel::Local).jitter_sigma_ps;
  for (const CycleRecord& c : cycles) {
    const double t0 = static_cast<double>(c.pulse_index) *
                      static_cast<double>(kPulsePs);
    if (c.herald) {
      out.herald.push_back(
          {Channel::Herald,
           static_cast<std::int64_t>(std::llround(
               t0 + d_bsm + delta_ps + rng.gauss(0.0, herald_jitter)))});
    }
    if (c.local) {
      out.local.push_back(
          {Channel::Local,
           static_cast<std::int64_t>(std::llround(
               t0 + d_bsm + rng.gauss(0.0, local_jitter)))});
    }
    out.sync.push_back(
        {Channel::Sync,
         static_cast<std::int64_t>(std::llround(t0 + d_c))});
  }
  std::sort(out.herald.begin(), out.herald.end());
  std::sort(out.local.begin(), out.local.end());
  std::sort(out.sync.begin(), out.sync.end());
  return out;
}

// ---------------------------------------------------------------------------
// Experiment drivers

FringeScanResult run_fringe_scan(const NodeConfig& cfg, int phase_points,
                                 double duration_per_point_s, bool feedback_on,
                                 std::uint64_t seed) {
  if (phase_points < 5) {
    throw std::invalid_argument("fringe scan needs >= 5 phase points");
  }
  FringeScanResult result;
  result.seed = seed;
  LinkSession session(cfg, seed,
                      phase_points * duration_per_point_s, feedback_on);
  for (int i = 0; i < phase_points; ++i) {
    const double phi = 2.0 * kPi * i / phase_points;
    LinkSession::Setting setting;
    setting.label = "phi_" + std::to_string(i);
    setting.input_state = encoded_qubit(0.5, phi);
    setting.user_phase = phi;
    setting.measurement_phase = cfg.measurement_phase;
    setting.duration_s = duration_per_point_s;
    result.settings.push_back(session.run_setting(setting));
    result.phases.push_back(phi);
  }
  result.feedback = session.feedback_log();
  result.tags = session.take_tag_archive();
  return result;
}

TomographySuiteResult run_tomography_suite(const NodeConfig& cfg,
                                           double duration_per_alpha_s,
                                           bool feedback_on,
                                           std::uint64_t seed) {
  TomographySuiteResult result;
  result.seed = seed;
  LinkSession session(cfg, seed, 12.0 * duration_per_alpha_s, feedback_on);
  for (int input = 0; input < 6; ++input) {
    const TimeBinQubit state = cardinal_state(input);
    const EncoderSettings enc = encoder_settings_for(state);
    std::array<SettingResult, 2> pair;
    for (int alpha = 0; alpha < 2; ++alpha) {
      LinkSession::Setting setting;
      setting.label = cardinal_state_name(input) +
                      std::string(alpha == 0 ? "_a0" : "_a90");
      setting.input_state = state;
      setting.user_phase = enc.phase;
      setting.measurement_phase = alpha == 0 ? 0.0 : kPi / 2.0;
      setting.duration_s = duration_per_alpha_s;
      pair[static_cast<std::size_t>(alpha)] = session.run_setting(setting);
    }
    result.settings.push_back(std::move(pair));
  }
  result.feedback = session.feedback_log();
  result.tags = session.take_tag_archive();
  return result;
}

DriftStudyResult run_drift_study(const NodeConfig& cfg, double duration_s,
                                 bool feedback_on, std::uint64_t seed) {
  DriftStudyResult result;
  result.seed = seed;
  result.feedback_on = feedback_on;
  result.duration_s = duration_s;
  LinkSession session(cfg, seed, duration_s, feedback_on);
  LinkSession::Setting setting;
  setting.label = "drift";
  setting.input_state = encoded_qubit(cfg.user_vbs_ratio, cfg.user_phase);
  setting.user_phase = cfg.user_phase;
  setting.measurement_phase = cfg.measurement_phase;
  setting.duration_s = duration_s;
  setting.sample_events = false;
  session.run_setting(setting);
  result.log = session.feedback_log();
  if (!result.log.temperature_c.empty()) {
    const auto [tmin, tmax] = std::minmax_element(
        result.log.temperature_c.begin(), result.log.temperature_c.end());
    result.temperature_swing_c = *tmax - *tmin;
    const auto [dmin, dmax] = std::minmax_element(
        result.log.drift_ps.begin(), result.log.drift_ps.end());
    result.drift_swing_ps = *dmax - *dmin;
  }
  result.residual_std_ps = result.log.residual_std_ps();
  result.measured_std_ps = result.log.measured_std_ps();
  return result;
}

RateStudyResult run_rate_study(const NodeConfig& cfg, double duration_s,
                               bool feedback_on, std::uint64_t seed) {
  RateStudyResult result;
  result.seed = seed;
  RunArchives archives = run_experiment(cfg, duration_s, feedback_on, seed);
  result.setting = std::move(archives.settings.front());
  result.tags = std::move(archives.tags);
  const double hours = duration_s / 3600.0;
  // Teleportation events are the fourfolds whose central click falls in the
  // interference bin t1 (the phase-carrying half of the fourfolds).
  double n = 0;
  for (const auto& ev : result.setting.events) {
    if (ev.central_slot == 1) n += 1.0;
  }
  result.events_per_hour = n / hours;
  result.events_per_hour_stderr = std::sqrt(std::max(n, 1.0)) / hours;
  return result;
}

}  // namespace qlink
