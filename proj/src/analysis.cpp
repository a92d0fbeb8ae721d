#include "qlink/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qlink {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

FringeFit fit_sinusoid(const std::vector<FringePoint>& points) {
  if (points.size() < 5) {
    throw std::invalid_argument("fringe fit needs >= 5 points");
  }
  double lo = points.front().phase, hi = points.front().phase;
  for (const auto& p : points) {
    lo = std::min(lo, p.phase);
    hi = std::max(hi, p.phase);
  }
  if (hi - lo < 1.5 * kPi) {
    throw std::invalid_argument("fringe points must span most of one period");
  }

  // y ~ C + a cos(phi) + b sin(phi): linear in (C, a, b).
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
  for (const auto& p : points) {
    const double w = 1.0 / std::max(p.counts, 1.0);  // Poisson weight
    const Eigen::Vector3d x(1.0, std::cos(p.phase), std::sin(p.phase));
    m += w * x * x.transpose();
    rhs += w * p.counts * x;
  }
  Eigen::FullPivLU<Eigen::Matrix3d> lu(m);
  if (!lu.isInvertible()) {
    throw std::runtime_error("fringe fit is degenerate");
  }
  const Eigen::Vector3d beta = lu.solve(rhs);
  const Eigen::Matrix3d cov = lu.inverse();

  FringeFit fit;
  fit.offset = beta(0);
  const double a = beta(1), b = beta(2);
  fit.amplitude = std::hypot(a, b);
  fit.phase0 = fit.amplitude > 0.0 ? std::atan2(b, a) : 0.0;
  fit.offset_stderr = std::sqrt(std::max(0.0, cov(0, 0)));
  if (fit.amplitude > 1e-12) {
    const double ca = a / fit.amplitude, cb = b / fit.amplitude;
    fit.amplitude_stderr = std::sqrt(std::max(
        0.0, ca * ca * cov(1, 1) + cb * cb * cov(2, 2) +
                 2.0 * ca * cb * cov(1, 2)));
    const double da = -b / (fit.amplitude * fit.amplitude);
    const double db = a / (fit.amplitude * fit.amplitude);
    fit.phase_stderr = std::sqrt(std::max(
        0.0, da * da * cov(1, 1) + db * db * cov(2, 2) +
                 2.0 * da * db * cov(1, 2)));
  } else {
    fit.amplitude_stderr =
        std::sqrt(std::max(cov(1, 1), cov(2, 2)));
    fit.phase_stderr = kPi;
  }
  for (const auto& p : points) {
    const double model =
        fit.offset + a * std::cos(p.phase) + b * std::sin(p.phase);
    const double w = 1.0 / std::max(p.counts, 1.0);
    fit.chi2 += w * (p.counts - model) * (p.counts - model);
  }
  fit.dof = static_cast<int>(points.size()) - 3;
  fit.visibility =
      fit.offset > 0.0
          ? std::clamp(fit.amplitude / fit.offset, 0.0, 1.0)
          : 0.0;
  return fit;
}

EventRate event_rate(std::int64_t events, double duration_h) {
  if (duration_h <= 0.0) {
    throw std::invalid_argument("event rate needs a positive duration");
  }
  if (events < 0) throw std::invalid_argument("negative event count");
  EventRate r;
  r.per_hour = static_cast<double>(events) / duration_h;
  r.stderr_per_hour = std::sqrt(static_cast<double>(events)) / duration_h;
  return r;
}

FringeAnalysis analyze_fringe_scan(const FringeScanResult& scan) {
  FringeAnalysis out;
  const struct {
    BellState outcome;
    int port;
    const char* key;
  } series[] = {
      {BellState::PsiPlus, 0, "psi_plus_b1"},
      {BellState::PsiPlus, 1, "psi_plus_b2"},
      {BellState::PsiMinus, 0, "psi_minus_b1"},
      {BellState::PsiMinus, 1, "psi_minus_b2"},
  };
  // Fringe counts gate on the central t1 bin, where the projective
  // analyzer interferes the two time-bin amplitudes; t0/t2 clicks carry no
  // phase information and would halve the ceiling.
  for (const auto& s : series) {
    std::vector<FringePoint> pts;
    for (std::size_t i = 0; i < scan.settings.size(); ++i) {
      double count = 0;
      for (const auto& ev : scan.settings[i].events) {
        if (ev.bsm == s.outcome && ev.central_port == s.port &&
            ev.central_slot == 1) {
          count += 1;
        }
      }
      pts.push_back({scan.phases[i], count});
    }
    out.series[s.key] = pts;
    out.fits[s.key] = fit_sinusoid(pts);
  }
  double vis_sum = 0.0;
  for (const auto& [key, fit] : out.fits) {
    (void)key;
    vis_sum += fit.visibility;
  }
  out.average_visibility = vis_sum / static_cast<double>(out.fits.size());
  out.psi_plus_fringe_max =
      0.5 * (out.fits["psi_plus_b1"].amplitude +
             out.fits["psi_plus_b1"].offset +
             out.fits["psi_plus_b2"].amplitude +
             out.fits["psi_plus_b2"].offset);
  out.psi_minus_fringe_max =
      0.5 * (out.fits["psi_minus_b1"].amplitude +
             out.fits["psi_minus_b1"].offset +
             out.fits["psi_minus_b2"].amplitude +
             out.fits["psi_minus_b2"].offset);
  for (const auto& setting : scan.settings) {
    for (const auto& ev : setting.events) {
      if (ev.central_slot != 1) continue;
      if (ev.bsm == BellState::PsiPlus) ++out.psi_plus_events;
      if (ev.bsm == BellState::PsiMinus) ++out.psi_minus_events;
    }
  }
  return out;
}

std::map<BellState, TomographyOutcome> teleport_tomography(
    const std::vector<TeleportationEvent>& events_alpha0,
    const std::vector<TeleportationEvent>& events_alpha90,
    const TimeBinQubit& input) {
  if (events_alpha0.empty() || events_alpha90.empty()) {
    std::string missing;
    if (events_alpha0.empty()) missing += " |+>/|-> (analyzer phase 0)";
    if (events_alpha90.empty()) missing += " |+i>/|-i> (analyzer phase pi/2)";
    throw std::runtime_error("tomography is missing measurement bases:" +
                             missing);
  }
  std::map<BellState, TomographyOutcome> result;
  for (BellState outcome : {BellState::PsiPlus, BellState::PsiMinus}) {
    ProjectionCounts c;
    std::int64_t plus_raw = 0, minus_raw = 0, plus_i_raw = 0, minus_i_raw = 0;
    std::int64_t events = 0;
    for (const auto& ev : events_alpha0) {
      if (ev.bsm != outcome) continue;
      ++events;
      if (ev.central_slot == 0) ++c.n0;
      if (ev.central_slot == 2) ++c.n1;
      if (ev.central_slot == 1) {
        (ev.central_port == 0 ? plus_raw : minus_raw) += 1;
      }
    }
    for (const auto& ev : events_alpha90) {
      if (ev.bsm != outcome) continue;
      ++events;
      if (ev.central_slot == 0) ++c.n0;
      if (ev.central_slot == 2) ++c.n1;
      if (ev.central_slot == 1) {
        (ev.central_port == 0 ? plus_i_raw : minus_i_raw) += 1;
      }
    }
    // Each t1 basis pair is measured in only one of the two analyzer
    // settings; doubling restores the Eq.-style common denominator n0 + n1
    // pooled over both settings.
    c.n_plus = 2 * plus_raw;
    c.n_minus = 2 * minus_raw;
    c.n_plus_i = 2 * plus_i_raw;
    c.n_minus_i = 2 * minus_i_raw;

    TomographyOutcome rec;
    rec.counts = c;
    rec.aim = expected_teleported_state(input, outcome);
    rec.reconstruction = reconstruct_density(c);
    rec.fidelity_value =
        fidelity(DensityMatrix::pure(rec.aim), rec.reconstruction.rho);
    rec.events = events;
    result.emplace(outcome, std::move(rec));
  }
  return result;
}

TomographyAnalysis analyze_tomography_suite(
    const TomographySuiteResult& suite) {
  TomographyAnalysis out;
  double sum_plus = 0.0, sum_minus = 0.0;
  int n_inputs = 0;
  for (std::size_t input = 0; input < suite.settings.size(); ++input) {
    const auto& pair = suite.settings[input];
    const TimeBinQubit state = cardinal_state(static_cast<int>(input));
    auto tomo = teleport_tomography(pair[0].events, pair[1].events, state);
    ++n_inputs;
    for (auto& [outcome, data] : tomo) {
      if (outcome == BellState::PsiPlus) {
        sum_plus += data.fidelity_value;
      } else {
        sum_minus += data.fidelity_value;
      }
      out.min_fidelity = std::min(out.min_fidelity, data.fidelity_value);
      out.total_events += data.events;
      out.rows.push_back({cardinal_state_name(static_cast<int>(input)),
                          outcome, std::move(data)});
    }
  }
  if (n_inputs > 0) {
    out.average_fidelity_psi_plus = sum_plus / n_inputs;
    out.average_fidelity_psi_minus = sum_minus / n_inputs;
  }
  return out;
}

HomScanResult hom_scan(const NodeConfig& cfg,
                       const std::vector<double>& delays_ps,
                       double duration_per_point_s, std::uint64_t seed) {
  if (delays_ps.empty()) {
    throw std::invalid_argument("hom scan needs at least one delay");
  }
  cfg.validate();
  RngStream rng(seed, "analysis.hom");

  HomScanResult out;
  if (cfg.hom_balance_arms) {
    const double m_user = cfg.user_source.mean_pairs *
                          cfg.user_idler_transmittance_total();
    const double m_relay =
        cfg.relay_source.mean_pairs * cfg.relay_idler_transmittance;
    if (m_user > 0.0 && m_relay > 0.0) {
      if (m_user > m_relay) {
        out.user_arm_scale = m_relay / m_user;
      } else if (m_relay > m_user) {
        out.relay_arm_scale = m_user / m_relay;
      }
    }
  }

  const TimeBinQubit early_bin = encoded_qubit(0.0, 0.0);
  const double pulses = duration_per_point_s * kClockRateHz;
  const double sigma_bar = 0.5 * (cfg.user_source.sigma_ps +
                                  cfg.relay_source.sigma_ps);

  auto rate_at = [&](double delay) {
    const KernelSettings ks =
        cfg.kernel_settings(early_bin, cfg.measurement_phase, delay,
                            out.user_arm_scale, out.relay_arm_scale);
    double rate = 0.0;
    for (const auto& [key, p] : evaluate_pulse_kernel(ks)) {
      rate += p * hom_coincidences(key);
    }
    return rate;
  };

  for (double delay : delays_ps) {
    HomPoint point;
    point.delay_ps = delay;
    point.rate_per_pulse = rate_at(delay);
    point.coincidences = rng.poisson(point.rate_per_pulse * pulses);
    out.points.push_back(point);
  }

  // Plateau from the far-detuned points; fall back to exact reference rates
  // when the scan has none.
  double plateau_counts = 0.0;
  int n_plateau = 0;
  for (const auto& p : out.points) {
    if (std::abs(p.delay_ps) > 5.0 * sigma_bar) {
      plateau_counts += static_cast<double>(p.coincidences);
      ++n_plateau;
    }
  }
  if (n_plateau > 0) {
    plateau_counts /= n_plateau;
  } else {
    plateau_counts = 0.5 * (rate_at(8.0 * sigma_bar) +
                            rate_at(-8.0 * sigma_bar)) * pulses;
  }
  if (plateau_counts <= 0.0) {
    throw std::runtime_error("hom scan plateau is zero");
  }

  // Gaussian dip fit: counts ~ P (1 - V exp(-delay^2 / w^2)). For fixed w
  // the model is linear in (P, P*V); scan w and keep the best chi2.
  double best_chi2 = 1e300;
  double best_p = plateau_counts, best_q = 0.0, best_w = 2.0 * sigma_bar;
  for (double w = 0.5 * sigma_bar; w <= 8.0 * sigma_bar;
       w += 0.05 * sigma_bar) {
    double s_ee = 0.0, s_eg = 0.0, s_gg = 0.0, s_ye = 0.0, s_yg = 0.0;
    for (const auto& p : out.points) {
      const double weight =
          1.0 / std::max(static_cast<double>(p.coincidences), 1.0);
      const double g = std::exp(-p.delay_ps * p.delay_ps / (w * w));
      const double y = static_cast<double>(p.coincidences);
      s_ee += weight;
      s_eg += weight * g;
      s_gg += weight * g * g;
      s_ye += weight * y;
      s_yg += weight * y * g;
    }
    const double det = s_ee * s_gg - s_eg * s_eg;
    if (std::abs(det) < 1e-30) continue;
    const double pfit = (s_gg * s_ye - s_eg * s_yg) / det;
    const double qfit = (s_eg * s_ye - s_ee * s_yg) / det;
    double chi2 = 0.0;
    for (const auto& p : out.points) {
      const double weight =
          1.0 / std::max(static_cast<double>(p.coincidences), 1.0);
      const double g = std::exp(-p.delay_ps * p.delay_ps / (w * w));
      const double model = pfit - qfit * g;
      chi2 += weight * (static_cast<double>(p.coincidences) - model) *
              (static_cast<double>(p.coincidences) - model);
    }
    if (chi2 < best_chi2) {
      best_chi2 = chi2;
      best_p = pfit;
      best_q = qfit;
      best_w = w;
    }
  }

  out.plateau = best_p;
  out.visibility = best_p > 0.0 ? std::clamp(best_q / best_p, 0.0, 1.0) : 0.0;
  out.dip_width_ps = best_w;
  for (auto& p : out.points) {
    p.normalized = static_cast<double>(p.coincidences) / best_p;
    out.min_normalized = std::min(out.min_normalized, p.normalized);
  }
  return out;
}

}  // namespace qlink
