#include "qlink/detection.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace qlink {

std::string to_string(Channel c) {
  switch (c) {
    case Channel::Herald: return "herald";
    case Channel::C1: return "C1";
    case Channel::C2: return "C2";
    case Channel::C3: return "C3";
    case Channel::C4: return "C4";
    case Channel::B1: return "B1";
    case Channel::B2: return "B2";
    case Channel::Local: return "local";
    case Channel::Sync: return "sync";
  }
  return "ch" + std::to_string(static_cast<int>(c));
}

void DetectorSpec::validate() const {
  if (efficiency < 0.0 || efficiency > 1.0) {
    throw std::invalid_argument("detector efficiency must be in [0, 1]");
  }
  if (dark_rate_hz < 0.0 || jitter_sigma_ps < 0.0 || dead_time_ns < 0.0) {
    throw std::invalid_argument("detector rates and times must be >= 0");
  }
}

std::optional<TimeTag> detect(const PhotonRecord& photon,
                              const DetectorSpec& spec, Channel channel,
                              std::int64_t arrival_ps, RngStream& rng) {
  spec.validate();
  if (!photon.alive) return std::nullopt;
  if (!rng.bernoulli(spec.efficiency)) return std::nullopt;
  const double t = static_cast<double>(arrival_ps) +
                   rng.gauss(0.0, spec.jitter_sigma_ps);
  return TimeTag{channel, static_cast<std::int64_t>(std::llround(t))};
}

SnspdChannel::SnspdChannel(Channel channel, DetectorSpec spec)
    : channel_(channel), spec_(spec),
      last_click_ps_(-1e30) {
  spec_.validate();
}

std::optional<TimeTag> SnspdChannel::observe(double arrival_ps, bool alive,
                                             RngStream& rng) {
  if (!alive) return std::nullopt;
  if (arrival_ps - last_click_ps_ < spec_.dead_time_ps()) return std::nullopt;
  if (!rng.bernoulli(spec_.efficiency)) return std::nullopt;
  const double t = arrival_ps + rng.gauss(0.0, spec_.jitter_sigma_ps);
  last_click_ps_ = arrival_ps;
  return TimeTag{channel_, static_cast<std::int64_t>(std::llround(t))};
}

TagStream SnspdChannel::dark_tags(std::int64_t t0_ps, std::int64_t t1_ps,
                                  RngStream& rng) {
  if (t1_ps <= t0_ps) return {};
  const double span_s = static_cast<double>(t1_ps - t0_ps) * 1e-12;
  const std::int64_t n = rng.poisson(spec_.dark_rate_hz * span_s);
  TagStream tags;
  tags.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const double t = rng.uniform(static_cast<double>(t0_ps),
                                 static_cast<double>(t1_ps));
    tags.push_back({channel_, static_cast<std::int64_t>(std::llround(t))});
  }
  std::sort(tags.begin(), tags.end());
  return tags;
}

TagStream enforce_dead_time(const TagStream& tags, double dead_time_ps) {
  TagStream out;
  out.reserve(tags.size());
  std::map<Channel, std::int64_t> last;
  for (const TimeTag& tag : tags) {
    auto it = last.find(tag.channel);
    if (it != last.end() &&
        static_cast<double>(tag.time_ps - it->second) < dead_time_ps) {
      continue;
    }
    last[tag.channel] = tag.time_ps;
    out.push_back(tag);
  }
  return out;
}

TagStream merge_channels(const TagStream& a, const TagStream& b) {
  if (!std::is_sorted(a.begin(), a.end()) ||
      !std::is_sorted(b.begin(), b.end())) {
    throw std::invalid_argument("merge_channels requires sorted inputs");
  }
  TagStream out;
  out.resize(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), out.begin());
  return out;
}

std::optional<int> classify_bin(const TimeTag& tag, std::int64_t frame_ref_ps,
                                double bin_separation_ps,
                                double gate_width_ps) {
  const double rel = static_cast<double>(tag.time_ps - frame_ref_ps);
  int best_bin = -1;
  double best_dist = 1e300;
  bool tie = false;
  for (int bin = 0; bin < 3; ++bin) {
    const double d = std::abs(rel - bin * bin_separation_ps);
    if (d < best_dist - 1e-9) {
      best_dist = d;
      best_bin = bin;
      tie = false;
    } else if (std::abs(d - best_dist) <= 1e-9) {
      tie = true;
    }
  }
  if (tie || best_dist > gate_width_ps / 2.0) return std::nullopt;
  return best_bin;
}

CoincidenceEvent::Kind CoincidenceEvent::kind() const {
  switch (tags.size()) {
    case 2: return Kind::Twofold;
    case 3: return Kind::Threefold;
    case 4: return Kind::Fourfold;
    default:
      throw std::domain_error("coincidence events carry 2 to 4 tags");
  }
}

int CoincidencePattern::total_count() const {
  int n = 0;
  for (const auto& g : groups) n += g.count;
  return n;
}

CoincidencePattern CoincidencePattern::exact_channels(
    const std::set<Channel>& channels) {
  CoincidencePattern p;
  for (Channel c : channels) p.groups.push_back({{c}, 1});
  return p;
}

std::vector<CoincidenceEvent> find_coincidences(
    const std::vector<TagStream>& streams, double window_ps,
    const CoincidencePattern& pattern,
    const std::map<Channel, std::int64_t>& channel_offsets_ps) {
  for (const auto& s : streams) {
    if (!std::is_sorted(s.begin(), s.end())) {
      throw std::invalid_argument("find_coincidences requires sorted streams");
    }
  }
  // Channels may appear in at most one group.
  {
    std::set<Channel> seen;
    for (const auto& g : pattern.groups) {
      if (g.count < 1 ||
          g.count > static_cast<int>(g.channels.size())) {
        throw std::invalid_argument("invalid coincidence pattern group");
      }
      for (Channel c : g.channels) {
        if (!seen.insert(c).second) {
          throw std::invalid_argument("channel repeated across pattern groups");
        }
      }
    }
  }

  // Flatten with static per-channel delay calibration applied.
  TagStream all;
  for (const auto& s : streams) {
    for (TimeTag t : s) {
      auto it = channel_offsets_ps.find(t.channel);
      if (it != channel_offsets_ps.end()) t.time_ps -= it->second;
      all.push_back(t);
    }
  }
  std::sort(all.begin(), all.end());

  auto group_of = [&](Channel c) -> int {
    for (std::size_t g = 0; g < pattern.groups.size(); ++g) {
      if (pattern.groups[g].channels.count(c)) return static_cast<int>(g);
    }
    return -1;
  };

  std::vector<bool> used(all.size(), false);
  std::vector<CoincidenceEvent> events;
  const int need_total = pattern.total_count();

  for (std::size_t i = 0; i < all.size(); ++i) {
    if (used[i]) continue;
    const int anchor_group = group_of(all[i].channel);
    if (anchor_group < 0) continue;

    std::vector<int> need(pattern.groups.size());
    for (std::size_t g = 0; g < pattern.groups.size(); ++g) {
      need[g] = pattern.groups[g].count;
    }
    std::set<Channel> taken;
    std::vector<std::size_t> chosen;

    auto try_take = [&](std::size_t idx) {
      const Channel c = all[idx].channel;
      const int g = group_of(c);
      if (g < 0 || need[static_cast<std::size_t>(g)] == 0) return;
      if (taken.count(c)) return;
      --need[static_cast<std::size_t>(g)];
      taken.insert(c);
      chosen.push_back(idx);
    };

    try_take(i);
    const std::int64_t limit =
        all[i].time_ps + static_cast<std::int64_t>(std::floor(window_ps));
    for (std::size_t j = i + 1;
         j < all.size() && all[j].time_ps <= limit &&
         static_cast<int>(chosen.size()) < need_total;
         ++j) {
      if (!used[j]) try_take(j);
    }

    if (static_cast<int>(chosen.size()) == need_total) {
      CoincidenceEvent ev;
      for (std::size_t idx : chosen) {
        used[idx] = true;
        ev.tags.push_back(all[idx]);
      }
      std::sort(ev.tags.begin(), ev.tags.end());
      events.push_back(std::move(ev));
    }
  }
  return events;
}

BsmOutcome classify_bsm(const CoincidenceEvent& event,
                        std::int64_t frame_ref_ps, double bin_separation_ps,
                        double gate_width_ps, bool resolve_same_port_bins) {
  std::vector<std::pair<int, int>> clicks;
  for (const TimeTag& tag : event.tags) {
    const int port = static_cast<int>(tag.channel);
    if (port < static_cast<int>(Channel::C1) ||
        port > static_cast<int>(Channel::C4)) {
      continue;
    }
    const auto bin =
        classify_bin(tag, frame_ref_ps, bin_separation_ps, gate_width_ps);
    if (!bin || *bin > 1) return BsmOutcome::None;
    clicks.emplace_back(port, *bin);
  }
  if (clicks.size() != 2) return BsmOutcome::None;
  std::sort(clicks.begin(), clicks.end());
  return classify_bsm_clicks(clicks, resolve_same_port_bins);
}

void write_tags_csv(std::ostream& out, const TagStream& tags) {
  out << "channel,time_ps\n";
  for (const TimeTag& t : tags) {
    out << static_cast<int>(t.channel) << ',' << t.time_ps << '\n';
  }
}

TagStream read_tags_csv(std::istream& in) {
  TagStream tags;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "channel,time_ps") {
        throw std::runtime_error("expected tag CSV header 'channel,time_ps'");
      }
      header_seen = true;
      continue;
    }
    std::istringstream ss(line);
    int channel;
    char comma;
    std::int64_t time_ps;
    if (!(ss >> channel >> comma >> time_ps) || comma != ',') {
      throw std::runtime_error("malformed tag CSV row: " + line);
    }
    tags.push_back({static_cast<Channel>(channel), time_ps});
  }
  return tags;
}

void write_tags_binary(std::ostream& out, const TagStream& tags) {
  for (const TimeTag& t : tags) {
    std::array<unsigned char, 10> rec;
    const auto ch = static_cast<std::uint16_t>(t.channel);
    rec[0] = static_cast<unsigned char>(ch & 0xff);
    rec[1] = static_cast<unsigned char>((ch >> 8) & 0xff);
    auto time = static_cast<std::uint64_t>(t.time_ps);
    for (int i = 0; i < 8; ++i) {
      rec[static_cast<std::size_t>(2 + i)] =
          static_cast<unsigned char>((time >> (8 * i)) & 0xff);
    }
    out.write(reinterpret_cast<const char*>(rec.data()),
              static_cast<std::streamsize>(rec.size()));
  }
}

TagStream read_tags_binary(std::istream& in) {
  TagStream tags;
  std::array<unsigned char, 10> rec;
  while (in.read(reinterpret_cast<char*>(rec.data()),
                 static_cast<std::streamsize>(rec.size()))) {
    const auto ch = static_cast<std::uint16_t>(rec[0] | (rec[1] << 8));
    std::uint64_t time = 0;
    for (int i = 0; i < 8; ++i) {
      time |= static_cast<std::uint64_t>(rec[static_cast<std::size_t>(2 + i)])
              << (8 * i);
    }
    tags.push_back(
        {static_cast<Channel>(ch), static_cast<std::int64_t>(time)});
  }
  if (in.gcount() != 0) {
    throw std::runtime_error("truncated binary tag record");
  }
  return tags;
}

}  // namespace qlink
