#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qlink/photonics.hpp"
#include "qlink/rng.hpp"

namespace qlink {

/// Detector channel ids used across the link.
enum class Channel : std::uint16_t {
  Herald = 0,   ///< heralding signal at the relay (T_Herald)
  C1 = 1,
  C2 = 2,
  C3 = 3,
  C4 = 4,
  B1 = 5,
  B2 = 6,
  Local = 7,    ///< relay C7 reference (T_Local)
  Sync = 8,     ///< relay -> central synchronization
};

std::string to_string(Channel c);

struct DetectorSpec {
  double efficiency = 0.9;
  double dark_rate_hz = 100.0;
  double jitter_sigma_ps = 30.0;
  double dead_time_ns = 40.0;

  void validate() const;
  double dead_time_ps() const { return dead_time_ns * 1000.0; }
};

struct TimeTag {
  Channel channel;
  std::int64_t time_ps;

  bool operator<(const TimeTag& o) const {
    if (time_ps != o.time_ps) return time_ps < o.time_ps;
    return channel < o.channel;
  }
  bool operator==(const TimeTag& o) const {
    return channel == o.channel && time_ps == o.time_ps;
  }
};

using TagStream = std::vector<TimeTag>;

/// One-shot detector response: click with probability `efficiency` (if the
/// photon is alive), Gaussian jitter on the time. Dead time and dark counts
/// need channel state; see SnspdChannel.
std::optional<TimeTag> detect(const PhotonRecord& photon,
                              const DetectorSpec& spec, Channel channel,
                              std::int64_t arrival_ps, RngStream& rng);

/// Stateful detector channel: enforces dead time across clicks and
/// generates dark-count tags.
class SnspdChannel {
 public:
  SnspdChannel(Channel channel, DetectorSpec spec);

  /// Feeds an arrival; returns the tag if the detector fired. Arrivals must
  /// be fed in non-decreasing time order.
  std::optional<TimeTag> observe(double arrival_ps, bool alive,
                                 RngStream& rng);

  /// Poisson dark counts over [t0, t1), merged dead-time handling is up to
  /// the caller via merge + enforce_dead_time.
  TagStream dark_tags(std::int64_t t0_ps, std::int64_t t1_ps, RngStream& rng);

  Channel channel() const { return channel_; }
  const DetectorSpec& spec() const { return spec_; }

 private:
  Channel channel_;
  DetectorSpec spec_;
  double last_click_ps_;
};

/// Drops tags closer than the dead time to the previous surviving tag on
/// the same channel. Input must be sorted.
TagStream enforce_dead_time(const TagStream& tags, double dead_time_ps);

/// Time-ordered union of two sorted streams; ties keep channel order.
TagStream merge_channels(const TagStream& a, const TagStream& b);

/// Nearest of the three 400 ps bins relative to the frame reference;
/// rejected when outside gate_width/2 of a bin center or equidistant.
std::optional<int> classify_bin(const TimeTag& tag, std::int64_t frame_ref_ps,
                                double bin_separation_ps = 400.0,
                                double gate_width_ps = 200.0);

struct CoincidenceEvent {
  enum class Kind { Twofold, Threefold, Fourfold };
  std::vector<TimeTag> tags;
  Kind kind() const;
};

/// Channel groups a coincidence must cover: `count` tags drawn from
/// `channels`, at most one per channel.
struct CoincidencePattern {
  struct Group {
    std::set<Channel> channels;
    int count = 1;
  };
  std::vector<Group> groups;

  int total_count() const;
  static CoincidencePattern exact_channels(const std::set<Channel>& channels);
};

/// Greedy earliest-first coincidence search over sorted streams. Per-channel
/// static delays are subtracted before windowing; each tag is used at most
/// once; ties resolve by channel id.
std::vector<CoincidenceEvent> find_coincidences(
    const std::vector<TagStream>& streams, double window_ps,
    const CoincidencePattern& pattern,
    const std::map<Channel, std::int64_t>& channel_offsets_ps = {});

/// Applies the Bell-state rules to the relay-port tags of an event.
/// Requires bin classification against the 10 ns pulse frame.
BsmOutcome classify_bsm(const CoincidenceEvent& event,
                        std::int64_t frame_ref_ps,
                        double bin_separation_ps = 400.0,
                        double gate_width_ps = 200.0,
                        bool resolve_same_port_bins = false);

/// CSV (`channel,time_ps`) and fixed-width little-endian binary
/// (u16 channel, i64 time_ps) tag archives.
void write_tags_csv(std::ostream& out, const TagStream& tags);
TagStream read_tags_csv(std::istream& in);
void write_tags_binary(std::ostream& out, const TagStream& tags);
TagStream read_tags_binary(std::istream& in);

}  // namespace qlink
