#pragma once

#include "cacq/pmf.hpp"

#include <optional>
#include <vector>

namespace cacq {

struct AmcEntry {
  int rate_id = 0;
  double snr_threshold_db = 0.0;
  int packets_per_frame = 0;
};

/// Adaptive modulation and coding table, sorted by threshold.
class AmcTable {
 public:
  AmcTable() = default;
  explicit AmcTable(std::vector<AmcEntry> entries);

  /// Rate ids 0..6 carrying 1..7 packets per 1 ms frame, activated at
  /// -2, 4, 8, 11, 14, 17 and 20 dB. Rate 0 (BPSK 1/2, 80 kbps) moves one
  /// 80-bit packet per frame.
  static AmcTable standard();

  const std::vector<AmcEntry>& entries() const { return entries_; }
  int max_packets() const;

 private:
  std::vector<AmcEntry> entries_;
};

struct ChannelModel {
  int num_subchannels = 5;
  double avg_snr_db = 5.0;
  double fading_m = 1.0;  // Nakagami shape
  AmcTable amc = AmcTable::standard();
  /// When set, every subchannel carries exactly this many packets per frame.
  std::optional<int> fixed_rate;

  void validate() const;
};

/// Total packets the allocated subchannels can carry in one frame.
struct CapacityDistribution {
  Pmf mass;

  int max_packets() const { return static_cast<int>(mass.size()) - 1; }
  double mean() const { return pmf_mean(mass); }
};

/// Packets one subchannel carries per frame: the SNR is Gamma(m, avg/m)
/// distributed and quantized through the AMC thresholds; outage carries 0.
Pmf subchannel_rate_distribution(const ChannelModel& model);

/// Convolution over independent, identically distributed subchannels.
CapacityDistribution capacity_distribution(const ChannelModel& model);

}  // namespace cacq
