#include "cacq/channel_model.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <stdexcept>
#include <string>

namespace cacq {

AmcTable::AmcTable(std::vector<AmcEntry> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw std::invalid_argument("AMC table is empty");
  if (entries_.front().rate_id != 0)
    throw std::invalid_argument("AMC table must start with rate id 0");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.packets_per_frame < 0)
      throw std::invalid_argument("AMC rate id " + std::to_string(e.rate_id) +
                                  ": packets per frame must be >= 0");
    if (!std::isfinite(e.snr_threshold_db))
      throw std::invalid_argument("AMC rate id " + std::to_string(e.rate_id) +
                                  ": threshold must be finite");
    if (i == 0) continue;
    const auto& prev = entries_[i - 1];
    if (e.rate_id <= prev.rate_id)
      throw std::invalid_argument("AMC rate ids must be increasing");
    if (!(e.snr_threshold_db > prev.snr_threshold_db))
      throw std::invalid_argument("AMC thresholds must be strictly increasing (rate id " +
                                  std::to_string(e.rate_id) + ")");
    if (e.packets_per_frame < prev.packets_per_frame)
      throw std::invalid_argument("AMC packets per frame must be nondecreasing (rate id " +
                                  std::to_string(e.rate_id) + ")");
  }
}

AmcTable AmcTable::standard() {
  return AmcTable({{0, -2.0, 1},
                   {1, 4.0, 2},
                   {2, 8.0, 3},
                   {3, 11.0, 4},
                   {4, 14.0, 5},
                   {5, 17.0, 6},
                   {6, 20.0, 7}});
}

int AmcTable::max_packets() const {
  return entries_.empty() ? 0 : entries_.back().packets_per_frame;
}

void ChannelModel::validate() const {
  if (num_subchannels < 1) throw std::invalid_argument("at least one subchannel is required");
  if (fixed_rate) {
    if (*fixed_rate < 0) throw std::invalid_argument("deterministic rate must be >= 0");
    return;
  }
  if (!std::isfinite(avg_snr_db)) throw std::invalid_argument("average SNR must be finite");
  if (!(fading_m >= 0.5)) throw std::invalid_argument("Nakagami m must be >= 0.5");
  if (amc.entries().empty()) throw std::invalid_argument("AMC table is empty");
}

Pmf subchannel_rate_distribution(const ChannelModel& model) {
  model.validate();
  if (model.fixed_rate) {
    Pmf p(static_cast<std::size_t>(*model.fixed_rate) + 1, 0.0);
    p.back() = 1.0;
    return p;
  }
  const auto& entries = model.amc.entries();
  const double mean_snr = std::pow(10.0, model.avg_snr_db / 10.0);
  const double m = model.fading_m;
  // Pr(SNR >= threshold) for a Gamma(m, mean/m) variate.
  auto exceed = [&](double threshold_db) {
    const double z = m * std::pow(10.0, threshold_db / 10.0) / mean_snr;
    return boost::math::gamma_q(m, z);
  };

  Pmf p(static_cast<std::size_t>(model.amc.max_packets()) + 1, 0.0);
  std::vector<double> above(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) above[i] = exceed(entries[i].snr_threshold_db);
  p[0] += 1.0 - above[0];
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const double next = i + 1 < entries.size() ? above[i + 1] : 0.0;
    p[entries[i].packets_per_frame] += above[i] - next;
  }
  return p;
}

CapacityDistribution capacity_distribution(const ChannelModel& model) {
  const Pmf single = subchannel_rate_distribution(model);
  Pmf total{1.0};
  for (int k = 0; k < model.num_subchannels; ++k) total = convolve(total, single);
  return CapacityDistribution{std::move(total)};
}

}  // namespace cacq
