#pragma once

#include "cacq/chain_builder.hpp"
#include "cacq/metrics.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cacq {

struct SimConfig {
  ChainInputs model;
  std::uint64_t warmup_frames = 20000;
  std::uint64_t measure_frames = 200000;
  int replications = 10;
  std::uint64_t base_seed = 1;
  std::string fingerprint;  // scenario hash, copied into the estimate

  void validate() const;
};

/// Raw counts of one replication over its measurement window.
struct ReplicationCounts {
  std::uint64_t seed = 0;
  std::uint64_t frames = 0;
  std::uint64_t offered = 0;
  std::uint64_t accepted = 0;
  std::uint64_t blocked = 0;
  std::uint64_t departed = 0;
  std::uint64_t arrived = 0;
  std::uint64_t dropped = 0;
  std::uint64_t served = 0;
  std::uint64_t queue_area = 0;  // sum of frame-start queue lengths
  std::uint64_t conn_area = 0;   // sum of frame-start connection counts
  std::uint64_t sojourn = 0;     // total frames spent by served packets
  std::int64_t queue_start = 0, queue_end = 0;
  std::int64_t conns_start = 0, conns_end = 0;
};

struct MetricEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  double ci_half_width = 0.0;  // 1.96 * stderr
  int samples = 0;             // replications where the metric is defined
  bool defined() const { return samples > 0; }
};

/// Metrics gated by `compare`, in output order.
inline constexpr std::array<const char*, 7> kComparedMetrics = {
    "p_block", "n_conn", "n_queue", "p_drop", "throughput", "delay", "lambda_bar"};

struct QosEstimate {
  std::string fingerprint;
  std::string policy;
  MetricEstimate p_block, n_conn, n_queue, n_drop, p_drop, throughput, delay, lambda_bar;
  std::vector<ReplicationCounts> replications;

  const MetricEstimate& metric(const std::string& name) const;
};

/// One replication. Deterministic in `seed`.
ReplicationCounts simulate_replication(const SimConfig& config, std::uint64_t seed);

/// Seed of replication i, derived from the base seed by splitmix64.
std::uint64_t replication_seed(std::uint64_t base_seed, int index);

/// Replications run in parallel; the reduction is in replication order.
QosEstimate simulate(const SimConfig& config);

QosEstimate estimate_from_counts(std::vector<ReplicationCounts> counts);

class FingerprintMismatchError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ComparisonRow {
  std::string metric;
  std::optional<double> analytic;
  double sim_mean = 0.0;
  double sim_stderr = 0.0;
  double z = 0.0;
  bool pass = false;
};

struct Comparison {
  std::vector<ComparisonRow> rows;
  double threshold = 3.0;
  bool all_pass() const;
};

/// z = (analytic - sim mean) / stderr per metric, pass iff |z| <= threshold.
/// A zero standard error passes only on agreement to 1e-12.
Comparison compare(const QosReport& report, const QosEstimate& estimate, double threshold = 3.0);

std::string format_comparison(const Comparison& comparison);
void write_replication_csv(std::ostream& out, const QosEstimate& estimate);

}  // namespace cacq
