#pragma once

#include "cacq/steady_state.hpp"

#include <optional>
#include <string>

namespace cacq {

/// Stationary QoS measures of one scenario. Packet quantities are per frame,
/// delay is in frames.
struct QosReport {
  std::string policy;
  std::string fingerprint;  // scenario content hash
  double rho = 0.0;         // connection arrival rate, per minute
  std::optional<double> snr_db;

  double p_block = 0.0;
  double n_conn = 0.0;
  double n_queue = 0.0;
  double n_drop = 0.0;
  double lambda_bar = 0.0;
  double p_drop = 0.0;
  double throughput = 0.0;
  std::optional<double> delay;  // empty when nothing is served but the queue is not empty

  // Auxiliary values.
  double p_block_pasta = 0.0;   // state-stationary rejection probability of a single arrival
  double lambda_bar_rate = 0.0; // lambda_BMAP (per frame) * n_conn
  double residual = 0.0;
  std::string solver;
};

struct MetricOptions {
  /// Throughput as lambda_BMAP (one connection's rate) * (1 - p_drop).
  bool single_connection_throughput = false;
};

class LedgerMismatchError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// pi(s, x, c), phase counted from 0.
double marginal(const StationaryDistribution& dist, const StateSpace& space, int phase, int queue, int conns);

/// Rejected over offered connection arrivals per frame. Matches the
/// single-arrival formula as connection arrivals per frame become rare.
double blocking_probability(const StationaryDistribution& dist, const StructuredChain& chain);
/// Sum over states of (1 - acceptance probability at (x, c)) * pi.
double single_arrival_blocking(const StationaryDistribution& dist, const StructuredChain& chain);

double mean_connections(const StationaryDistribution& dist, const StateSpace& space);
double mean_queue_length(const StationaryDistribution& dist, const StateSpace& space);

struct DropMetrics {
  double n_drop = 0.0;
  double lambda_bar = 0.0;
  double p_drop = 0.0;
};

/// Uses the overflow and arrival ledgers of the chain the distribution was
/// solved on; throws LedgerMismatchError otherwise.
DropMetrics drop_metrics(const StationaryDistribution& dist, const StructuredChain& chain);

struct ThroughputDelay {
  double throughput = 0.0;
  std::optional<double> delay;
};

/// phi = lambda_bar (1 - p_drop); D = N_x / phi by Little's law.
ThroughputDelay throughput_and_delay(double n_queue, double lambda_bar, double p_drop);

QosReport compute_report(const StationaryDistribution& dist, const StructuredChain& chain,
                         const MetricOptions& options = {});

/// Fixed column order shared by every CSV writer.
std::string csv_header();
std::string csv_row(const QosReport& report);
std::string text_report(const QosReport& report);
std::string format_number(double v);
std::string format_number(const std::optional<double>& v);

}  // namespace cacq
