#pragma once

#include "cacq/linalg.hpp"
#include "cacq/pmf.hpp"

#include <string>
#include <variant>
#include <vector>

namespace cacq {

/// Connection-level parameters; times in minutes.
struct ConnectionParams {
  double arrival_rate = 0.0;   // connections per minute
  double mean_duration = 1.0;  // minutes
  double frame_length = 1.0 / 60000.0;
  /// Connection arrivals per frame are capped here; the Poisson tail folds in.
  int max_arrivals_per_frame = 3;

  void validate() const;
  double departure_probability() const;
};

/// Admit while ongoing connections stay below `limit`.
struct ThresholdCac {
  int limit = 1;
};
/// Admit with probability alpha[x], x the queue length, up to `cap` connections.
struct QueueAwareCac {
  std::vector<double> alpha;
  int cap = 1;
};
/// No admission control; the chain is truncated at `cap` connections.
struct NoCac {
  int cap = 1;
};

class CacPolicy {
 public:
  using Rule = std::variant<ThresholdCac, QueueAwareCac, NoCac>;

  static CacPolicy threshold(int limit);
  /// Step acceptance vector: 1 below `queue_threshold`, 0 from there up to `queue_cap`.
  static CacPolicy queue_aware(int queue_threshold, int queue_cap, int connection_cap);
  static CacPolicy queue_aware(std::vector<double> alpha, int connection_cap);
  static CacPolicy none(int connection_cap);

  const Rule& rule() const { return rule_; }
  /// Largest reachable connection count (C or C_tr).
  int connection_cap() const;
  bool depends_on_queue() const { return std::holds_alternative<QueueAwareCac>(rule_); }
  /// Short label such as "threshold(10)"; queue-aware step policies print their cutoff.
  std::string label() const;
  void validate() const;

 private:
  explicit CacPolicy(Rule rule, std::string label) : rule_(std::move(rule)), label_(std::move(label)) {}
  Rule rule_;
  std::string label_;
};

/// Probability of `count` events of a Poisson process with `rate` over `horizon`.
double poisson_frame_probability(double rate, double horizon, int count);

/// Poisson(mean) restricted to 0..cap with the tail mass folded into cap.
Pmf capped_poisson(double mean, int cap);

/// Binomial(ongoing, q) number of departures over one frame.
Pmf departure_distribution(int ongoing, const ConnectionParams& params);

double acceptance_probability(const CacPolicy& policy, int queue_len, int ongoing);

/// One frame of connection dynamics at a fixed queue length.
struct ConnectionStep {
  Matrix transition;                    // (cap+1) x (cap+1)
  std::vector<double> expected_blocked; // per starting count
  double expected_offered = 0.0;        // connection arrivals per frame
};

ConnectionStep connection_step(const CacPolicy& policy, int queue_len, const ConnectionParams& params);

inline Matrix connection_transition_matrix(const CacPolicy& policy, int queue_len,
                                           const ConnectionParams& params) {
  return connection_step(policy, queue_len, params).transition;
}

}  // namespace cacq
