#pragma once

#include "cacq/chain_builder.hpp"
#include "cacq/config.hpp"
#include "cacq/metrics.hpp"
#include "cacq/simulator.hpp"
#include "cacq/steady_state.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cacq {

/// Admission rule before it is bound to a queue capacity.
struct PolicySpec {
  enum class Kind { threshold, queue_aware, queue_aware_vector, none };
  Kind kind = Kind::none;
  int value = 0;  // C, B_th or C_tr; 0 = take C_tr from the scenario
  std::vector<double> alpha;
};

/// "threshold:10", "threshold(10)", "queue_aware:100", "none:70", "none".
PolicySpec parse_policy(const std::string& text);
std::string to_string(const PolicySpec& setup);

struct SimSettings {
  std::uint64_t warmup_frames = 20000;
  std::uint64_t measure_frames = 200000;
  int replications = 10;
  std::uint64_t seed = 1;
};

struct Scenario {
  BatchArrivalProcess arrival;
  int max_batch = 1;
  ConnectionParams connections;
  ChannelModel channel;
  PolicySpec policy;
  std::optional<int> c_tr;
  int queue_cap = 0;
  SolverOptions solver;
  MetricOptions metrics;
  std::optional<SimSettings> sim;

  /// Cross-field checks; throws ConfigError or std::invalid_argument.
  void validate() const;
  CacPolicy make_policy() const;
  ChainInputs chain_inputs() const;
  SimConfig sim_config() const;
  /// Hash of everything that defines the stochastic model. Solver and
  /// simulation settings are excluded so analytic and simulated runs match.
  std::string fingerprint() const;
};

/// Builds a scenario from a parsed document; every error carries the line
/// of the offending key.
Scenario scenario_from_config(const ConfigDocument& doc);
Scenario load_scenario(const std::string& path);

/// assemble, solve and compute metrics.
QosReport analyze(const Scenario& scenario);

}  // namespace cacq
