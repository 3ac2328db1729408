#pragma once

#include "cacq/arrival_model.hpp"
#include "cacq/channel_model.hpp"
#include "cacq/connection_dynamics.hpp"

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <vector>

namespace cacq {

/// States (phase, queue length, ongoing connections) of the frame chain.
/// Canonical index: (phase * (X+1) + x) * (C'+1) + c, phase counted from 0.
struct StateSpace {
  int num_phases = 1;
  int queue_cap = 0;  // X
  int conn_cap = 0;   // C'

  struct State {
    int phase;
    int queue;
    int conns;
  };

  std::size_t size() const {
    return static_cast<std::size_t>(num_phases) * (queue_cap + 1) * (conn_cap + 1);
  }
  std::size_t index(int phase, int queue, int conns) const {
    return (static_cast<std::size_t>(phase) * (queue_cap + 1) + queue) * (conn_cap + 1) + conns;
  }
  State state(std::size_t idx) const {
    const auto c = static_cast<int>(idx % (conn_cap + 1));
    idx /= (conn_cap + 1);
    const auto x = static_cast<int>(idx % (queue_cap + 1));
    return {static_cast<int>(idx / (queue_cap + 1)), x, c};
  }
};

/// Law of the next queue length from one state, plus the drop ledger that
/// clamping at the buffer would otherwise erase.
struct QueueRow {
  Pmf next;                        // over 0..X
  double expected_overflow = 0.0;  // packets dropped this frame
  double expected_arrivals = 0.0;  // packets offered this frame
};

/// One frame of queue dynamics: l = min(R, x) packets leave from the
/// frame-start backlog, then the frame's arrivals are admitted up to X.
QueueRow queue_transition_row(int queue_len, const Pmf& arrivals, const CapacityDistribution& capacity,
                              int queue_cap);

inline QueueRow queue_transition_row(int queue_len, int phase, const AggregateArrivalDistribution& agg,
                                     const CapacityDistribution& capacity, int queue_cap) {
  return queue_transition_row(queue_len, agg.per_phase.at(phase), capacity, queue_cap);
}

struct ChainInputs {
  FrameCountKernel kernel;  // single connection
  CapacityDistribution capacity;
  ConnectionParams connections;
  CacPolicy policy = CacPolicy::none(1);
  int queue_cap = 0;
};

/// The one-frame kernel in factored form:
///   P((s,x,c) -> (s',x',c')) = Phi(s,s') * Q_x(c,c') * V_{s,c}(x,x').
/// Holds the per-state ledgers (drops, arrivals, blocking) used by the
/// metrics. Immutable after construction.
class StructuredChain {
 public:
  explicit StructuredChain(ChainInputs inputs);

  const StateSpace& space() const { return space_; }
  const ChainInputs& inputs() const { return inputs_; }
  const Matrix& phase_step() const { return phase_step_; }
  const CacPolicy& policy() const { return inputs_.policy; }

  /// Connection-level step at frame-start queue length x (shared across x
  /// unless the policy reads the queue).
  const ConnectionStep& connection(int queue_len) const {
    return connection_steps_[policy().depends_on_queue() ? queue_len : 0];
  }
  bool connection_depends_on_queue() const { return policy().depends_on_queue(); }

  /// Packets arriving from `conns` connections given start phase.
  const Pmf& arrivals(int phase, int conns) const { return arrivals_[slot(phase, conns)]; }
  /// Mean per-connection arrivals in one frame given the start phase.
  double per_connection_mean(int phase) const { return per_connection_mean_[phase]; }

  QueueRow queue_row(int phase, int queue_len, int conns) const;

  /// E[packets dropped this frame | state], canonical order.
  const std::vector<double>& expected_overflow() const { return expected_overflow_; }
  /// E[packets offered this frame | state], canonical order.
  const std::vector<double>& expected_arrivals() const { return expected_arrivals_; }

  /// Dense block for connection level c in local order phase*(X+1)+x:
  /// M_c((s,x),(s',x')) = Phi(s,s') * V_{s,c}(x,x'). Row-stochastic.
  Matrix level_kernel(int conns) const;

  /// Content hash of everything the chain was built from.
  std::uint64_t fingerprint() const { return fingerprint_; }

 private:
  std::size_t slot(int phase, int conns) const {
    return static_cast<std::size_t>(phase) * (space_.conn_cap + 1) + conns;
  }

  ChainInputs inputs_;
  StateSpace space_;
  Matrix phase_step_;
  std::vector<ConnectionStep> connection_steps_;
  std::vector<Pmf> arrivals_;
  std::vector<double> per_connection_mean_;
  std::vector<double> expected_overflow_;
  std::vector<double> expected_arrivals_;
  std::uint64_t fingerprint_ = 0;
};

/// Explicit sparse one-frame matrix, CSR with sorted columns per row.
struct TransitionMatrix {
  std::size_t size = 0;
  std::vector<std::size_t> row_start{0};
  std::vector<std::uint32_t> column;
  std::vector<double> value;
  std::uint64_t chain_fingerprint = 0;

  std::size_t nonzeros() const { return value.size(); }
  double row_sum(std::size_t row) const;
  double at(std::size_t row, std::size_t col) const;
  /// y = x P
  void left_multiply(const std::vector<double>& x, std::vector<double>& y) const;
  /// Dense copy, for small chains only.
  Matrix dense() const;
  static TransitionMatrix from_dense(const Matrix& m);
};

class MemoryBudgetError : public std::runtime_error {
 public:
  MemoryBudgetError(const std::string& what, std::size_t states, std::size_t nonzeros)
      : std::runtime_error(what), states_(states), nonzeros_(nonzeros) {}
  std::size_t states() const { return states_; }
  std::size_t expected_nonzeros() const { return nonzeros_; }

 private:
  std::size_t states_;
  std::size_t nonzeros_;
};

struct AssemblyOptions {
  std::size_t memory_budget_bytes = std::size_t{2} << 30;
};

/// Upper bound on the nonzeros of the explicit matrix.
std::size_t estimate_nonzeros(const StructuredChain& chain);

/// Materializes the full matrix. Throws MemoryBudgetError before allocating
/// when the estimate exceeds the budget.
TransitionMatrix assemble(const StructuredChain& chain, const AssemblyOptions& options = {});

struct ReachabilityReport {
  std::vector<bool> reachable;                   // from state 0 = (phase 1, x 0, c 0)
  std::vector<std::vector<int>> closed_classes;  // recurrent classes of the whole chain
  std::vector<int> transient;                    // states outside every closed class
  std::vector<int> isolated;                     // no transitions to or from other states
  bool irreducible_on_reachable = false;         // reachable set is one communicating class
  bool single_recurrent_class = false;
};

ReachabilityReport reachability_check(const TransitionMatrix& p);

/// Text dump: header "N nnz", then one "row col value" line per entry.
void write_matrix(std::ostream& out, const TransitionMatrix& p);

}  // namespace cacq
