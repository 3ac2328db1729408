#pragma once

#include "cacq/chain_builder.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cacq {

struct StationaryDistribution {
  std::vector<double> pi;     // canonical state order
  double residual = 0.0;      // || pi P - pi ||_inf
  std::size_t iterations = 0; // 0 for the direct solver
  std::string method;
  std::uint64_t chain_fingerprint = 0;
};

class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(const std::string& what, double residual, std::size_t iterations)
      : std::runtime_error(what), residual_(residual), iterations_(iterations) {}
  double last_residual() const { return residual_; }
  std::size_t iterations() const { return iterations_; }

 private:
  double residual_;
  std::size_t iterations_;
};

/// || pi P - pi ||_inf
double stationary_residual(const TransitionMatrix& p, const std::vector<double>& pi);

struct DirectOptions {
  std::size_t max_states = 5000;
};

/// Dense GTH elimination on the unique recurrent class. Throws
/// ReducibleChainError naming two classes when there is more than one.
StationaryDistribution solve_direct(const TransitionMatrix& p, const DirectOptions& options = {});

struct IterativeOptions {
  double tolerance = 1e-10;  // on || pi_{t+1} - pi_t ||_1
  std::size_t max_iterations = 1000000;
  std::size_t check_every = 16;
  /// Windows of this length without progress switch on damping pi <- pi (I + P) / 2.
  std::size_t stall_window = 512;
  /// Start vector; default is uniform over the states reachable from state 0.
  std::optional<std::vector<double>> start;
};

/// Power iteration with periodic renormalization.
StationaryDistribution solve_iterative(const TransitionMatrix& p, const IterativeOptions& options = {});

struct AggregationOptions {
  double tolerance = 1e-10;  // on || pi P - pi ||_inf
  std::size_t max_iterations = 500;
  std::size_t memory_budget_bytes = std::size_t{3} << 30;
};

/// Iterative aggregation/disaggregation over connection levels with exact
/// block Gauss-Seidel smoothing, on the factored chain. Levels are coupled
/// weakly when connection events are rare next to queue dynamics, and then
/// converges in a handful of sweeps where power iteration would need millions.
StationaryDistribution solve_aggregated(const StructuredChain& chain,
                                        const AggregationOptions& options = {});

enum class SolverMethod { automatic, direct, iterative, aggregated };

SolverMethod parse_solver_method(const std::string& name);
std::string to_string(SolverMethod method);

struct SolverOptions {
  SolverMethod method = SolverMethod::automatic;
  double tolerance = 1e-10;
  std::size_t max_iterations = 1000000;
  std::size_t direct_max_states = 5000;
  std::size_t memory_budget_bytes = std::size_t{3} << 30;
};

/// Dispatch. `automatic` picks the aggregation solver, which handles every
/// scale; the explicit matrix is only materialized for direct/iterative.
StationaryDistribution solve(const StructuredChain& chain, const SolverOptions& options = {});

/// "idx value" per line.
void write_distribution(std::ostream& out, const StationaryDistribution& dist);

}  // namespace cacq
