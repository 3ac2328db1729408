#pragma once

#include "cacq/linalg.hpp"
#include "cacq/pmf.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace cacq {

/// Batch Markovian arrival process of a single connection.
///
/// `d0` holds the phase-change rates without arrivals (negative diagonal),
/// `batches[k]` the rates of transitions that emit a batch of k packets.
/// All rates are per minute. Phases are indexed from 0 in code; text output
/// labels them from 1.
struct BatchArrivalProcess {
  Matrix d0;
  std::map<int, Matrix> batches;

  int num_phases() const { return static_cast<int>(d0.rows()); }
  /// Largest batch size with a nonzero matrix, 0 when there is none.
  int max_batch_size() const;

  /// Single phase, batches of `batch` packets at `rate` batches/minute.
  static BatchArrivalProcess poisson(double rate, int batch);
  /// Two-phase modulated batch-Poisson process.
  static BatchArrivalProcess mmpp2(double rate1, double rate2, double switch12,
                                   double switch21, int batch);
};

/// Matrices of inconsistent shape. Kept apart from invariant violations,
/// which are reported rather than thrown.
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct BmapViolation {
  std::string matrix;  // "D0", "D5", "D" (generator)
  int row = -1;
  int col = -1;
  std::string message;
};

struct BmapValidation {
  std::vector<BmapViolation> violations;
  bool ok() const { return violations.empty(); }
  std::string describe() const;
};

BmapValidation validate_bmap(const BatchArrivalProcess& process);

/// D = D0 + sum_k Dk.
Matrix phase_generator(const BatchArrivalProcess& process);

/// Stationary vector of the phase generator. Throws ReducibleChainError.
Vector stationary_phase_distribution(const BatchArrivalProcess& process);

/// Mean packet rate (packets/minute).
double mean_arrival_rate(const BatchArrivalProcess& process);

/// Per-frame joint law of (packet count, end phase) given the start phase.
/// blocks[a](s, s') = Pr(a packets and end phase s' | start phase s); the
/// last block collects every count >= max_batch.
struct FrameCountKernel {
  double frame_length = 0.0;  // minutes
  int max_batch = 0;
  std::vector<Matrix> blocks;

  int num_phases() const { return blocks.empty() ? 0 : static_cast<int>(blocks[0].rows()); }
  /// Sum over counts: one-frame phase transition matrix.
  Matrix phase_step() const;
  /// Pr(a packets | start phase), a = 0..max_batch.
  Pmf marginal(int phase) const;
};

struct UniformizationOptions {
  double tail_tolerance = 1e-16;
  int max_steps = 200000;
};

class UniformizationError : public std::runtime_error {
 public:
  UniformizationError(const std::string& what, double tail)
      : std::runtime_error(what), tail_(tail) {}
  double achieved_tail() const { return tail_; }

 private:
  double tail_;
};

/// Counting process of the BMAP over one frame, by uniformization of the
/// marked chain at rate max_s |D0(s,s)|.
FrameCountKernel frame_count_kernel(const BatchArrivalProcess& process, double frame_length,
                                    int max_batch, const UniformizationOptions& options = {});

/// Total packets from `connections` connections sharing one modulating phase.
/// Each connection's count is drawn independently given the frame's start
/// phase; the phase then advances by `phase_step`.
struct AggregateArrivalDistribution {
  std::vector<Pmf> per_phase;  // mass over 0..connections*max_batch
  Matrix phase_step;
};

AggregateArrivalDistribution aggregate_count_distribution(const FrameCountKernel& kernel,
                                                          int connections);

}  // namespace cacq
