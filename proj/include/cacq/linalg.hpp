#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cacq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Adjacency lists of a directed graph on nodes 0..n-1.
using Digraph = std::vector<std::vector<int>>;

/// Strongly connected components (Tarjan, iterative). Components come out in
/// reverse topological order; nodes inside each component are sorted.
std::vector<std::vector<int>> strongly_connected_components(const Digraph& graph);

/// Components with no edge leaving them. For a Markov chain these are the
/// recurrent classes.
std::vector<std::vector<int>> closed_classes(const Digraph& graph);

/// Nodes reachable from `start` (inclusive).
std::vector<bool> reachable_from(const Digraph& graph, int start);

/// Off-diagonal nonzero pattern of a dense matrix.
Digraph support_graph(const Matrix& m);

/// Raised when a chain expected to have a single recurrent class does not.
class ReducibleChainError : public std::runtime_error {
 public:
  ReducibleChainError(std::string what, std::vector<std::vector<int>> classes)
      : std::runtime_error(std::move(what)), classes_(std::move(classes)) {}
  const std::vector<std::vector<int>>& classes() const { return classes_; }

 private:
  std::vector<std::vector<int>> classes_;
};

std::string format_class(const std::vector<int>& members, std::size_t max_shown = 8);

/// Stationary vector of a chain given either a stochastic matrix or a
/// generator; only off-diagonal entries are read. Uses GTH state reduction,
/// which never subtracts, on the unique closed class. Transient states get 0.
/// Throws ReducibleChainError when more than one closed class exists.
Vector gth_stationary(const Matrix& m);

/// 64-bit FNV-1a, used for content fingerprints.
class Fingerprint {
 public:
  void add_bytes(const void* data, std::size_t size);
  void add(double value) { add_bytes(&value, sizeof value); }
  void add(std::int64_t value) { add_bytes(&value, sizeof value); }
  void add(std::string_view text);
  void add(std::span<const double> values);
  void add(const Matrix& m);
  std::uint64_t value() const { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 14695981039346656037ULL;
};

}  // namespace cacq
