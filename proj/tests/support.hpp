#pragma once

// Shared builders and independent oracles for the unit and acceptance tests.
// Nothing here calls the assembly, convolution or solver code under test.

#include "cacq/chain_builder.hpp"
#include "cacq/steady_state.hpp"

#include <Eigen/LU>

#include <cmath>
#include <functional>
#include <vector>

namespace cacq::testing {

struct TinySpec {
  BatchArrivalProcess process = BatchArrivalProcess::poisson(6000, 1);
  int max_batch = 1;
  int queue_cap = 3;
  CacPolicy policy = CacPolicy::threshold(1);
  double rho = 3000;            // per minute
  double mean_duration = 0.01;  // minutes
  int max_conn_arrivals = 3;
  std::vector<double> capacity{0.0, 1.0};  // deterministic R = 1
};

inline ChainInputs make_inputs(const TinySpec& t) {
  ChainInputs in;
  in.kernel = frame_count_kernel(t.process, 1.0 / 60000.0, t.max_batch);
  in.capacity.mass = t.capacity;
  in.connections.arrival_rate = t.rho;
  in.connections.mean_duration = t.mean_duration;
  in.connections.frame_length = 1.0 / 60000.0;
  in.connections.max_arrivals_per_frame = t.max_conn_arrivals;
  in.policy = t.policy;
  in.queue_cap = t.queue_cap;
  return in;
}

inline double binomial_pmf(int n, int k, double p) {
  double coeff = 1.0;
  for (int i = 0; i < k; ++i) coeff = coeff * (n - i) / (i + 1);
  return coeff * std::pow(p, k) * std::pow(1.0 - p, n - k);
}

inline double poisson_pmf(double mean, int n) {
  double v = std::exp(-mean);
  for (int i = 1; i <= n; ++i) v *= mean / i;
  return v;
}

struct BruteForce {
  Matrix p;
  std::vector<double> overflow;
  std::vector<double> arrivals;
};

/// Full one-frame kernel by exhaustive enumeration of primitive outcomes:
/// each connection's own packet count, the capacity draw, the number of
/// connection arrivals, every accept/reject sequence, departures and the
/// next phase. Exponential in the connection count; for tiny chains only.
inline BruteForce brute_force_kernel(const ChainInputs& in) {
  const int S = in.kernel.num_phases();
  const int A = in.kernel.max_batch;
  const int X = in.queue_cap;
  const int C = in.policy.connection_cap();
  const int Ma = in.connections.max_arrivals_per_frame;
  const double q = -std::expm1(-in.connections.frame_length / in.connections.mean_duration);
  const double conn_mean = in.connections.arrival_rate * in.connections.frame_length;
  StateSpace sp{S, X, C};

  Matrix phi = Matrix::Zero(S, S);
  for (const auto& b : in.kernel.blocks) phi += b;
  std::vector<std::vector<double>> single(S, std::vector<double>(A + 1, 0.0));
  for (int s = 0; s < S; ++s)
    for (int a = 0; a <= A; ++a) single[s][a] = in.kernel.blocks[a].row(s).sum();

  std::vector<double> n_conn(Ma + 1);
  double head = 0.0;
  for (int n = 0; n < Ma; ++n) head += n_conn[n] = poisson_pmf(conn_mean, n);
  n_conn[Ma] = 1.0 - head;

  BruteForce out;
  out.p = Matrix::Zero(sp.size(), sp.size());
  out.overflow.assign(sp.size(), 0.0);
  out.arrivals.assign(sp.size(), 0.0);

  for (int s = 0; s < S; ++s)
    for (int x = 0; x <= X; ++x)
      for (int c = 0; c <= C; ++c) {
        const std::size_t row = sp.index(s, x, c);
        // Per-connection counts, enumerated as tuples.
        std::function<void(int, double, int)> each_tuple = [&](int i, double pr, int total) {
          if (i == c) {
            out.arrivals[row] += pr * total;
            for (std::size_t r = 0; r < in.capacity.mass.size(); ++r) {
              const double pr_r = in.capacity.mass[r];
              if (pr_r == 0.0) continue;
              const int served = std::min<int>(static_cast<int>(r), x);
              const int raw = x - served + total;
              const int next_x = std::min(raw, X);
              out.overflow[row] += pr * pr_r * (raw - next_x);
              for (int n = 0; n <= Ma; ++n) {
                // Accept/reject sequences of the n arrivals.
                for (int mask = 0; mask < (1 << n); ++mask) {
                  double pr_seq = 1.0;
                  int admitted = 0;
                  for (int j = 0; j < n; ++j) {
                    const double a = acceptance_probability(in.policy, x, c + admitted);
                    if (mask & (1 << j)) {
                      pr_seq *= a;
                      ++admitted;
                    } else {
                      pr_seq *= 1.0 - a;
                    }
                  }
                  if (pr_seq == 0.0) continue;
                  for (int d = 0; d <= c; ++d) {
                    const int next_c = std::clamp(c + admitted - d, 0, C);
                    const double w = pr * pr_r * n_conn[n] * pr_seq * binomial_pmf(c, d, q);
                    for (int s2 = 0; s2 < S; ++s2)
                      out.p(row, sp.index(s2, next_x, next_c)) += w * phi(s, s2);
                  }
                }
              }
            }
            return;
          }
          for (int a = 0; a <= A; ++a)
            if (single[s][a] > 0.0) each_tuple(i + 1, pr * single[s][a], total + a);
        };
        each_tuple(0, 1.0, 0);
      }
  return out;
}

inline BatchArrivalProcess two_batch_bmap() {
  BatchArrivalProcess p;
  p.d0.resize(2, 2);
  p.d0 << -51000, 1000, 2000, -22000;
  p.batches[1].resize(2, 2);
  p.batches[1] << 30000, 0, 0, 10000;
  p.batches[2].resize(2, 2);
  p.batches[2] << 10000, 10000, 0, 10000;
  return p;
}

/// Small chains (at most a few hundred states) that mix in tens of frames.
inline std::vector<TinySpec> tiny_grid() {
  std::vector<TinySpec> grid;
  TinySpec a;  // S=1, X=3, C'=1, A=1, R=1: eight states
  a.rho = 6000;
  a.mean_duration = 0.0005;
  grid.push_back(a);

  TinySpec b;
  b.process = BatchArrivalProcess::poisson(30000, 1);
  b.max_batch = 2;
  b.queue_cap = 5;
  b.policy = CacPolicy::threshold(2);
  b.rho = 12000;
  b.mean_duration = 0.0005;
  grid.push_back(b);

  TinySpec c;
  c.process = BatchArrivalProcess::mmpp2(120000, 12000, 3000, 6000, 1);
  c.max_batch = 2;
  c.queue_cap = 4;
  c.policy = CacPolicy::none(2);
  c.rho = 6000;
  c.mean_duration = 0.001;
  c.capacity = {0.2, 0.5, 0.3};
  grid.push_back(c);

  TinySpec d;
  d.process = two_batch_bmap();
  d.max_batch = 2;
  d.queue_cap = 5;
  d.policy = CacPolicy::queue_aware(3, 5, 2);
  d.rho = 9000;
  d.mean_duration = 0.0005;
  d.capacity = {0.1, 0.6, 0.3};
  grid.push_back(d);

  TinySpec e;
  e.process = BatchArrivalProcess::poisson(60000, 2);
  e.max_batch = 2;
  e.queue_cap = 5;
  e.policy = CacPolicy::threshold(2);
  e.rho = 6000;
  e.mean_duration = 0.0005;
  e.capacity = {0.0, 0.0, 0.5, 0.5};
  grid.push_back(e);

  TinySpec f;
  f.process = BatchArrivalProcess::mmpp2(60000, 6000, 6000, 6000, 1);
  f.max_batch = 1;
  f.queue_cap = 3;
  f.policy = CacPolicy::queue_aware(std::vector<double>{1.0, 0.7, 0.3, 0.0}, 2);
  f.rho = 12000;
  f.mean_duration = 0.0003;
  f.capacity = {0.3, 0.7};
  grid.push_back(f);
  return grid;
}

/// Stationary vector by a plain LU solve of pi (P - I) = 0, sum(pi) = 1.
inline Vector lu_stationary(const Matrix& p) {
  const Eigen::Index n = p.rows();
  Matrix a = p.transpose() - Matrix::Identity(n, n);
  a.row(n - 1).setOnes();
  Vector b = Vector::Zero(n);
  b(n - 1) = 1.0;
  return a.fullPivLu().solve(b);
}

inline double max_abs_diff(const std::vector<double>& a, const Vector& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b(static_cast<Eigen::Index>(i))));
  return d;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace cacq::testing
