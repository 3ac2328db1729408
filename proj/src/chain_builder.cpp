#include "cacq/chain_builder.hpp"

#include "cacq/parallel.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace cacq {

namespace {

/// Pr(a >= k) and E[a; a >= k] for every k, summed from the tail up.
struct ArrivalTails {
  std::vector<double> mass;
  std::vector<double> first_moment;

  explicit ArrivalTails(const Pmf& p) : mass(p.size() + 1, 0.0), first_moment(p.size() + 1, 0.0) {
    for (std::size_t k = p.size(); k-- > 0;) {
      mass[k] = mass[k + 1] + p[k];
      first_moment[k] = first_moment[k + 1] + static_cast<double>(k) * p[k];
    }
  }
  double tail_mass(int k) const {
    return k < static_cast<int>(mass.size()) ? std::min(mass[std::max(k, 0)], 1.0) : 0.0;
  }
  /// E[(a - k)^+]
  double excess(int k) const {
    if (k >= static_cast<int>(mass.size())) return 0.0;
    k = std::max(k, 0);
    return first_moment[k] - k * mass[k];
  }
};

/// Law of l = min(R, x) as (l, probability) pairs.
std::vector<std::pair<int, double>> transmissions(int queue_len, const CapacityDistribution& capacity) {
  std::vector<std::pair<int, double>> out;
  const int r_max = capacity.max_packets();
  double above = 0.0;
  for (int r = r_max; r >= queue_len && r >= 0; --r) above += capacity.mass[r];
  for (int l = 0; l < std::min(queue_len, r_max + 1); ++l)
    if (capacity.mass[l] > 0.0) out.emplace_back(l, capacity.mass[l]);
  if (queue_len <= r_max && above > 0.0) out.emplace_back(queue_len, std::min(above, 1.0));
  return out;
}

QueueRow queue_row_with_tails(int queue_len, const Pmf& arrivals, const ArrivalTails& tails,
                              const CapacityDistribution& capacity, int queue_cap) {
  QueueRow row;
  row.next.assign(static_cast<std::size_t>(queue_cap) + 1, 0.0);
  row.expected_arrivals = pmf_mean(arrivals);
  const int top = static_cast<int>(arrivals.size()) - 1;
  for (const auto& [l, pl] : transmissions(queue_len, capacity)) {
    const int base = queue_len - l;
    const int room = queue_cap - base;
    for (int a = 0; a < room && a <= top; ++a) row.next[base + a] += pl * arrivals[a];
    row.next[queue_cap] += pl * tails.tail_mass(room);
    row.expected_overflow += pl * tails.excess(room);
  }
  return row;
}

}  // namespace

QueueRow queue_transition_row(int queue_len, const Pmf& arrivals, const CapacityDistribution& capacity,
                              int queue_cap) {
  if (queue_len < 0 || queue_len > queue_cap)
    throw std::out_of_range("queue length " + std::to_string(queue_len) + " outside 0.." +
                            std::to_string(queue_cap));
  return queue_row_with_tails(queue_len, arrivals, ArrivalTails(arrivals), capacity, queue_cap);
}

StructuredChain::StructuredChain(ChainInputs inputs) : inputs_(std::move(inputs)) {
  const auto& in = inputs_;
  if (in.queue_cap < 0) throw std::invalid_argument("queue capacity must be >= 0");
  if (in.kernel.blocks.empty()) throw std::invalid_argument("empty frame count kernel");
  if (in.capacity.mass.empty()) throw std::invalid_argument("empty capacity distribution");
  in.connections.validate();
  in.policy.validate();
  if (const auto* qa = std::get_if<QueueAwareCac>(&in.policy.rule())) {
    if (qa->alpha.size() != static_cast<std::size_t>(in.queue_cap) + 1)
      throw std::invalid_argument("acceptance vector has " + std::to_string(qa->alpha.size()) +
                                  " entries, expected X+1 = " + std::to_string(in.queue_cap + 1));
  }

  space_ = {in.kernel.num_phases(), in.queue_cap, in.policy.connection_cap()};
  phase_step_ = in.kernel.phase_step();
  const int phases = space_.num_phases;
  const int conn_cap = space_.conn_cap;
  const int queue_cap = space_.queue_cap;

  connection_steps_.resize(connection_depends_on_queue() ? queue_cap + 1 : 1);
  parallel_for(connection_steps_.size(), [&](std::size_t x) {
    connection_steps_[x] = connection_step(in.policy, static_cast<int>(x), in.connections);
  });

  arrivals_.resize(static_cast<std::size_t>(phases) * (conn_cap + 1));
  per_connection_mean_.resize(phases);
  for (int s = 0; s < phases; ++s) {
    const Pmf single = in.kernel.marginal(s);
    per_connection_mean_[s] = pmf_mean(single);
    Pmf total{1.0};
    for (int c = 0; c <= conn_cap; ++c) {
      if (c > 0) total = convolve(total, single);
      arrivals_[slot(s, c)] = total;
    }
  }

  const std::size_t n = space_.size();
  expected_overflow_.assign(n, 0.0);
  expected_arrivals_.assign(n, 0.0);
  parallel_for(arrivals_.size(), [&](std::size_t k) {
    const int s = static_cast<int>(k / (conn_cap + 1));
    const int c = static_cast<int>(k % (conn_cap + 1));
    const ArrivalTails tails(arrivals_[k]);
    const double mean = pmf_mean(arrivals_[k]);
    for (int x = 0; x <= queue_cap; ++x) {
      double overflow = 0.0;
      for (const auto& [l, pl] : transmissions(x, in.capacity))
        overflow += pl * tails.excess(queue_cap - (x - l));
      const std::size_t idx = space_.index(s, x, c);
      expected_overflow_[idx] = overflow;
      expected_arrivals_[idx] = mean;
    }
  });

  Fingerprint fp;
  fp.add(std::string_view("structured-chain-v1"));
  for (const auto& b : in.kernel.blocks) fp.add(b);
  fp.add(in.kernel.frame_length);
  fp.add(std::span<const double>(in.capacity.mass));
  fp.add(in.connections.arrival_rate);
  fp.add(in.connections.mean_duration);
  fp.add(in.connections.frame_length);
  fp.add(static_cast<std::int64_t>(in.connections.max_arrivals_per_frame));
  fp.add(in.policy.label());
  fp.add(static_cast<std::int64_t>(conn_cap));
  if (const auto* qa = std::get_if<QueueAwareCac>(&in.policy.rule())) fp.add(std::span<const double>(qa->alpha));
  fp.add(static_cast<std::int64_t>(queue_cap));
  fingerprint_ = fp.value();
}

QueueRow StructuredChain::queue_row(int phase, int queue_len, int conns) const {
  return queue_transition_row(queue_len, arrivals(phase, conns), inputs_.capacity, space_.queue_cap);
}

Matrix StructuredChain::level_kernel(int conns) const {
  const int width = space_.queue_cap + 1;
  const int phases = space_.num_phases;
  Matrix m = Matrix::Zero(phases * width, phases * width);
  for (int s = 0; s < phases; ++s) {
    const Pmf& arr = arrivals(s, conns);
    const ArrivalTails tails(arr);
    for (int x = 0; x <= space_.queue_cap; ++x) {
      const QueueRow row = queue_row_with_tails(x, arr, tails, inputs_.capacity, space_.queue_cap);
      const Eigen::Map<const Vector> next(row.next.data(), width);
      for (int s2 = 0; s2 < phases; ++s2) {
        const double f = phase_step_(s, s2);
        if (f == 0.0) continue;
        m.block(s * width + x, s2 * width, 1, width) = f * next.transpose();
      }
    }
  }
  return m;
}

double TransitionMatrix::row_sum(std::size_t row) const {
  double sum = 0.0;
  for (std::size_t k = row_start[row]; k < row_start[row + 1]; ++k) sum += value[k];
  return sum;
}

double TransitionMatrix::at(std::size_t row, std::size_t col) const {
  const auto first = column.begin() + static_cast<std::ptrdiff_t>(row_start[row]);
  const auto last = column.begin() + static_cast<std::ptrdiff_t>(row_start[row + 1]);
  const auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(col));
  return (it != last && *it == col) ? value[static_cast<std::size_t>(it - column.begin())] : 0.0;
}

void TransitionMatrix::left_multiply(const std::vector<double>& x, std::vector<double>& y) const {
  y.assign(size, 0.0);
  for (std::size_t i = 0; i < size; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    for (std::size_t k = row_start[i]; k < row_start[i + 1]; ++k) y[column[k]] += xi * value[k];
  }
}

Matrix TransitionMatrix::dense() const {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(size));
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t k = row_start[i]; k < row_start[i + 1]; ++k) m(i, column[k]) = value[k];
  return m;
}

TransitionMatrix TransitionMatrix::from_dense(const Matrix& m) {
  TransitionMatrix p;
  p.size = static_cast<std::size_t>(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (m(i, j) != 0.0) {
        p.column.push_back(static_cast<std::uint32_t>(j));
        p.value.push_back(m(i, j));
      }
    }
    p.row_start.push_back(p.value.size());
  }
  return p;
}

std::size_t estimate_nonzeros(const StructuredChain& chain) {
  const auto& sp = chain.space();
  const int r_max = chain.inputs().capacity.max_packets();
  std::vector<std::size_t> phase_nnz(sp.num_phases, 0);
  for (int s = 0; s < sp.num_phases; ++s)
    for (int s2 = 0; s2 < sp.num_phases; ++s2) phase_nnz[s] += chain.phase_step()(s, s2) != 0.0;

  std::size_t total = 0;
  for (int x = 0; x <= sp.queue_cap; ++x) {
    const Matrix& q = chain.connection(x).transition;
    for (int c = 0; c <= sp.conn_cap; ++c) {
      const auto q_nnz = static_cast<std::size_t>((q.row(c).array() != 0.0).count());
      for (int s = 0; s < sp.num_phases; ++s) {
        const int top = static_cast<int>(chain.arrivals(s, c).size()) - 1;
        const int hi = std::min(sp.queue_cap, x + top);
        const int lo = std::max(0, x - r_max);
        total += phase_nnz[s] * q_nnz * static_cast<std::size_t>(hi - lo + 1);
      }
    }
  }
  return total;
}

TransitionMatrix assemble(const StructuredChain& chain, const AssemblyOptions& options) {
  const auto& sp = chain.space();
  const std::size_t n = sp.size();
  if (n > std::numeric_limits<std::uint32_t>::max())
    throw MemoryBudgetError("state space too large for 32-bit column indices", n, 0);
  const std::size_t nnz = estimate_nonzeros(chain);
  const std::size_t bytes = nnz * (sizeof(double) + sizeof(std::uint32_t)) + (n + 1) * sizeof(std::size_t);
  if (bytes > options.memory_budget_bytes) {
    std::ostringstream msg;
    msg << "explicit transition matrix needs ~" << (bytes >> 20) << " MiB (N = " << n
        << " states, up to " << nnz << " nonzeros), budget is " << (options.memory_budget_bytes >> 20)
        << " MiB";
    throw MemoryBudgetError(msg.str(), n, nnz);
  }

  const int width = sp.queue_cap + 1;
  const int conns = sp.conn_cap + 1;
  struct Block {
    std::vector<std::size_t> row_len;
    std::vector<std::uint32_t> column;
    std::vector<double> value;
  };
  // One block per (phase, x): its rows are contiguous in canonical order.
  std::vector<Block> blocks(static_cast<std::size_t>(sp.num_phases) * width);
  parallel_for(blocks.size(), [&](std::size_t b) {
    const int s = static_cast<int>(b / width);
    const int x = static_cast<int>(b % width);
    const Matrix& q = chain.connection(x).transition;
    Block& out = blocks[b];
    for (int c = 0; c < conns; ++c) {
      const QueueRow row = chain.queue_row(s, x, c);
      std::size_t len = 0;
      for (int s2 = 0; s2 < sp.num_phases; ++s2) {
        const double f = chain.phase_step()(s, s2);
        if (f == 0.0) continue;
        for (int x2 = 0; x2 < width; ++x2) {
          const double fx = f * row.next[x2];
          if (fx == 0.0) continue;
          for (int c2 = 0; c2 < conns; ++c2) {
            const double v = fx * q(c, c2);
            if (v == 0.0) continue;
            out.column.push_back(static_cast<std::uint32_t>(sp.index(s2, x2, c2)));
            out.value.push_back(v);
            ++len;
          }
        }
      }
      out.row_len.push_back(len);
    }
  });

  TransitionMatrix p;
  p.size = n;
  p.chain_fingerprint = chain.fingerprint();
  std::size_t total = 0;
  for (const auto& b : blocks) total += b.value.size();
  p.column.reserve(total);
  p.value.reserve(total);
  p.row_start.reserve(n + 1);
  for (auto& b : blocks) {
    for (std::size_t len : b.row_len) p.row_start.push_back(p.row_start.back() + len);
    p.column.insert(p.column.end(), b.column.begin(), b.column.end());
    p.value.insert(p.value.end(), b.value.begin(), b.value.end());
    b = Block{};
  }
  return p;
}

ReachabilityReport reachability_check(const TransitionMatrix& p) {
  Digraph g(p.size);
  std::vector<bool> has_in(p.size, false);
  for (std::size_t i = 0; i < p.size; ++i) {
    for (std::size_t k = p.row_start[i]; k < p.row_start[i + 1]; ++k) {
      const auto j = p.column[k];
      if (j != i && p.value[k] != 0.0) {
        g[i].push_back(static_cast<int>(j));
        has_in[j] = true;
      }
    }
  }
  ReachabilityReport report;
  if (p.size == 0) return report;
  report.reachable = reachable_from(g, 0);
  report.closed_classes = closed_classes(g);
  report.single_recurrent_class = report.closed_classes.size() == 1;

  std::vector<bool> recurrent(p.size, false);
  for (const auto& cls : report.closed_classes)
    for (int v : cls) recurrent[v] = true;
  for (std::size_t i = 0; i < p.size; ++i) {
    if (!recurrent[i]) report.transient.push_back(static_cast<int>(i));
    if (g[i].empty() && !has_in[i]) report.isolated.push_back(static_cast<int>(i));
  }

  // Irreducible on the reachable set iff every reachable state reaches state 0 back.
  Digraph reverse(p.size);
  for (std::size_t i = 0; i < p.size; ++i)
    for (int j : g[i]) reverse[j].push_back(static_cast<int>(i));
  const auto back = reachable_from(reverse, 0);
  report.irreducible_on_reachable = true;
  for (std::size_t i = 0; i < p.size; ++i)
    if (report.reachable[i] && !back[i]) report.irreducible_on_reachable = false;
  return report;
}

void write_matrix(std::ostream& out, const TransitionMatrix& p) {
  out << p.size << ' ' << p.nonzeros() << '\n';
  char buf[64];
  for (std::size_t i = 0; i < p.size; ++i) {
    for (std::size_t k = p.row_start[i]; k < p.row_start[i + 1]; ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", p.value[k]);
      out << i << ' ' << p.column[k] << ' ' << buf << '\n';
    }
  }
}

}  // namespace cacq
