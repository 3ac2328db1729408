#include "cacq/steady_state.hpp"

#include "cacq/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace cacq {

double stationary_residual(const TransitionMatrix& p, const std::vector<double>& pi) {
  std::vector<double> y;
  p.left_multiply(pi, y);
  double r = 0.0;
  for (std::size_t i = 0; i < p.size; ++i) r = std::max(r, std::abs(y[i] - pi[i]));
  return r;
}

StationaryDistribution solve_direct(const TransitionMatrix& p, const DirectOptions& options) {
  if (p.size > options.max_states)
    throw std::invalid_argument("direct solver limited to " + std::to_string(options.max_states) +
                                " states, chain has " + std::to_string(p.size));
  const Vector pi = gth_stationary(p.dense());
  StationaryDistribution out;
  out.pi.assign(pi.data(), pi.data() + pi.size());
  out.residual = stationary_residual(p, out.pi);
  out.method = "direct";
  out.chain_fingerprint = p.chain_fingerprint;
  return out;
}

StationaryDistribution solve_iterative(const TransitionMatrix& p, const IterativeOptions& options) {
  const std::size_t n = p.size;
  if (n == 0) throw std::invalid_argument("empty transition matrix");

  std::vector<double> pi;
  if (options.start) {
    pi = *options.start;
    if (pi.size() != n) throw std::invalid_argument("start vector has wrong length");
  } else {
    Digraph g(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = p.row_start[i]; k < p.row_start[i + 1]; ++k)
        if (p.column[k] != i) g[i].push_back(static_cast<int>(p.column[k]));
    const auto reach = reachable_from(g, 0);
    const auto count = static_cast<double>(std::count(reach.begin(), reach.end(), true));
    pi.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      if (reach[i]) pi[i] = 1.0 / count;
  }

  bool damped = false;
  double window_start_diff = -1.0;
  double diff = -1.0;
  std::vector<double> next;
  for (std::size_t it = 1; it <= options.max_iterations; ++it) {
    p.left_multiply(pi, next);
    if (damped)
      for (std::size_t i = 0; i < n; ++i) next[i] = 0.5 * (next[i] + pi[i]);

    if (it % options.check_every == 0) {
      double sum = 0.0;
      for (double v : next) sum += v;
      for (double& v : next) v /= sum;
      diff = 0.0;
      for (std::size_t i = 0; i < n; ++i) diff += std::abs(next[i] - pi[i]);
      if (diff < options.tolerance) {
        StationaryDistribution out;
        out.pi = std::move(next);
        out.residual = stationary_residual(p, out.pi);
        out.iterations = it;
        out.method = damped ? "iterative(damped)" : "iterative";
        out.chain_fingerprint = p.chain_fingerprint;
        return out;
      }
      if (!damped && it % options.stall_window == 0) {
        // Oscillation keeps the step size flat; damping keeps the fixed point.
        if (window_start_diff > 0.0 && diff >= 0.999 * window_start_diff) damped = true;
        window_start_diff = diff;
      }
    }
    pi.swap(next);
  }
  std::ostringstream msg;
  msg << "power iteration did not converge in " << options.max_iterations << " iterations (";
  if (diff >= 0.0) msg << "last step " << diff << ", ";
  msg << "residual " << stationary_residual(p, pi) << "); chain may be periodic or too slowly mixing";
  throw NonConvergenceError(msg.str(), stationary_residual(p, pi), options.max_iterations);
}

namespace {

/// Transition mass from one connection level to another as a function of
/// the local (phase, queue) state.
struct Coupling {
  int source = 0;            // position in the active level list
  int target = 0;
  bool constant = true;
  double value = 0.0;        // when constant
  Vector weight;             // per local state otherwise
};

/// Some states of a level never leave it: a closed class sits inside one
/// connection level and the level graph cannot see it.
class SingularLevelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LevelSolver {
 public:
  LevelSolver(const StructuredChain& chain, const AggregationOptions& options)
      : chain_(chain), options_(options) {
    const auto& sp = chain.space();
    width_ = sp.queue_cap + 1;
    local_ = sp.num_phases * width_;
    find_active_levels();
    check_budget();
    build_couplings();
    kernels_.resize(active_.size());
    parallel_for(active_.size(), [&](std::size_t i) { kernels_[i] = chain.level_kernel(active_[i]); });
  }

  StationaryDistribution run() {
    StationaryDistribution out;
    out.method = "aggregated";
    out.chain_fingerprint = chain_.fingerprint();
    const std::size_t levels = active_.size();

    std::vector<Vector> pi(levels, Vector::Constant(local_, 1.0 / (static_cast<double>(local_) * levels)));
    if (levels == 1) {
      // A closed single level: its block is the whole (stochastic) kernel.
      const Vector v = gth_stationary(kernels_[0]);
      pi[0] = v;
      out.residual = residual(pi);
      out.iterations = 1;
      out.pi = to_canonical(pi);
      return out;
    }

    factorize();
    double r = 0.0;
    for (std::size_t it = 0; it < options_.max_iterations; ++it) {
      aggregate(pi);
      r = residual(pi);
      if (r < options_.tolerance) {
        out.residual = r;
        out.iterations = it;
        out.pi = to_canonical(pi);
        return out;
      }
      sweep(pi);
    }
    std::ostringstream msg;
    msg << "aggregation solver did not converge in " << options_.max_iterations
        << " iterations (residual " << r << ")";
    throw NonConvergenceError(msg.str(), r, options_.max_iterations);
  }

 private:
  double q(int queue_len, int from, int to) const {
    return chain_.connection(queue_len).transition(from, to);
  }

  void find_active_levels() {
    const int levels = chain_.space().conn_cap + 1;
    const int xs = chain_.connection_depends_on_queue() ? width_ : 1;
    Digraph g(levels);
    for (int c = 0; c < levels; ++c)
      for (int c2 = 0; c2 < levels; ++c2) {
        if (c2 == c) continue;
        for (int x = 0; x < xs; ++x)
          if (q(x, c, c2) != 0.0) {
            g[c].push_back(c2);
            break;
          }
      }
    const auto reach = reachable_from(g, 0);
    std::vector<std::vector<int>> reachable_closed;
    for (const auto& cls : closed_classes(g))
      if (reach[cls.front()]) reachable_closed.push_back(cls);
    if (reachable_closed.size() != 1)
      throw ReducibleChainError("connection levels reachable from 0 contain " +
                                    std::to_string(reachable_closed.size()) + " closed classes",
                                reachable_closed);
    active_ = reachable_closed.front();
    position_.assign(levels, -1);
    for (std::size_t i = 0; i < active_.size(); ++i) position_[active_[i]] = static_cast<int>(i);
  }

  void check_budget() const {
    const double bytes = 2.0 * static_cast<double>(active_.size()) * local_ * local_ * sizeof(double);
    if (bytes > static_cast<double>(options_.memory_budget_bytes)) {
      std::ostringstream msg;
      msg << "aggregation solver needs ~" << static_cast<std::size_t>(bytes / (1 << 20)) << " MiB for "
          << active_.size() << " level blocks of " << local_ << " states; budget is "
          << (options_.memory_budget_bytes >> 20) << " MiB";
      throw MemoryBudgetError(msg.str(), chain_.space().size(), 0);
    }
  }

  void build_couplings() {
    const std::size_t levels = active_.size();
    incoming_.assign(levels, {});
    self_.assign(levels, Coupling{});
    for (std::size_t i = 0; i < levels; ++i) {
      self_[i].source = self_[i].target = static_cast<int>(i);
      const int c = active_[i];
      for (std::size_t j = 0; j < levels; ++j) {
        const int c2 = active_[j];
        Coupling k;
        k.source = static_cast<int>(i);
        k.target = static_cast<int>(j);
        Vector per_x(width_);
        bool any = false;
        for (int x = 0; x < width_; ++x) {
          per_x(x) = q(x, c, c2);
          any = any || per_x(x) != 0.0;
        }
        if (!any) continue;
        k.constant = (per_x.array() == per_x(0)).all();
        k.value = per_x(0);
        if (!k.constant) k.weight = per_x.replicate(chain_.space().num_phases, 1);
        if (i == j)
          self_[i] = std::move(k);
        else
          incoming_[j].push_back(std::move(k));
      }
    }
  }

  Vector self_weight(std::size_t i) const {
    const auto& k = self_[i];
    return k.constant ? Vector::Constant(local_, k.value) : k.weight;
  }

  void factorize() {
    lu_.resize(active_.size());
    parallel_for(active_.size(), [&](std::size_t i) {
      const Vector w = self_weight(i);
      // A singular block means some states of the level can never leave it:
      // a closed set of the level kernel on which the self weight is 1.
      Digraph g(local_);
      for (int r = 0; r < local_; ++r) {
        if (w(r) == 0.0) continue;
        for (int col = 0; col < local_; ++col)
          if (col != r && kernels_[i](r, col) > 0.0) g[r].push_back(col);
      }
      bool trapped = false;
      for (const auto& cls : closed_classes(g)) {
        bool stays = true;
        for (int r : cls) stays = stays && w(r) > 1.0 - 1e-12;
        trapped = trapped || stays;
      }
      Matrix block = -(w.asDiagonal() * kernels_[i]);
      block.diagonal().array() += 1.0;
      lu_[i].compute(block.transpose());
      const double rcond = lu_[i].rcond();
      if (trapped || !(rcond > 0.0) || !std::isfinite(rcond)) {
        throw SingularLevelError("connection level " + std::to_string(active_[i]) +
                                 " has states that can never leave it; aggregation solver cannot proceed");
      }
    });
  }

  /// Row vector pi_source transported by one coupling: (pi o weight) M_source.
  Vector transport(const Coupling& k, const Vector& pi_source, const Vector& moved) const {
    if (k.constant) return k.value * moved;
    return kernels_[k.source].transpose() * pi_source.cwiseProduct(k.weight);
  }

  void aggregate(std::vector<Vector>& pi) const {
    const std::size_t levels = active_.size();
    std::vector<Vector> shape(levels);
    for (std::size_t i = 0; i < levels; ++i) {
      const double mass = pi[i].sum();
      shape[i] = mass > 0.0 ? Vector(pi[i] / mass) : Vector::Constant(local_, 1.0 / local_);
    }
    Matrix a = Matrix::Zero(levels, levels);
    for (std::size_t j = 0; j < levels; ++j) {
      for (const auto& k : incoming_[j])
        a(k.source, j) = k.constant ? k.value : shape[k.source].dot(k.weight);
      a(j, j) = self_[j].constant ? self_[j].value : shape[j].dot(self_[j].weight);
    }
    const Vector xi = gth_stationary(a);
    for (std::size_t i = 0; i < levels; ++i) pi[i] = xi(i) * shape[i];
  }

  void sweep(std::vector<Vector>& pi) const {
    const std::size_t levels = active_.size();
    std::vector<Vector> moved(levels);
    for (std::size_t i = 0; i < levels; ++i) moved[i] = kernels_[i].transpose() * pi[i];
    for (std::size_t j = 0; j < levels; ++j) {
      Vector inflow = Vector::Zero(local_);
      for (const auto& k : incoming_[j]) inflow += transport(k, pi[k.source], moved[k.source]);
      pi[j] = lu_[j].solve(inflow).cwiseMax(0.0);
      moved[j] = kernels_[j].transpose() * pi[j];
    }
    double total = 0.0;
    for (const auto& v : pi) total += v.sum();
    for (auto& v : pi) v /= total;
  }

  double residual(const std::vector<Vector>& pi) const {
    const std::size_t levels = active_.size();
    std::vector<Vector> moved(levels);
    for (std::size_t i = 0; i < levels; ++i) moved[i] = kernels_[i].transpose() * pi[i];
    double r = 0.0;
    for (std::size_t j = 0; j < levels; ++j) {
      Vector y = transport(self_[j], pi[j], moved[j]);
      for (const auto& k : incoming_[j]) y += transport(k, pi[k.source], moved[k.source]);
      r = std::max(r, (y - pi[j]).cwiseAbs().maxCoeff());
    }
    return r;
  }

  std::vector<double> to_canonical(const std::vector<Vector>& pi) const {
    const auto& sp = chain_.space();
    std::vector<double> out(sp.size(), 0.0);
    for (std::size_t i = 0; i < active_.size(); ++i)
      for (int s = 0; s < sp.num_phases; ++s)
        for (int x = 0; x < width_; ++x) out[sp.index(s, x, active_[i])] = pi[i](s * width_ + x);
    return out;
  }

  const StructuredChain& chain_;
  AggregationOptions options_;
  int width_ = 0;
  int local_ = 0;
  std::vector<int> active_;
  std::vector<int> position_;
  std::vector<std::vector<Coupling>> incoming_;
  std::vector<Coupling> self_;
  std::vector<Matrix> kernels_;
  std::vector<Eigen::PartialPivLU<Matrix>> lu_;
};

}  // namespace

StationaryDistribution solve_aggregated(const StructuredChain& chain, const AggregationOptions& options) {
  try {
    return LevelSolver(chain, options).run();
  } catch (const SingularLevelError&) {
    // Only degenerate admission rules get here (nothing admitted from an
    // empty queue, say); fall back to the explicit matrix.
    const auto p = assemble(chain, {options.memory_budget_bytes});
    IterativeOptions it;
    it.tolerance = options.tolerance;
    StationaryDistribution out = p.size <= DirectOptions{}.max_states ? solve_direct(p) : solve_iterative(p, it);
    out.method = "aggregated(" + out.method + ")";
    return out;
  }
}

SolverMethod parse_solver_method(const std::string& name) {
  if (name == "auto" || name == "automatic") return SolverMethod::automatic;
  if (name == "direct") return SolverMethod::direct;
  if (name == "iterative") return SolverMethod::iterative;
  if (name == "aggregated") return SolverMethod::aggregated;
  throw std::invalid_argument("unknown solver method '" + name +
                              "' (expected auto, direct, iterative or aggregated)");
}

std::string to_string(SolverMethod method) {
  switch (method) {
    case SolverMethod::automatic: return "auto";
    case SolverMethod::direct: return "direct";
    case SolverMethod::iterative: return "iterative";
    case SolverMethod::aggregated: return "aggregated";
  }
  return "auto";
}

StationaryDistribution solve(const StructuredChain& chain, const SolverOptions& options) {
  switch (options.method) {
    case SolverMethod::direct: {
      const auto p = assemble(chain, {options.memory_budget_bytes});
      return solve_direct(p, {options.direct_max_states});
    }
    case SolverMethod::iterative: {
      const auto p = assemble(chain, {options.memory_budget_bytes});
      IterativeOptions it;
      it.tolerance = options.tolerance;
      it.max_iterations = options.max_iterations;
      return solve_iterative(p, it);
    }
    case SolverMethod::automatic:
    case SolverMethod::aggregated:
      break;
  }
  AggregationOptions agg;
  agg.tolerance = options.tolerance;
  agg.memory_budget_bytes = options.memory_budget_bytes;
  return solve_aggregated(chain, agg);
}

void write_distribution(std::ostream& out, const StationaryDistribution& dist) {
  char buf[64];
  for (std::size_t i = 0; i < dist.pi.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", dist.pi[i]);
    out << i << ' ' << buf << '\n';
  }
}

}  // namespace cacq
