#include "cacq/arrival_model.hpp"

#include <cmath>
#include <sstream>

namespace cacq {

int BatchArrivalProcess::max_batch_size() const {
  int k = 0;
  for (const auto& [size, m] : batches)
    if (size > k && (m.array() != 0.0).any()) k = size;
  return k;
}

BatchArrivalProcess BatchArrivalProcess::poisson(double rate, int batch) {
  BatchArrivalProcess p;
  p.d0 = Matrix::Constant(1, 1, -rate);
  p.batches[batch] = Matrix::Constant(1, 1, rate);
  return p;
}

BatchArrivalProcess BatchArrivalProcess::mmpp2(double rate1, double rate2, double switch12,
                                               double switch21, int batch) {
  BatchArrivalProcess p;
  p.d0.resize(2, 2);
  p.d0 << -(rate1 + switch12), switch12, switch21, -(rate2 + switch21);
  Matrix dk = Matrix::Zero(2, 2);
  dk(0, 0) = rate1;
  dk(1, 1) = rate2;
  p.batches[batch] = dk;
  return p;
}

std::string BmapValidation::describe() const {
  if (ok()) return "ok";
  std::ostringstream out;
  for (const auto& v : violations) {
    out << v.matrix;
    if (v.row >= 0) out << '[' << v.row + 1 << ',' << v.col + 1 << ']';
    out << ": " << v.message << '\n';
  }
  return out.str();
}

namespace {

void check_structure(const BatchArrivalProcess& process) {
  const auto& d0 = process.d0;
  if (d0.rows() < 1 || d0.rows() != d0.cols())
    throw StructuralError("D0 must be a non-empty square matrix");
  for (const auto& [k, m] : process.batches) {
    if (k < 1) throw StructuralError("batch sizes must be >= 1, got " + std::to_string(k));
    if (m.rows() != d0.rows() || m.cols() != d0.cols())
      throw StructuralError("D" + std::to_string(k) + " has shape " + std::to_string(m.rows()) +
                            "x" + std::to_string(m.cols()) + ", expected " +
                            std::to_string(d0.rows()) + "x" + std::to_string(d0.cols()));
  }
}

}  // namespace

BmapValidation validate_bmap(const BatchArrivalProcess& process) {
  check_structure(process);
  BmapValidation report;
  const auto& d0 = process.d0;
  const int s = process.num_phases();

  for (int i = 0; i < s; ++i) {
    for (int j = 0; j < s; ++j) {
      if (i == j) {
        if (!(d0(i, i) < 0.0))
          report.violations.push_back({"D0", i, j, "diagonal entry must be negative"});
      } else if (!(d0(i, j) >= 0.0)) {
        report.violations.push_back({"D0", i, j, "off-diagonal rate must be nonnegative"});
      }
    }
  }
  for (const auto& [k, m] : process.batches) {
    for (int i = 0; i < s; ++i)
      for (int j = 0; j < s; ++j)
        if (!(m(i, j) >= 0.0))
          report.violations.push_back({"D" + std::to_string(k), i, j, "rate must be nonnegative"});
  }

  const Matrix d = phase_generator(process);
  for (int i = 0; i < s; ++i) {
    const double tol = 1e-12 * std::max(1.0, std::abs(d0(i, i)));
    const double row = d.row(i).sum();
    if (!(std::abs(row) <= tol)) {
      std::ostringstream msg;
      msg << "row sum of D0 + sum Dk is " << row << ", must be 0";
      report.violations.push_back({"D", i, -1, msg.str()});
    }
  }

  const bool any_rate = (d0.array() != 0.0).any() || process.max_batch_size() > 0;
  if (!any_rate) {
    report.violations.push_back({"D", -1, -1, "degenerate process: no transitions and zero arrival rate"});
  } else if (strongly_connected_components(support_graph(d)).size() != 1) {
    std::ostringstream msg;
    msg << "phase generator is reducible; classes:";
    for (const auto& c : strongly_connected_components(support_graph(d))) {
      std::vector<int> labels(c);
      for (int& v : labels) ++v;
      msg << ' ' << format_class(labels);
    }
    report.violations.push_back({"D", -1, -1, msg.str()});
  }
  return report;
}

Matrix phase_generator(const BatchArrivalProcess& process) {
  Matrix d = process.d0;
  for (const auto& [k, m] : process.batches) d += m;
  return d;
}

Vector stationary_phase_distribution(const BatchArrivalProcess& process) {
  const Matrix d = phase_generator(process);
  const auto comps = strongly_connected_components(support_graph(d));
  if (comps.size() != 1)
    throw ReducibleChainError("phase generator is reducible (" + std::to_string(comps.size()) +
                                  " communicating classes)",
                              comps);
  return gth_stationary(d);
}

double mean_arrival_rate(const BatchArrivalProcess& process) {
  if (process.max_batch_size() == 0) return 0.0;
  const Vector pi = stationary_phase_distribution(process);
  Vector weighted = Vector::Zero(process.num_phases());
  for (const auto& [k, m] : process.batches) weighted += static_cast<double>(k) * m.rowwise().sum();
  return pi.dot(weighted);
}

Matrix FrameCountKernel::phase_step() const {
  Matrix sum = Matrix::Zero(num_phases(), num_phases());
  for (const auto& b : blocks) sum += b;
  // Off from stochastic by rounding only; rescaling keeps entries <= 1.
  for (Eigen::Index r = 0; r < sum.rows(); ++r) sum.row(r) /= sum.row(r).sum();
  return sum;
}

Pmf FrameCountKernel::marginal(int phase) const {
  Pmf p(blocks.size());
  for (std::size_t a = 0; a < blocks.size(); ++a) p[a] = blocks[a].row(phase).sum();
  return p;
}

FrameCountKernel frame_count_kernel(const BatchArrivalProcess& process, double frame_length,
                                    int max_batch, const UniformizationOptions& options) {
  if (!(frame_length > 0.0)) throw std::invalid_argument("frame length must be positive");
  if (max_batch < 1) throw std::invalid_argument("max batch must be >= 1");
  check_structure(process);

  const int s = process.num_phases();
  const int top = max_batch;
  FrameCountKernel kernel;
  kernel.frame_length = frame_length;
  kernel.max_batch = max_batch;
  kernel.blocks.assign(top + 1, Matrix::Zero(s, s));

  double rate = 0.0;
  for (int i = 0; i < s; ++i) rate = std::max(rate, std::abs(process.d0(i, i)));
  if (rate == 0.0) {
    kernel.blocks[0] = Matrix::Identity(s, s);
    return kernel;
  }

  // Uniformized one-jump matrices, indexed by packets emitted.
  std::vector<std::pair<int, Matrix>> jumps;
  jumps.emplace_back(0, Matrix::Identity(s, s) + process.d0 / rate);
  for (const auto& [k, m] : process.batches)
    if ((m.array() != 0.0).any()) jumps.emplace_back(k, m / rate);

  const double mean_jumps = rate * frame_length;
  const double log_mean = std::log(mean_jumps);
  auto weight = [&](int n) {
    return std::exp(-mean_jumps + n * log_mean - std::lgamma(n + 1.0));
  };

  // state[a] = Pr(count a (folded at top), phase after n jumps)
  std::vector<Matrix> state(top + 1, Matrix::Zero(s, s));
  std::vector<bool> live(top + 1, false);
  state[0] = Matrix::Identity(s, s);
  live[0] = true;

  for (int n = 0;; ++n) {
    const double w = weight(n);
    if (w > 0.0) {
      for (int a = 0; a <= top; ++a)
        if (live[a]) kernel.blocks[a] += w * state[a];
    }
    // Past the mode the remaining weights fall faster than a geometric
    // series with ratio mean / (n + 2).
    double tail = 1.0;
    if (n + 2 > mean_jumps) tail = weight(n + 1) / (1.0 - mean_jumps / (n + 2));
    if (tail < options.tail_tolerance && n >= mean_jumps) break;
    if (n >= options.max_steps) {
      std::ostringstream msg;
      msg << "uniformization did not reach tail mass " << options.tail_tolerance << " within "
          << options.max_steps << " steps (tail " << tail << ")";
      throw UniformizationError(msg.str(), tail);
    }

    std::vector<Matrix> next(top + 1, Matrix::Zero(s, s));
    std::vector<bool> next_live(top + 1, false);
    for (int a = 0; a <= top; ++a) {
      if (!live[a]) continue;
      for (const auto& [k, jump] : jumps) {
        const int target = std::min(a + k, top);
        next[target].noalias() += state[a] * jump;
        next_live[target] = true;
      }
    }
    state.swap(next);
    live.swap(next_live);
  }
  return kernel;
}

AggregateArrivalDistribution aggregate_count_distribution(const FrameCountKernel& kernel,
                                                          int connections) {
  if (connections < 0) throw std::invalid_argument("connection count must be >= 0");
  AggregateArrivalDistribution agg;
  agg.phase_step = kernel.phase_step();
  const int s = kernel.num_phases();
  agg.per_phase.resize(s);
  for (int phase = 0; phase < s; ++phase) {
    Pmf total{1.0};
    const Pmf single = kernel.marginal(phase);
    for (int c = 0; c < connections; ++c) total = convolve(total, single);
    agg.per_phase[phase] = std::move(total);
  }
  return agg;
}

}  // namespace cacq
