#include "cacq/simulator.hpp"

#include "cacq/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <ostream>
#include <random>
#include <sstream>

namespace cacq {

void SimConfig::validate() const {
  if (measure_frames < 1000) throw std::invalid_argument("sim.measure_frames must be >= 1000");
  if (replications < 3) throw std::invalid_argument("sim.replications must be >= 3");
  model.connections.validate();
  model.policy.validate();
  if (model.queue_cap < 0) throw std::invalid_argument("queue capacity must be >= 0");
  if (model.kernel.blocks.empty()) throw std::invalid_argument("arrival kernel is empty");
  if (model.capacity.mass.empty()) throw std::invalid_argument("capacity distribution is empty");
}

std::uint64_t replication_seed(std::uint64_t base_seed, int index) {
  std::uint64_t z = base_seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

std::discrete_distribution<int> make_distribution(const std::vector<double>& weights) {
  return std::discrete_distribution<int>(weights.begin(), weights.end());
}

std::vector<double> row_of(const Matrix& m, int r) {
  std::vector<double> w(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) w[j] = std::max(0.0, m(r, j));
  return w;
}

struct Run {
  std::uint64_t frame;
  std::int64_t count;
};

}  // namespace

ReplicationCounts simulate_replication(const SimConfig& config, std::uint64_t seed) {
  const ChainInputs& m = config.model;
  const int phases = m.kernel.num_phases();
  const Matrix phi = m.kernel.phase_step();
  const int queue_cap = m.queue_cap;
  const double q_depart = m.connections.departure_probability();
  const double conn_mean = m.connections.arrival_rate * m.connections.frame_length;

  std::vector<std::discrete_distribution<int>> batch, phase_next;
  for (int s = 0; s < phases; ++s) {
    batch.push_back(make_distribution(m.kernel.marginal(s)));
    phase_next.push_back(make_distribution(row_of(phi, s)));
  }
  auto capacity = make_distribution(m.capacity.mass);
  std::poisson_distribution<int> conn_arrivals(conn_mean > 0.0 ? conn_mean : 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  std::mt19937_64 rng(seed);
  int phase = 0;
  std::int64_t queue = 0;
  int conns = 0;
  std::deque<Run> fifo;

  ReplicationCounts out;
  out.seed = seed;
  const std::uint64_t total = config.warmup_frames + config.measure_frames;
  for (std::uint64_t t = 0; t < total; ++t) {
    const bool measuring = t >= config.warmup_frames;
    if (t == config.warmup_frames) {
      out.queue_start = queue;
      out.conns_start = conns;
    }
    if (measuring) {
      out.queue_area += static_cast<std::uint64_t>(queue);
      out.conn_area += static_cast<std::uint64_t>(conns);
    }

    std::int64_t arrivals = 0;
    for (int i = 0; i < conns; ++i) arrivals += batch[phase](rng);
    phase = phases > 1 ? phase_next[phase](rng) : 0;

    // Service from the frame-start backlog, oldest packets first.
    const std::int64_t queue0 = queue;
    std::int64_t to_serve = std::min<std::int64_t>(capacity(rng), queue0);
    const std::int64_t served = to_serve;
    while (to_serve > 0) {
      Run& head = fifo.front();
      const std::int64_t take = std::min(to_serve, head.count);
      if (measuring) out.sojourn += static_cast<std::uint64_t>(take) * (t - head.frame);
      head.count -= take;
      to_serve -= take;
      if (head.count == 0) fifo.pop_front();
    }
    queue -= served;

    const std::int64_t admitted = std::min<std::int64_t>(arrivals, queue_cap - queue);
    if (admitted > 0) fifo.push_back({t, admitted});
    queue += admitted;

    int offered = 0;
    if (conn_mean > 0.0) offered = std::min(conn_arrivals(rng), m.connections.max_arrivals_per_frame);
    int accepted = 0;
    for (int j = 0; j < offered; ++j) {
      const double a = acceptance_probability(m.policy, static_cast<int>(queue0), conns + accepted);
      if (a >= 1.0 || (a > 0.0 && uniform(rng) < a)) ++accepted;
    }
    int departed = 0;
    if (conns > 0 && q_depart > 0.0) departed = std::binomial_distribution<int>(conns, q_depart)(rng);
    conns += accepted - departed;

    if (measuring) {
      ++out.frames;
      out.offered += offered;
      out.accepted += accepted;
      out.blocked += offered - accepted;
      out.departed += departed;
      out.arrived += arrivals;
      out.dropped += arrivals - admitted;
      out.served += served;
    }
  }
  out.queue_end = queue;
  out.conns_end = conns;
  return out;
}

namespace {

MetricEstimate summarize(const std::vector<double>& values) {
  MetricEstimate e;
  std::vector<double> v;
  for (double x : values)
    if (std::isfinite(x)) v.push_back(x);
  e.samples = static_cast<int>(v.size());
  if (v.empty()) {
    e.mean = std::nan("");
    return e;
  }
  double sum = 0.0;
  for (double x : v) sum += x;
  e.mean = sum / v.size();
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - e.mean) * (x - e.mean);
    e.std_error = std::sqrt(ss / (v.size() - 1) / v.size());
  }
  e.ci_half_width = 1.96 * e.std_error;
  return e;
}

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? std::nan("") : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

QosEstimate estimate_from_counts(std::vector<ReplicationCounts> counts) {
  QosEstimate e;
  std::vector<double> pb, nc, nq, nd, pd, th, dl, lb;
  for (const auto& r : counts) {
    pb.push_back(ratio(r.blocked, r.offered));
    nc.push_back(ratio(r.conn_area, r.frames));
    nq.push_back(ratio(r.queue_area, r.frames));
    nd.push_back(ratio(r.dropped, r.frames));
    pd.push_back(r.arrived == 0 ? 0.0 : ratio(r.dropped, r.arrived));
    th.push_back(ratio(r.served, r.frames));
    // Nothing served and nothing waiting: every packet left after zero frames.
    dl.push_back(r.served == 0 && r.queue_area == 0 ? 0.0 : ratio(r.sojourn, r.served));
    lb.push_back(ratio(r.arrived, r.frames));
  }
  e.p_block = summarize(pb);
  e.n_conn = summarize(nc);
  e.n_queue = summarize(nq);
  e.n_drop = summarize(nd);
  e.p_drop = summarize(pd);
  e.throughput = summarize(th);
  e.delay = summarize(dl);
  e.lambda_bar = summarize(lb);
  e.replications = std::move(counts);
  return e;
}

const MetricEstimate& QosEstimate::metric(const std::string& name) const {
  if (name == "p_block") return p_block;
  if (name == "n_conn") return n_conn;
  if (name == "n_queue") return n_queue;
  if (name == "n_drop") return n_drop;
  if (name == "p_drop") return p_drop;
  if (name == "throughput") return throughput;
  if (name == "delay") return delay;
  if (name == "lambda_bar") return lambda_bar;
  throw std::out_of_range("unknown metric " + name);
}

QosEstimate simulate(const SimConfig& config) {
  config.validate();
  std::vector<ReplicationCounts> counts(static_cast<std::size_t>(config.replications));
  parallel_for(counts.size(), [&](std::size_t i) {
    counts[i] = simulate_replication(config, replication_seed(config.base_seed, static_cast<int>(i)));
  });
  QosEstimate e = estimate_from_counts(std::move(counts));
  e.fingerprint = config.fingerprint;
  e.policy = config.model.policy.label();
  return e;
}

bool Comparison::all_pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const ComparisonRow& r) { return r.pass; });
}

namespace {

std::optional<double> analytic_value(const QosReport& r, const std::string& name) {
  if (name == "p_block") return r.p_block;
  if (name == "n_conn") return r.n_conn;
  if (name == "n_queue") return r.n_queue;
  if (name == "n_drop") return r.n_drop;
  if (name == "p_drop") return r.p_drop;
  if (name == "throughput") return r.throughput;
  if (name == "delay") return r.delay;
  if (name == "lambda_bar") return r.lambda_bar;
  throw std::out_of_range("unknown metric " + name);
}

}  // namespace

Comparison compare(const QosReport& report, const QosEstimate& estimate, double threshold) {
  if (report.fingerprint != estimate.fingerprint)
    throw FingerprintMismatchError("analytic report " + report.fingerprint + " and simulation " +
                                   estimate.fingerprint + " come from different scenarios");
  Comparison c;
  c.threshold = threshold;
  for (const char* name : kComparedMetrics) {
    ComparisonRow row;
    row.metric = name;
    row.analytic = analytic_value(report, name);
    const MetricEstimate& m = estimate.metric(name);
    row.sim_mean = m.mean;
    row.sim_stderr = m.std_error;
    if (!m.defined() || !row.analytic) {
      // An undefined estimate (nothing offered) agrees with an undefined or zero analytic value.
      row.z = 0.0;
      row.pass = !m.defined() && (!row.analytic || *row.analytic == 0.0);
    } else {
      const double diff = *row.analytic - m.mean;
      if (m.std_error > 0.0)
        row.z = diff / m.std_error;
      else
        row.z = std::abs(diff) <= 1e-12 ? 0.0 : std::copysign(INFINITY, diff);
      row.pass = std::abs(row.z) <= threshold;
    }
    c.rows.push_back(row);
  }
  return c;
}

std::string format_comparison(const Comparison& c) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-11s %14s %14s %12s %8s  %s\n", "metric", "analytic", "sim mean",
                "stderr", "z", "result");
  out << line;
  for (const auto& r : c.rows) {
    std::snprintf(line, sizeof line, "%-11s %14s %14.8g %12.4g %8.3f  %s\n", r.metric.c_str(),
                  format_number(r.analytic).c_str(), r.sim_mean, r.sim_stderr, r.z, r.pass ? "pass" : "FAIL");
    out << line;
  }
  out << (c.all_pass() ? "all metrics within " : "some metrics outside ") << c.threshold << " sigma\n";
  return out.str();
}

void write_replication_csv(std::ostream& out, const QosEstimate& e) {
  out << "replication,seed,frames,offered,accepted,blocked,departed,arrived,dropped,served,"
         "queue_area,conn_area,sojourn,queue_start,queue_end,conns_start,conns_end\n";
  for (std::size_t i = 0; i < e.replications.size(); ++i) {
    const auto& r = e.replications[i];
    out << i << ',' << r.seed << ',' << r.frames << ',' << r.offered << ',' << r.accepted << ','
        << r.blocked << ',' << r.departed << ',' << r.arrived << ',' << r.dropped << ',' << r.served << ','
        << r.queue_area << ',' << r.conn_area << ',' << r.sojourn << ',' << r.queue_start << ','
        << r.queue_end << ',' << r.conns_start << ',' << r.conns_end << '\n';
  }
}

}  // namespace cacq
