#include "cacq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace cacq {

namespace {

void check_ledger(const StationaryDistribution& dist, const StructuredChain& chain) {
  if (dist.pi.size() != chain.space().size())
    throw LedgerMismatchError("stationary vector has " + std::to_string(dist.pi.size()) +
                              " entries, chain has " + std::to_string(chain.space().size()) + " states");
  if (dist.chain_fingerprint != 0 && dist.chain_fingerprint != chain.fingerprint())
    throw LedgerMismatchError("stationary vector was solved on a different chain");
}

}  // namespace

double marginal(const StationaryDistribution& dist, const StateSpace& space, int phase, int queue, int conns) {
  if (phase < 0 || phase >= space.num_phases || queue < 0 || queue > space.queue_cap || conns < 0 ||
      conns > space.conn_cap)
    throw std::out_of_range("state (" + std::to_string(phase + 1) + "," + std::to_string(queue) + "," +
                            std::to_string(conns) + ") outside the state space");
  return dist.pi.at(space.index(phase, queue, conns));
}

double blocking_probability(const StationaryDistribution& dist, const StructuredChain& chain) {
  check_ledger(dist, chain);
  const auto& sp = chain.space();
  const double offered = chain.connection(0).expected_offered;
  if (offered <= 0.0) return 0.0;
  double blocked = 0.0;
  for (std::size_t i = 0; i < sp.size(); ++i) {
    if (dist.pi[i] == 0.0) continue;
    const auto st = sp.state(i);
    blocked += dist.pi[i] * chain.connection(st.queue).expected_blocked[st.conns];
  }
  return std::clamp(blocked / offered, 0.0, 1.0);
}

double single_arrival_blocking(const StationaryDistribution& dist, const StructuredChain& chain) {
  check_ledger(dist, chain);
  const auto& sp = chain.space();
  double p = 0.0;
  for (std::size_t i = 0; i < sp.size(); ++i) {
    const auto st = sp.state(i);
    p += (1.0 - acceptance_probability(chain.policy(), st.queue, st.conns)) * dist.pi[i];
  }
  return std::clamp(p, 0.0, 1.0);
}

double mean_connections(const StationaryDistribution& dist, const StateSpace& space) {
  double m = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i) m += space.state(i).conns * dist.pi[i];
  return m;
}

double mean_queue_length(const StationaryDistribution& dist, const StateSpace& space) {
  double m = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i) m += space.state(i).queue * dist.pi[i];
  return m;
}

DropMetrics drop_metrics(const StationaryDistribution& dist, const StructuredChain& chain) {
  check_ledger(dist, chain);
  DropMetrics d;
  const auto& overflow = chain.expected_overflow();
  const auto& arrivals = chain.expected_arrivals();
  for (std::size_t i = 0; i < dist.pi.size(); ++i) {
    d.n_drop += dist.pi[i] * overflow[i];
    d.lambda_bar += dist.pi[i] * arrivals[i];
  }
  d.p_drop = d.lambda_bar > 0.0 ? std::clamp(d.n_drop / d.lambda_bar, 0.0, 1.0) : 0.0;
  return d;
}

ThroughputDelay throughput_and_delay(double n_queue, double lambda_bar, double p_drop) {
  ThroughputDelay t;
  t.throughput = lambda_bar * (1.0 - p_drop);
  if (n_queue == 0.0)
    t.delay = 0.0;
  else if (t.throughput > 0.0)
    t.delay = n_queue / t.throughput;
  return t;
}

QosReport compute_report(const StationaryDistribution& dist, const StructuredChain& chain,
                         const MetricOptions& options) {
  check_ledger(dist, chain);
  const auto& sp = chain.space();
  QosReport r;
  r.policy = chain.policy().label();
  r.rho = chain.inputs().connections.arrival_rate;
  r.p_block = blocking_probability(dist, chain);
  r.p_block_pasta = single_arrival_blocking(dist, chain);
  r.n_conn = mean_connections(dist, sp);
  r.n_queue = mean_queue_length(dist, sp);
  const DropMetrics d = drop_metrics(dist, chain);
  r.n_drop = d.n_drop;
  r.lambda_bar = d.lambda_bar;
  r.p_drop = d.p_drop;

  // lambda_BMAP per frame: per-connection frame mean under the stationary phase law.
  const Vector phase_pi = gth_stationary(chain.phase_step());
  double per_connection = 0.0;
  for (int s = 0; s < sp.num_phases; ++s) per_connection += phase_pi(s) * chain.per_connection_mean(s);
  r.lambda_bar_rate = per_connection * r.n_conn;

  const ThroughputDelay td =
      throughput_and_delay(r.n_queue, options.single_connection_throughput ? per_connection : r.lambda_bar, r.p_drop);
  r.throughput = td.throughput;
  r.delay = td.delay;
  r.residual = dist.residual;
  r.solver = dist.method;
  return r;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string format_number(const std::optional<double>& v) { return v ? format_number(*v) : "nan"; }

std::string csv_header() {
  return "policy,rho,snr_db,p_block,n_conn,n_queue,n_drop,lambda_bar,p_drop,throughput,delay,fingerprint";
}

std::string csv_row(const QosReport& r) {
  std::ostringstream out;
  out << r.policy << ',' << format_number(r.rho) << ',' << format_number(r.snr_db) << ','
      << format_number(r.p_block) << ',' << format_number(r.n_conn) << ',' << format_number(r.n_queue)
      << ',' << format_number(r.n_drop) << ',' << format_number(r.lambda_bar) << ','
      << format_number(r.p_drop) << ',' << format_number(r.throughput) << ',' << format_number(r.delay)
      << ',' << r.fingerprint;
  return out.str();
}

std::string text_report(const QosReport& r) {
  std::ostringstream out;
  out << "policy                  " << r.policy << '\n'
      << "connection arrival rate " << format_number(r.rho) << " /min\n"
      << "average SNR             " << (r.snr_db ? format_number(r.snr_db) + " dB" : "fixed capacity")
      << '\n'
      << "blocking probability    " << format_number(r.p_block) << '\n'
      << "  single-arrival form   " << format_number(r.p_block_pasta) << '\n'
      << "ongoing connections     " << format_number(r.n_conn) << '\n'
      << "queue length            " << format_number(r.n_queue) << " packets\n"
      << "dropped per frame       " << format_number(r.n_drop) << " packets\n"
      << "arrivals per frame      " << format_number(r.lambda_bar) << " packets\n"
      << "  rate * connections    " << format_number(r.lambda_bar_rate) << " packets\n"
      << "drop probability        " << format_number(r.p_drop) << '\n'
      << "throughput              " << format_number(r.throughput) << " packets/frame\n"
      << "delay                   " << (r.delay ? format_number(*r.delay) + " frames" : "undefined") << '\n'
      << "solver                  " << r.solver << " (residual " << format_number(r.residual) << ")\n"
      << "fingerprint             " << r.fingerprint << '\n';
  return out.str();
}

}  // namespace cacq
