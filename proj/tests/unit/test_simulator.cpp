#include "cacq/simulator.hpp"
#include "../support.hpp"

#include <doctest.h>

#include <sstream>

using namespace cacq;
using namespace cacq::testing;

namespace {

SimConfig tiny_sim(const TinySpec& setup, std::uint64_t frames = 20000, int reps = 4) {
  SimConfig c;
  c.model = make_inputs(setup);
  c.warmup_frames = 1000;
  c.measure_frames = frames;
  c.replications = reps;
  c.base_seed = 42;
  c.fingerprint = "f";
  return c;
}

}  // namespace

TEST_SUITE("simulator") {

TEST_CASE("configuration limits") {
  auto c = tiny_sim(tiny_grid()[0]);
  c.measure_frames = 999;
  CHECK_THROWS(c.validate());
  c.measure_frames = 1000;
  c.replications = 2;
  CHECK_THROWS(c.validate());
}

TEST_CASE("no connections, nothing happens") {
  TinySpec setup = tiny_grid()[1];
  setup.rho = 0.0;
  const auto est = simulate(tiny_sim(setup));
  for (const char* m : {"n_conn", "n_queue", "p_drop", "throughput", "delay", "lambda_bar"}) {
    CHECK(est.metric(m).mean == 0.0);
    CHECK(est.metric(m).std_error == 0.0);
  }
  CHECK_FALSE(est.p_block.defined());
}

TEST_CASE("ample capacity never drops") {
  TinySpec setup = tiny_grid()[4];  // c <= 2, A = 2
  setup.capacity = {0.0, 0.0, 0.0, 0.0, 1.0};
  setup.queue_cap = 50;
  const auto est = simulate(tiny_sim(setup));
  CHECK(est.p_drop.mean == 0.0);
  for (const auto& r : est.replications) CHECK(r.dropped == 0);
}

TEST_CASE("conservation in every replication") {
  for (const auto& setup : tiny_grid()) {
    const auto est = simulate(tiny_sim(setup));
    for (const auto& r : est.replications) {
      CHECK(static_cast<std::int64_t>(r.arrived) - static_cast<std::int64_t>(r.served + r.dropped) ==
            r.queue_end - r.queue_start);
      CHECK(static_cast<std::int64_t>(r.accepted) - static_cast<std::int64_t>(r.departed) ==
            r.conns_end - r.conns_start);
      CHECK(r.accepted + r.blocked == r.offered);
      CHECK(r.frames == 20000);
    }
  }
}

TEST_CASE("seeded runs repeat exactly") {
  const auto c = tiny_sim(tiny_grid()[3]);
  const auto a = simulate(c);
  const auto b = simulate(c);
  std::ostringstream sa, sb;
  write_replication_csv(sa, a);
  write_replication_csv(sb, b);
  CHECK(sa.str() == sb.str());
  CHECK(replication_seed(1, 0) != replication_seed(1, 1));
  CHECK(replication_seed(1, 0) != replication_seed(2, 0));
}

TEST_CASE("interval is 1.96 standard errors") {
  const auto est = simulate(tiny_sim(tiny_grid()[2]));
  for (const char* m : kComparedMetrics) {
    const auto& e = est.metric(m);
    CHECK(e.ci_half_width == doctest::Approx(1.96 * e.std_error).epsilon(1e-15));
    CHECK(e.samples == 4);
  }
}

TEST_CASE("time-average queue obeys Little's law inside the simulation") {
  const auto est = simulate(tiny_sim(tiny_grid()[3], 100000, 8));
  // per replication: area = sojourn up to the packets still queued at the ends
  for (const auto& r : est.replications) {
    const double little = static_cast<double>(r.sojourn) / r.frames;
    const double area = static_cast<double>(r.queue_area) / r.frames;
    CHECK(std::abs(little - area) < 0.01 * area + 1e-3);
  }
}

TEST_CASE("tiny configurations agree with the analytic pipeline") {
  TinySpec setup;
  setup.process = BatchArrivalProcess::poisson(15000, 1);
  setup.max_batch = 2;
  setup.queue_cap = 5;
  setup.policy = CacPolicy::threshold(2);
  setup.rho = 12000;
  setup.mean_duration = 0.0005;
  setup.capacity = {0.0, 1.0};
  auto config = tiny_sim(setup, 100000, 10);
  const StructuredChain chain(config.model);
  QosReport report = compute_report(solve_direct(assemble(chain)), chain);
  report.fingerprint = config.fingerprint;
  const auto est = simulate(config);
  const auto cmp = compare(report, est);
  INFO(format_comparison(cmp));
  CHECK(cmp.all_pass());

  SUBCASE("a 10 sigma shift is caught") {
    QosReport bad = report;
    bad.n_queue += 10.0 * est.n_queue.std_error;
    CHECK_FALSE(compare(bad, est).all_pass());
  }
  SUBCASE("foreign estimates are refused") {
    QosReport other = report;
    other.fingerprint = "g";
    CHECK_THROWS_AS(compare(other, est), FingerprintMismatchError);
  }
}

TEST_CASE("degenerate scenario compares with z = 0") {
  TinySpec setup = tiny_grid()[0];
  setup.rho = 0.0;
  auto config = tiny_sim(setup);
  const StructuredChain chain(config.model);
  QosReport report = compute_report(solve_direct(assemble(chain)), chain);
  report.fingerprint = config.fingerprint;
  const auto cmp = compare(report, simulate(config));
  CHECK(cmp.all_pass());
  for (const auto& row : cmp.rows) CHECK(row.z == 0.0);
}

}
