#include "cacq/connection_dynamics.hpp"
#include "../support.hpp"

#include <doctest.h>

using namespace cacq;
using cacq::testing::binomial_pmf;
using cacq::testing::poisson_pmf;

namespace {

ConnectionParams params(double rho, double duration, int cap = 3) {
  ConnectionParams p;
  p.arrival_rate = rho;
  p.mean_duration = duration;
  p.frame_length = 1.0 / 60000.0;
  p.max_arrivals_per_frame = cap;
  return p;
}

// (c -> c') by enumerating arrival counts, each accept/reject sequence and departures.
Matrix enumerate_step(const CacPolicy& policy, int x, const ConnectionParams& p) {
  const int C = policy.connection_cap();
  const double q = -std::expm1(-p.frame_length / p.mean_duration);
  const double mean = p.arrival_rate * p.frame_length;
  Matrix m = Matrix::Zero(C + 1, C + 1);
  for (int c = 0; c <= C; ++c) {
    double head = 0.0;
    for (int n = 0; n <= p.max_arrivals_per_frame; ++n) {
      const double pn = n < p.max_arrivals_per_frame ? poisson_pmf(mean, n) : 1.0 - head;
      head += pn;
      for (int mask = 0; mask < (1 << n); ++mask) {
        double pr = pn;
        int k = 0;
        for (int j = 0; j < n; ++j) {
          const double a = acceptance_probability(policy, x, c + k);
          if (mask >> j & 1) {
            pr *= a;
            ++k;
          } else {
            pr *= 1.0 - a;
          }
        }
        for (int d = 0; d <= c; ++d) m(c, std::clamp(c + k - d, 0, C)) += pr * binomial_pmf(c, d, q);
      }
    }
  }
  return m;
}

}  // namespace

TEST_SUITE("connection_dynamics") {

TEST_CASE("Poisson frame probabilities") {
  CHECK(poisson_frame_probability(0.0, 1.0, 0) == 1.0);
  CHECK(poisson_frame_probability(0.0, 1.0, 3) == 0.0);
  const double t = 1.0 / 60000.0;
  CHECK(std::abs(poisson_frame_probability(0.9, t, 0) - std::exp(-1.5e-5)) < 1e-15);
  CHECK(std::abs(poisson_frame_probability(0.9, t, 1) - 1.5e-5 * std::exp(-1.5e-5)) < 1e-15);
  // f_n = e^{-m} m^n / n! with m = 2.5
  CHECK(poisson_frame_probability(2.5, 1.0, 4) == doctest::Approx(std::exp(-2.5) * 39.0625 / 24.0).epsilon(1e-14));
  double sum = 0.0;
  for (int n = 0; n < 200; ++n) sum += poisson_frame_probability(30.0, 1.0, n);
  CHECK(std::abs(sum - 1.0) < 1e-12);
}

TEST_CASE("capped Poisson folds the tail") {
  const Pmf p = capped_poisson(0.7, 2);
  REQUIRE(p.size() == 3);
  CHECK(p[0] == doctest::Approx(std::exp(-0.7)).epsilon(1e-15));
  CHECK(p[2] == doctest::Approx(1.0 - std::exp(-0.7) * 1.7).epsilon(1e-13));
  // tiny means keep full relative accuracy in the folded cell
  const Pmf tiny = capped_poisson(1.5e-5, 1);
  CHECK(tiny[1] == doctest::Approx(-std::expm1(-1.5e-5)).epsilon(1e-12));
}

TEST_CASE("departures are binomial") {
  const auto p = params(0.9, 20);
  CHECK(departure_distribution(0, p) == Pmf{1.0});
  const Pmf one = departure_distribution(1, p);
  CHECK(one[1] == doctest::Approx(-std::expm1(-1.0 / 1200000.0)).epsilon(1e-14));
  const Pmf many = departure_distribution(7, params(1, 0.001));
  const double q = -std::expm1(-1.0 / 60.0);
  for (int d = 0; d <= 7; ++d) CHECK(many[d] == doctest::Approx(binomial_pmf(7, d, q)).epsilon(1e-12));
  const Pmf fast = departure_distribution(4, params(1, 1e-9));
  CHECK(fast[4] == doctest::Approx(1.0));
}

TEST_CASE("acceptance rules") {
  const auto qa = CacPolicy::queue_aware(100, 300, 70);
  CHECK(acceptance_probability(qa, 99, 0) == 1.0);
  CHECK(acceptance_probability(qa, 100, 0) == 0.0);
  CHECK(acceptance_probability(qa, 99, 70) == 0.0);
  const auto th = CacPolicy::threshold(10);
  CHECK(acceptance_probability(th, 0, 9) == 1.0);
  CHECK(acceptance_probability(th, 0, 10) == 0.0);
  const auto none = CacPolicy::none(70);
  CHECK(acceptance_probability(none, 0, 69) == 1.0);
  CHECK(acceptance_probability(none, 0, 70) == 0.0);
  CHECK(th.connection_cap() == 10);
  CHECK(qa.connection_cap() == 70);
  CHECK(qa.label() == "queue_aware(100)");
  CHECK(th.label() == "threshold(10)");
  CHECK(none.label() == "none(70)");
}

TEST_CASE("invalid policies") {
  CHECK_THROWS(CacPolicy::threshold(0));
  CHECK_THROWS(CacPolicy::none(0));
  CHECK_THROWS(CacPolicy::queue_aware(std::vector<double>{0.5, 1.2}, 3));
  CHECK_THROWS(CacPolicy::queue_aware(std::vector<double>{0.5, 1.0}, 0));
}

TEST_CASE("transition matrices match exhaustive enumeration") {
  const auto p = params(9000, 0.002);  // 0.15 arrivals per frame
  const std::vector<double> alpha{1.0, 0.5, 0.25, 0.0};
  const CacPolicy policies[] = {CacPolicy::threshold(3), CacPolicy::none(4), CacPolicy::queue_aware(alpha, 3)};
  for (const auto& policy : policies)
    for (int x = 0; x < 4; ++x) {
      const auto step = connection_step(policy, x, p);
      CHECK((step.transition - enumerate_step(policy, x, p)).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("row-stochastic, nonnegative and capped") {
  for (double rho : {0.0, 0.9, 600.0, 60000.0})
    for (const auto& policy : {CacPolicy::threshold(5), CacPolicy::none(3), CacPolicy::queue_aware(2, 4, 6)}) {
      for (int x = 0; x <= 4; ++x) {
        const Matrix m = connection_transition_matrix(policy, x, params(rho, 0.01));
        CHECK(m.minCoeff() >= 0.0);
        for (Eigen::Index r = 0; r < m.rows(); ++r) CHECK(std::abs(m.row(r).sum() - 1.0) < 1e-12);
      }
    }
  // From c = C nothing is admitted, so staying means no departure.
  const Matrix m = connection_transition_matrix(CacPolicy::threshold(4), 0, params(60000, 0.01));
  CHECK(m.rows() == 5);
  CHECK(m(4, 4) == doctest::Approx(std::exp(-4.0 / 600.0)).epsilon(1e-13));
}

TEST_CASE("degenerate steps") {
  const Matrix still = connection_transition_matrix(CacPolicy::threshold(3), 0, params(0.0, 1e12));
  CHECK((still - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-15);
  const std::vector<double> closed{0.0, 0.0, 0.0};
  const Matrix shut = connection_transition_matrix(CacPolicy::queue_aware(closed, 3), 1, params(60000, 0.01));
  for (int c = 0; c < 3; ++c) CHECK(shut.row(c).tail(3 - c).sum() == 0.0);
}

TEST_CASE("queue-aware with alpha 1 equals no admission control at the same cap") {
  const auto p = params(12000, 0.01);
  const auto qa = CacPolicy::queue_aware(std::vector<double>(6, 1.0), 4);
  for (int x = 0; x <= 5; ++x)
    CHECK(connection_transition_matrix(qa, x, p) == connection_transition_matrix(CacPolicy::none(4), x, p));
}

TEST_CASE("expected blocking ledger") {
  // Threshold(1) from c = 1: every arrival is blocked.
  const auto p = params(12000, 0.01);
  const auto step = connection_step(CacPolicy::threshold(1), 0, p);
  CHECK(step.expected_blocked[1] == doctest::Approx(step.expected_offered).epsilon(1e-14));
  CHECK(step.expected_blocked[0] < step.expected_offered);
}

TEST_CASE("raising rho moves mass upward in every row") {
  const std::vector<double> grid{0.1, 1, 10, 100, 1000, 10000, 60000};
  for (const auto& policy : {CacPolicy::threshold(4), CacPolicy::queue_aware(2, 3, 5), CacPolicy::none(4)})
    for (int x = 0; x <= 3; ++x) {
      double last_row_up[8] = {};
      for (double rho : grid) {
        const Matrix m = connection_transition_matrix(policy, x, params(rho, 0.05));
        for (Eigen::Index c = 0; c < m.rows(); ++c) {
          const double up = m.row(c).tail(m.cols() - c - 1).sum();
          CHECK(up >= last_row_up[c] - 1e-15);
          last_row_up[c] = up;
        }
      }
    }
}

}
