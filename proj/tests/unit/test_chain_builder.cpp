#include "cacq/chain_builder.hpp"
#include "../support.hpp"

#include <doctest.h>

#include <sstream>

using namespace cacq;
using namespace cacq::testing;

TEST_SUITE("chain_builder") {

TEST_CASE("canonical index is a bijection") {
  const StateSpace sp{2, 4, 3};
  CHECK(sp.size() == 2 * 5 * 4);
  std::vector<int> seen(sp.size(), 0);
  for (int s = 0; s < 2; ++s)
    for (int x = 0; x <= 4; ++x)
      for (int c = 0; c <= 3; ++c) {
        const auto i = sp.index(s, x, c);
        CHECK(i == static_cast<std::size_t>((s * 5 + x) * 4 + c));
        ++seen[i];
        const auto st = sp.state(i);
        CHECK(st.phase == s);
        CHECK(st.queue == x);
        CHECK(st.conns == c);
      }
  for (int n : seen) CHECK(n == 1);
}

TEST_CASE("queue rows by hand") {
  const CapacityDistribution one{{0.0, 1.0}};
  SUBCASE("empty queue transmits nothing") {
    const Pmf arrivals{0.2, 0.3, 0.5};
    const auto row = queue_transition_row(0, arrivals, one, 1);
    CHECK(row.next[0] == doctest::Approx(0.2));
    CHECK(row.next[1] == doctest::Approx(0.8));
    CHECK(row.expected_overflow == doctest::Approx(0.5));
    CHECK(row.expected_arrivals == doctest::Approx(1.3));
  }
  SUBCASE("no arrivals, one departure") {
    const auto row = queue_transition_row(5, Pmf{1.0}, one, 8);
    CHECK(row.next[4] == 1.0);
    CHECK(total_mass(row.next) == 1.0);
  }
  SUBCASE("full buffer overflows by m - (X - x)") {
    const auto row = queue_transition_row(6, Pmf{0.0, 0.0, 1.0}, one, 6);
    CHECK(row.next[6] == 1.0);
    CHECK(row.expected_overflow == doctest::Approx(1.0));
  }
}

TEST_CASE("eight-state chain equals exhaustive enumeration") {
  const auto setup = tiny_grid().front();
  const StructuredChain chain(make_inputs(setup));
  REQUIRE(chain.space().size() == 8);
  const Matrix p = assemble(chain).dense();
  const BruteForce oracle = brute_force_kernel(chain.inputs());
  CHECK((p - oracle.p).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("tiny grid equals exhaustive enumeration, ledgers included") {
  for (const auto& setup : tiny_grid()) {
    const StructuredChain chain(make_inputs(setup));
    const TransitionMatrix t = assemble(chain);
    const BruteForce oracle = brute_force_kernel(chain.inputs());
    CHECK((t.dense() - oracle.p).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(max_abs_diff(chain.expected_overflow(), oracle.overflow) < 1e-14);
    CHECK(max_abs_diff(chain.expected_arrivals(), oracle.arrivals) < 1e-14);
    for (std::size_t r = 0; r < t.size; ++r) CHECK(std::abs(t.row_sum(r) - 1.0) < 1e-10);
    CHECK(*std::min_element(t.value.begin(), t.value.end()) >= 0.0);
    CHECK(*std::max_element(t.value.begin(), t.value.end()) <= 1.0);
  }
}

TEST_CASE("factored level kernels reproduce the matrix") {
  for (const auto& setup : tiny_grid()) {
    const StructuredChain chain(make_inputs(setup));
    const Matrix p = assemble(chain).dense();
    const auto& sp = chain.space();
    for (int c = 0; c <= sp.conn_cap; ++c) {
      const Matrix m = chain.level_kernel(c);
      for (Eigen::Index r = 0; r < m.rows(); ++r) CHECK(std::abs(m.row(r).sum() - 1.0) < 1e-12);
      for (int s = 0; s < sp.num_phases; ++s)
        for (int x = 0; x <= sp.queue_cap; ++x)
          for (int s2 = 0; s2 < sp.num_phases; ++s2)
            for (int x2 = 0; x2 <= sp.queue_cap; ++x2)
              for (int c2 = 0; c2 <= sp.conn_cap; ++c2) {
                const double q = chain.connection(x).transition(c, c2);
                const double expect = q * m(s * (sp.queue_cap + 1) + x, s2 * (sp.queue_cap + 1) + x2);
                CHECK(std::abs(p(sp.index(s, x, c), sp.index(s2, x2, c2)) - expect) < 1e-15);
              }
    }
  }
}

TEST_CASE("queue displacement stays inside its support") {
  for (const auto& setup : tiny_grid()) {
    const StructuredChain chain(make_inputs(setup));
    const TransitionMatrix t = assemble(chain);
    const auto& sp = chain.space();
    const int rmax = static_cast<int>(setup.capacity.size()) - 1;
    for (std::size_t r = 0; r < t.size; ++r) {
      const auto from = sp.state(r);
      const int lo = from.queue - std::min(rmax, from.queue);
      const int hi = std::min(sp.queue_cap, from.queue + from.conns * setup.max_batch);
      for (std::size_t k = t.row_start[r]; k < t.row_start[r + 1]; ++k) {
        const int to = sp.state(t.column[k]).queue;
        CHECK(to >= lo);
        CHECK(to <= hi);
      }
    }
  }
}

TEST_CASE("policy degeneracies hold entrywise") {
  TinySpec setup = tiny_grid()[3];
  setup.policy = CacPolicy::threshold(2);
  const Matrix th = assemble(StructuredChain(make_inputs(setup))).dense();
  setup.policy = CacPolicy::queue_aware(std::vector<double>(setup.queue_cap + 1, 1.0), 2);
  const Matrix qa = assemble(StructuredChain(make_inputs(setup))).dense();
  setup.policy = CacPolicy::none(2);
  const Matrix none = assemble(StructuredChain(make_inputs(setup))).dense();
  CHECK(th == qa);
  CHECK(qa == none);
}

TEST_CASE("connection marginal ignores the channel under queue-blind policies") {
  for (const auto& policy : {CacPolicy::threshold(2), CacPolicy::none(2)}) {
    TinySpec a = tiny_grid()[3];
    a.policy = policy;
    TinySpec b = a;
    b.capacity = {0.7, 0.1, 0.1, 0.1};
    const Matrix pa = assemble(StructuredChain(make_inputs(a))).dense();
    const Matrix pb = assemble(StructuredChain(make_inputs(b))).dense();
    const StateSpace sp{2, a.queue_cap, 2};
    for (std::size_t r = 0; r < sp.size(); ++r)
      for (int c2 = 0; c2 <= 2; ++c2) {
        double ma = 0.0, mb = 0.0;
        for (std::size_t k = 0; k < sp.size(); ++k)
          if (sp.state(k).conns == c2) {
            ma += pa(r, k);
            mb += pb(r, k);
          }
        CHECK(std::abs(ma - mb) < 1e-15);
      }
  }
}

TEST_CASE("memory budget is enforced before allocation") {
  TinySpec setup = tiny_grid()[2];
  const StructuredChain chain(make_inputs(setup));
  const TransitionMatrix t = assemble(chain);
  CHECK(estimate_nonzeros(chain) >= t.nonzeros());
  try {
    assemble(chain, {1024});
    FAIL("expected MemoryBudgetError");
  } catch (const MemoryBudgetError& e) {
    CHECK(e.states() == chain.space().size());
    CHECK(e.expected_nonzeros() == estimate_nonzeros(chain));
  }
}

TEST_CASE("reachability") {
  SUBCASE("tiny chains have one closed class") {
    for (const auto& setup : tiny_grid()) {
      const auto rep = reachability_check(assemble(StructuredChain(make_inputs(setup))));
      CHECK(rep.single_recurrent_class);
      CHECK(rep.closed_classes.size() == 1);
    }
  }
  SUBCASE("identity isolates every state") {
    const auto rep = reachability_check(TransitionMatrix::from_dense(Matrix::Identity(4, 4)));
    CHECK(rep.isolated.size() == 4);
    CHECK(rep.closed_classes.size() == 4);
    CHECK_FALSE(rep.single_recurrent_class);
  }
  SUBCASE("no connection arrivals leave c > 0 transient") {
    TinySpec setup = tiny_grid()[1];
    setup.policy = CacPolicy::none(2);
    setup.rho = 0.0;
    const StructuredChain chain(make_inputs(setup));
    const auto rep = reachability_check(assemble(chain));
    REQUIRE(rep.closed_classes.size() == 1);
    // without connections nothing arrives, so the queue drains for good
    REQUIRE(rep.closed_classes[0].size() == 1);
    CHECK(rep.closed_classes[0][0] == static_cast<int>(chain.space().index(0, 0, 0)));
    CHECK(rep.transient.size() == chain.space().size() - 1);
  }
}

TEST_CASE("matrix dump format") {
  const StructuredChain chain(make_inputs(tiny_grid().front()));
  const TransitionMatrix t = assemble(chain);
  std::ostringstream out;
  write_matrix(out, t);
  std::istringstream in(out.str());
  std::size_t n = 0, nnz = 0;
  in >> n >> nnz;
  CHECK(n == 8);
  CHECK(nnz == t.nonzeros());
  Matrix back = Matrix::Zero(8, 8);
  std::size_t r, c;
  double v;
  while (in >> r >> c >> v) back(r, c) = v;
  CHECK(back == t.dense());
}

TEST_CASE("fingerprints differ between chains") {
  const auto grid = tiny_grid();
  const StructuredChain a(make_inputs(grid[0])), b(make_inputs(grid[1])), a2(make_inputs(grid[0]));
  CHECK(a.fingerprint() == a2.fingerprint());
  CHECK(a.fingerprint() != b.fingerprint());
  CHECK(assemble(a).chain_fingerprint == a.fingerprint());
}

TEST_CASE("rejects an acceptance vector of the wrong length") {
  TinySpec setup = tiny_grid()[0];
  setup.policy = CacPolicy::queue_aware(std::vector<double>(setup.queue_cap, 1.0), 1);
  CHECK_THROWS_AS(StructuredChain(make_inputs(setup)), std::invalid_argument);
}

}
