#include "cacq/linalg.hpp"

#include <doctest.h>

using namespace cacq;

TEST_SUITE("linalg") {

TEST_CASE("strongly connected components of a small digraph") {
  // 0 <-> 1 -> 2 <-> 3, 4 isolated
  const Digraph g{{1}, {0, 2}, {3}, {2}, {}};
  auto sccs = strongly_connected_components(g);
  std::sort(sccs.begin(), sccs.end());
  REQUIRE(sccs.size() == 3);
  CHECK(sccs[0] == std::vector<int>{0, 1});
  CHECK(sccs[1] == std::vector<int>{2, 3});
  CHECK(sccs[2] == std::vector<int>{4});

  auto closed = closed_classes(g);
  std::sort(closed.begin(), closed.end());
  REQUIRE(closed.size() == 2);
  CHECK(closed[0] == std::vector<int>{2, 3});
  CHECK(closed[1] == std::vector<int>{4});

  const auto reach = reachable_from(g, 0);
  CHECK(reach == std::vector<bool>{true, true, true, true, false});
}

TEST_CASE("deep chain does not overflow the stack") {
  const int n = 200000;
  Digraph g(n);
  for (int i = 0; i + 1 < n; ++i) g[i].push_back(i + 1);
  g[n - 1].push_back(0);
  CHECK(strongly_connected_components(g).size() == 1);
}

TEST_CASE("GTH on two-state chains") {
  Matrix p(2, 2);
  p << 0.9, 0.1, 0.5, 0.5;
  const Vector pi = gth_stationary(p);
  CHECK(pi(0) == doctest::Approx(5.0 / 6.0).epsilon(1e-14));
  CHECK(pi(1) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));

  // generator with rates a (0->1) and b (1->0): pi = (b, a) / (a + b)
  Matrix q(2, 2);
  q << -3.0, 3.0, 7.0, -7.0;
  const Vector g = gth_stationary(q);
  CHECK(g(0) == doctest::Approx(0.7).epsilon(1e-14));
  CHECK(g(1) == doctest::Approx(0.3).epsilon(1e-14));
}

TEST_CASE("GTH gives transient states zero mass") {
  Matrix p(3, 3);
  p << 0.5, 0.5, 0.0,  //
      0.0, 0.2, 0.8,   //
      0.0, 0.6, 0.4;
  const Vector pi = gth_stationary(p);
  CHECK(pi(0) == 0.0);
  CHECK(pi(1) == doctest::Approx(0.6 / 1.4).epsilon(1e-14));
  CHECK(pi(2) == doctest::Approx(0.8 / 1.4).epsilon(1e-14));
}

TEST_CASE("GTH rejects two closed classes and names them") {
  const Matrix id = Matrix::Identity(3, 3);
  try {
    gth_stationary(id);
    FAIL("expected ReducibleChainError");
  } catch (const ReducibleChainError& e) {
    CHECK(e.classes().size() >= 2);
    CHECK(std::string(e.what()).find("{") != std::string::npos);
  }
}

TEST_CASE("fingerprint is deterministic and content sensitive") {
  Fingerprint a, b, c;
  a.add(1.5);
  a.add(std::string_view("x"));
  b.add(1.5);
  b.add(std::string_view("x"));
  c.add(1.5);
  c.add(std::string_view("y"));
  CHECK(a.value() == b.value());
  CHECK(a.value() != c.value());
  CHECK(a.hex().size() == 16);
}

}
