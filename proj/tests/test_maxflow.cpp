#include <doctest.h>

#include <array>
#include <cmath>
#include <tuple>
#include <limits>

#include "voxsel/common.hpp"
#include "voxsel/maxflow.hpp"

using namespace voxsel;

namespace {

// Minimum s-t cut by enumerating the side of every inner node.
double brute_force_cut(int n, const std::vector<std::array<double, 2>>& terminal,
                       const std::vector<std::tuple<int, int, double, double>>& edges) {
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    double cut = 0;
    for (int i = 0; i < n; ++i) cut += (mask >> i & 1) ? terminal[i][1] : terminal[i][0];
    for (const auto& [u, v, a, b] : edges) {
      const bool su = mask >> u & 1, sv = mask >> v & 1;
      if (su && !sv) cut += a;
      if (sv && !su) cut += b;
    }
    best = std::min(best, cut);
  }
  return best;
}

}  // namespace

TEST_CASE("max-flow on small graphs") {
  SUBCASE("a single node cuts its cheaper terminal arc") {
    MaxFlow g(1);
    g.add_terminal(0, 3, 5);
    CHECK(g.solve() == 3);
    CHECK_FALSE(g.source_side(0));
  }
  SUBCASE("terminal capacities accumulate") {
    MaxFlow g(1);
    g.add_terminal(0, 3, 1);
    g.add_terminal(0, 1, 4);
    CHECK(g.solve() == 4);
    CHECK_FALSE(g.source_side(0));
  }
  SUBCASE("chain is limited by its weakest edge") {
    MaxFlow g(3);
    g.add_terminal(0, 10, 0);
    g.add_terminal(2, 0, 10);
    g.add_edge(0, 1, 4, 0);
    g.add_edge(1, 2, 2, 0);
    CHECK(g.solve() == 2);
    CHECK(g.source_side(0));
    CHECK(g.source_side(1));
    CHECK_FALSE(g.source_side(2));
  }
  SUBCASE("infinite arcs are never cut") {
    const double inf = std::numeric_limits<double>::infinity();
    MaxFlow g(2);
    g.add_terminal(0, inf, 0);
    g.add_terminal(1, 0, 7);
    g.add_edge(0, 1, 3, 3);
    CHECK(g.solve() == 3);
    CHECK(g.source_side(0));
    CHECK_FALSE(g.source_side(1));
  }
}

TEST_CASE("max-flow equals the brute-force minimum cut") {
  Rng rng(77);
  for (int trial = 0; trial < 150; ++trial) {
    const int n = uniform_int(rng, 1, 10);
    std::vector<std::array<double, 2>> terminal(static_cast<std::size_t>(n));
    std::vector<std::tuple<int, int, double, double>> edges;
    MaxFlow g(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      terminal[i] = {uniform(rng, 0, 5), uniform(rng, 0, 5)};
      g.add_terminal(static_cast<std::size_t>(i), terminal[i][0], terminal[i][1]);
    }
    const int m = uniform_int(rng, 0, 2 * n);
    for (int k = 0; k < m && n > 1; ++k) {
      const int u = uniform_int(rng, 0, n - 1);
      int v = uniform_int(rng, 0, n - 2);
      if (v >= u) ++v;
      const double a = uniform(rng, 0, 3), b = uniform(rng, 0, 3);
      edges.emplace_back(u, v, a, b);
      g.add_edge(static_cast<std::size_t>(u), static_cast<std::size_t>(v), a, b);
    }
    const double flow = g.solve();
    REQUIRE(flow == doctest::Approx(brute_force_cut(n, terminal, edges)).epsilon(1e-12));

    double cut = 0;
    for (int i = 0; i < n; ++i) cut += g.source_side(static_cast<std::size_t>(i)) ? terminal[i][1] : terminal[i][0];
    for (const auto& [u, v, a, b] : edges) {
      const bool su = g.source_side(static_cast<std::size_t>(u)), sv = g.source_side(static_cast<std::size_t>(v));
      if (su && !sv) cut += a;
      if (sv && !su) cut += b;
    }
    REQUIRE(cut == doctest::Approx(flow).epsilon(1e-12));
  }
}

TEST_CASE("max-flow rejects bad input") {
  MaxFlow g(2);
  CHECK_THROWS_AS(g.add_terminal(2, 1, 1), Error);
  CHECK_THROWS_AS(g.add_edge(0, 0, 1, 1), Error);
  CHECK_THROWS_AS(g.add_edge(0, 1, -1, 1), Error);
}
