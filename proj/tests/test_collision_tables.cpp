#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <random>

#include "cplp/collision_tables.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace cplp;

TEST_CASE("edge-vertex unsafe traversal offsets") {
  SUBCASE("vertex beside the middle of the segment") {
    const auto tau = unsafe_tau_edge_vertex({-3, 0}, {3, 0}, {0, 0}, 1.0, 1.0);
    REQUIRE(tau.size() == 1);
    CHECK(tau[0].lo == doctest::Approx(1.0));
    CHECK(tau[0].hi == doctest::Approx(5.0));
  }
  SUBCASE("vertex out of range") {
    CHECK(unsafe_tau_edge_vertex({-3, 5}, {3, 5}, {0, 0}, 1.0, 1.0).empty());
  }
  SUBCASE("vertex at the segment source is clipped to the traversal") {
    const auto tau = unsafe_tau_edge_vertex({0, 0}, {10, 0}, {0, 0}, 1.0, 1.0);
    REQUIRE(tau.size() == 1);
    CHECK(tau[0].lo == 0.0);
    CHECK(tau[0].hi == doctest::Approx(2.0));
  }
  SUBCASE("speed scales offsets") {
    const auto tau = unsafe_tau_edge_vertex({-3, 0}, {3, 0}, {0, 0}, 1.0, 2.0);
    REQUIRE(tau.size() == 1);
    CHECK(tau[0].lo == doctest::Approx(0.5));
    CHECK(tau[0].hi == doctest::Approx(2.5));
  }
  SUBCASE("tangent at exactly 2r is not a collision") {
    CHECK(unsafe_tau_edge_vertex({-3, 2}, {3, 2}, {0, 0}, 1.0, 1.0).empty());
  }
}

TEST_CASE("edge-edge unsafe start offsets") {
  SUBCASE("same segment, same direction") {
    const auto d = unsafe_delta_edge_edge({0, 0}, {10, 0}, {0, 0}, {10, 0}, 1.0, 1.0);
    REQUIRE(d.size() == 1);
    CHECK(d[0].lo == doctest::Approx(-2.0).epsilon(1e-9));
    CHECK(d[0].hi == doctest::Approx(2.0).epsilon(1e-9));
  }
  SUBCASE("parallel segments five apart") {
    CHECK(unsafe_delta_edge_edge({0, 0}, {10, 0}, {0, 5}, {10, 5}, 1.0, 1.0).empty());
  }
  SUBCASE("head-on on the same segment") {
    const auto d = unsafe_delta_edge_edge({0, 0}, {10, 0}, {10, 0}, {0, 0}, 1.0, 1.0);
    REQUIRE(d.size() == 1);
    CHECK(d[0].contains(0.0));
    // Meeting while both move is possible for every overlap of the traversals.
    CHECK(d[0].lo == doctest::Approx(-10.0));
    CHECK(d[0].hi == doctest::Approx(10.0));
  }
  SUBCASE("perpendicular crossing") {
    // Both reach the crossing point (0,0) at t = 5 when delta = 0.
    const auto d = unsafe_delta_edge_edge({-5, 0}, {5, 0}, {0, -5}, {0, 5}, 1.0, 1.0);
    REQUIRE(d.size() == 1);
    // Relative distance at the best instant is |delta| / sqrt(2) < 2.
    CHECK(d[0].lo == doctest::Approx(-2.0 * std::sqrt(2.0)).epsilon(1e-6));
    CHECK(d[0].hi == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-6));
  }
}

TEST_CASE("edge-edge offsets are antisymmetric") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 8.0);
  int nonempty = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const Point a1{u(rng), u(rng)};
    const Point b1{u(rng), u(rng)};
    const Point a2{u(rng), u(rng)};
    const Point b2{u(rng), u(rng)};
    const auto d12 = unsafe_delta_edge_edge(a1, b1, a2, b2, 1.0, 1.0);
    const auto d21 = unsafe_delta_edge_edge(a2, b2, a1, b1, 1.0, 1.0);
    REQUIRE(d12.size() == d21.size());
    if (!d12.empty()) {
      ++nonempty;
      CHECK(d12[0].lo == doctest::Approx(-d21[0].hi).epsilon(1e-9));
      CHECK(d12[0].hi == doctest::Approx(-d21[0].lo).epsilon(1e-9));
    }
  }
  CHECK(nonempty > 50);
}

TEST_CASE("precompute on small graphs") {
  SUBCASE("two far-apart edges do not interact") {
    auto g = cplp::testing::make_roadmap({{0, 0}, {2, 0}, {2, 20}, {4, 20}}, {{0, 1}, {1, 2}, {2, 3}});
    const auto t = precompute(*g);
    for (EdgeId e1 : {0, 1}) {
      for (EdgeId e2 : {4, 5}) {
        CHECK_FALSE(t.edge_edge(e1, e2));
        CHECK_FALSE(t.edge_edge(e2, e1));
      }
    }
  }
  SUBCASE("triangle with distant vertices has no vertex-vertex pairs") {
    auto g = cplp::testing::make_roadmap({{0, 0}, {5, 0}, {0, 5}}, {{0, 1}, {1, 2}, {2, 0}});
    const auto t = precompute(*g);
    CHECK(t.num_vertex_vertex_entries() == 0);
    CHECK(t.vertex_vertex(1, 1));
  }
  SUBCASE("mirrored entries and reversed traversals") {
    auto g = cplp::testing::make_roadmap({{0, 0}, {10, 0}, {5, 1}}, {{0, 1}, {1, 2}});
    const auto t = precompute(*g);
    // Vertex 2 is within 2 of points on segment 0 around x = 5.
    const auto fwd = t.edge_vertex(0, 2);
    const auto rev = t.edge_vertex(1, 2);
    REQUIRE(fwd);
    REQUIRE(rev);
    CHECK(fwd->lo == doctest::Approx(5.0 - std::sqrt(3.0) - kPad));
    CHECK(rev->lo == doctest::Approx(10.0 - fwd->hi));
    for (EdgeId e1 = 0; e1 < 4; ++e1) {
      for (EdgeId e2 = 0; e2 < 4; ++e2) {
        const auto x = t.edge_edge(e1, e2);
        const auto y = t.edge_edge(e2, e1);
        REQUIRE(x.has_value() == y.has_value());
        if (x) {
          CHECK(x->lo == doctest::Approx(-y->hi).epsilon(1e-12));
          CHECK(x->hi == doctest::Approx(-y->lo).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("precompute finds every interacting pair and agrees with the sampling oracle") {
  std::mt19937_64 rng(42);
  auto g = cplp::testing::random_roadmap(rng, 200, 3.0 * std::sqrt(200.0), 6);
  const auto t = precompute(*g);
  const double r = g->agent_radius();
  const double s = g->agent_speed();

  // Completeness against an all-pairs scan.
  for (VertexId v = 0; v < static_cast<VertexId>(g->num_vertices()); ++v) {
    for (EdgeId e = 0; e < static_cast<EdgeId>(g->num_edges()); ++e) {
      const Edge& edge = g->edge(e);
      const bool near = point_segment_distance(g->position(v), g->position(edge.from), g->position(edge.to)) < 2 * r;
      if (near && !unsafe_tau_edge_vertex(g->position(edge.from), g->position(edge.to), g->position(v), r, s).empty()) {
        CHECK(t.edge_vertex(e, v).has_value());
      }
    }
    for (VertexId u = 0; u < static_cast<VertexId>(g->num_vertices()); ++u) {
      CHECK(t.vertex_vertex(u, v) == (u == v || distance(g->position(u), g->position(v)) < 2 * r));
    }
  }
  double worst = 0.0;
  bool sound = true;
  for (EdgeId e = 0; e < static_cast<EdgeId>(g->num_edges()); ++e) {
    const Edge& x = g->edge(e);
    for (const auto& [v, tau] : t.vertices_near_edge(e)) {
      const auto a = oracle::check_edge_vertex(g->position(x.from), g->position(x.to), g->position(v), r, s, tau);
      sound = sound && a.sound;
      worst = std::max(worst, a.deviation);
    }
  }
  std::size_t checked = 0;
  for (EdgeId e = 0; e < static_cast<EdgeId>(g->num_edges()) && checked < 150; e += 3) {
    const Edge& x = g->edge(e);
    for (const auto& [other, delta] : t.edges_near_edge(e)) {
      const Edge& y = g->edge(other);
      const auto a = oracle::check_edge_edge(g->position(x.from), g->position(x.to), g->position(y.from),
                                             g->position(y.to), r, s, delta, rng, 10);
      sound = sound && a.sound;
      worst = std::max(worst, a.deviation);
      ++checked;
    }
  }
  CHECK(checked > 50);
  CHECK(sound);
  CHECK(worst <= 2e-3);
}

TEST_CASE("precompute output is independent of the thread count") {
  std::mt19937_64 rng(8);
  auto g = cplp::testing::random_roadmap(rng, 120, 30.0, 10);
  const auto a = precompute(*g, 1);
  const auto b = precompute(*g, 3);
  for (EdgeId e = 0; e < static_cast<EdgeId>(g->num_edges()); ++e) {
    const auto x = a.edges_near_edge(e);
    const auto y = b.edges_near_edge(e);
    REQUIRE(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(x[i].other == y[i].other);
      CHECK(x[i].delta == y[i].delta);
    }
  }
  CHECK(a.num_edge_vertex_entries() == b.num_edge_vertex_entries());
}

TEST_CASE("table cache round-trips and rejects a different roadmap") {
  std::mt19937_64 rng(13);
  auto g = cplp::testing::random_roadmap(rng, 60, 15.0, 5);
  auto h = cplp::testing::random_roadmap(rng, 60, 15.0, 5);
  const auto t = precompute(*g);
  const auto path = std::filesystem::temp_directory_path() / "cplp_tables_test.bin";
  save_tables(path, *g, t);
  const auto loaded = load_tables(path, *g);
  REQUIRE(loaded);
  CHECK(loaded->num_edge_edge_entries() == t.num_edge_edge_entries());
  CHECK(loaded->num_edge_vertex_entries() == t.num_edge_vertex_entries());
  CHECK(loaded->num_vertex_vertex_entries() == t.num_vertex_vertex_entries());
  CHECK_FALSE(load_tables(path, *h));
  CHECK_FALSE(load_tables(path.string() + ".missing", *g));
  std::filesystem::remove(path);
}
