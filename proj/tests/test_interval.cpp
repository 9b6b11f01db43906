#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "cplp/geometry.hpp"
#include "cplp/interval.hpp"

using namespace cplp;

TEST_CASE("merge_intervals joins overlapping and touching windows") {
  std::vector<Interval> v{{6, 8}, {2, 4}, {3, 5}, {8, 9}, {10, 10}};
  merge_intervals(v);
  REQUIRE(v.size() == 2);
  CHECK(v[0] == Interval{2, 5});
  CHECK(v[1] == Interval{6, 9});
}

TEST_CASE("complement of unsafe windows") {
  SUBCASE("two unsafe windows") {
    const std::vector<Interval> unsafe{{2, 4}, {6, 8}};
    const auto safe = complement(unsafe);
    REQUIRE(safe.size() == 3);
    CHECK(safe[0] == Interval{0, 2});
    CHECK(safe[1] == Interval{4, 6});
    CHECK(safe[2] == Interval{8, kInf});
  }
  SUBCASE("nothing unsafe") {
    const auto safe = complement({});
    REQUIRE(safe.size() == 1);
    CHECK(safe[0] == Interval{0, kInf});
  }
  SUBCASE("unsafe forever") {
    const std::vector<Interval> unsafe{{3, kInf}};
    const auto safe = complement(unsafe);
    REQUIRE(safe.size() == 1);
    CHECK(safe[0] == Interval{0, 3});
  }
  SUBCASE("window starting later clips earlier entries") {
    const std::vector<Interval> unsafe{{2, 4}, {6, 8}};
    const auto safe = complement(unsafe, 5);
    REQUIRE(safe.size() == 2);
    CHECK(safe[0] == Interval{5, 6});
  }
}

TEST_CASE("complement of the complement is the identity") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Interval> unsafe;
    for (int k = 0; k < 8; ++k) {
      const double a = u(rng);
      unsafe.push_back({a, a + u(rng) / 10.0});
    }
    merge_intervals(unsafe);
    const auto safe = complement(unsafe);
    // Safe windows are closed; their gaps are the unsafe windows again.
    std::vector<Interval> back;
    Time cursor = 0.0;
    for (const auto& s : safe) {
      if (s.lo > cursor) {
        back.push_back({cursor, s.lo});
      }
      cursor = s.hi;
    }
    if (cursor < kInf) {
      back.push_back({cursor, kInf});
    }
    std::vector<Interval> expected;
    for (const auto& i : unsafe) {
      if (i.hi > 0) {
        expected.push_back(i);
      }
    }
    CHECK(back == expected);
  }
}

TEST_CASE("earliest_free respects half-open unsafe windows") {
  Time t = -1;
  SUBCASE("no unsafe windows gives the window start") {
    REQUIRE(earliest_free({}, {1.5, kInf}, t));
    CHECK(t == 1.5);
  }
  SUBCASE("start inside (0,5) moves to 5") {
    const std::vector<Interval> unsafe{{0, 5}};
    REQUIRE(earliest_free(unsafe, {0, kInf}, t));
    CHECK(t == 5);
  }
  SUBCASE("chained windows") {
    const std::vector<Interval> unsafe{{0, 5}, {5.5, 7}, {7, 9}};
    REQUIRE(earliest_free(unsafe, {5.6, kInf}, t));
    CHECK(t == 9);
  }
  SUBCASE("window closes first") {
    const std::vector<Interval> unsafe{{0, 5}};
    CHECK_FALSE(earliest_free(unsafe, {1, 4.9}, t));
    REQUIRE(earliest_free(unsafe, {1, 5}, t));
    CHECK(t == 5);
  }
  SUBCASE("unsafe forever") {
    const std::vector<Interval> unsafe{{0, kInf}};
    CHECK_FALSE(earliest_free(unsafe, {1, kInf}, t));
  }
}

TEST_CASE("point_segment_distance") {
  CHECK(point_segment_distance({0, 1}, {-1, 0}, {1, 0}) == doctest::Approx(1.0));
  CHECK(point_segment_distance({3, 0}, {-1, 0}, {1, 0}) == doctest::Approx(2.0));

  // Oracle: the distance along the segment is convex in the parameter, so a
  // long ternary search converges to the minimum.
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Point p{u(rng), u(rng)};
    const Point a{u(rng), u(rng)};
    const Point b{u(rng), u(rng)};
    auto at = [&](double s) { return distance(p, a + s * (b - a)); };
    double lo = 0.0;
    double hi = 1.0;
    for (int it = 0; it < 200; ++it) {
      const double m1 = lo + (hi - lo) / 3.0;
      const double m2 = hi - (hi - lo) / 3.0;
      if (at(m1) < at(m2)) {
        hi = m2;
      } else {
        lo = m1;
      }
    }
    const double oracle = std::min({at(0.0), at(1.0), at(0.5 * (lo + hi))});
    worst = std::max(worst, std::abs(point_segment_distance(p, a, b) - oracle));
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("segment_segment_distance") {
  CHECK(segment_segment_distance({0, 0}, {2, 2}, {0, 2}, {2, 0}) == 0.0);
  CHECK(segment_segment_distance({0, 0}, {10, 0}, {0, 5}, {10, 5}) == doctest::Approx(5.0));
  CHECK(segment_segment_distance({0, 0}, {1, 0}, {3, 0}, {4, 0}) == doctest::Approx(2.0));
}
