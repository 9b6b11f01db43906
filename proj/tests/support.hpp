#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "cplp/roadmap.hpp"

namespace cplp::testing {

inline std::unique_ptr<Roadmap> make_roadmap(std::vector<Point> points, std::vector<std::pair<VertexId, VertexId>> edges,
                                             double r = 1.0, double s = 1.0) {
  return std::make_unique<Roadmap>(std::move(points), std::move(edges), r, s);
}

/// Straight chain of n vertices spaced `gap` apart on the x axis.
inline std::unique_ptr<Roadmap> path_graph(int n, double gap, double r = 1.0) {
  std::vector<Point> pts;
  std::vector<std::pair<VertexId, VertexId>> edges;
  for (int i = 0; i < n; ++i) {
    pts.push_back({gap * i, 0.0});
    if (i > 0) {
      edges.emplace_back(i - 1, i);
    }
  }
  return make_roadmap(std::move(pts), std::move(edges), r);
}

/// Connected random geometric graph: random points in a square, a random
/// spanning tree plus extra short edges.
inline std::unique_ptr<Roadmap> random_roadmap(std::mt19937_64& rng, int n, double side, int extra, double r = 1.0) {
  std::uniform_real_distribution<double> coord(0.0, side);
  std::vector<Point> pts;
  for (int i = 0; i < n; ++i) {
    pts.push_back({coord(rng), coord(rng)});
  }
  std::set<std::pair<VertexId, VertexId>> edges;
  for (int i = 1; i < n; ++i) {
    // Attach to the nearest earlier vertex.
    int best = 0;
    for (int j = 1; j < i; ++j) {
      if (distance(pts[static_cast<std::size_t>(i)], pts[static_cast<std::size_t>(j)]) <
          distance(pts[static_cast<std::size_t>(i)], pts[static_cast<std::size_t>(best)])) {
        best = j;
      }
    }
    edges.insert({best, i});
  }
  std::uniform_int_distribution<int> pick(0, n - 1);
  for (int k = 0; k < extra; ++k) {
    int a = pick(rng);
    int b = pick(rng);
    if (a != b) {
      edges.insert({std::min(a, b), std::max(a, b)});
    }
  }
  return make_roadmap(std::move(pts), {edges.begin(), edges.end()}, r);
}

}  // namespace cplp::testing
