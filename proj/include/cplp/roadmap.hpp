#pragma once

#include <cstddef>
#include <list>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cplp/geometry.hpp"
#include "cplp/interval.hpp"

namespace cplp {

/// A directed traversal of one geometric segment.
struct Edge {
  VertexId from = 0;
  VertexId to = 0;
  SegmentId segment = 0;
  Time duration = 0.0;
};

class DistanceField;

/// Connected geometric graph with uniform circular agents.
///
/// Every undirected input pair {i, j} becomes segment k and the directed
/// edges 2k (i -> j) and 2k + 1 (j -> i). Construction validates the graph
/// and throws std::invalid_argument on any violated invariant.
class Roadmap {
 public:
  Roadmap(std::vector<Point> vertices, std::vector<std::pair<VertexId, VertexId>> segments,
          double agent_radius, double agent_speed);

  Roadmap(const Roadmap&) = delete;
  Roadmap& operator=(const Roadmap&) = delete;

  [[nodiscard]] std::size_t num_vertices() const { return vertices_.size(); }
  [[nodiscard]] std::size_t num_edges() const { return edges_.size(); }
  [[nodiscard]] std::size_t num_segments() const { return segments_.size(); }

  [[nodiscard]] Point position(VertexId v) const { return vertices_[static_cast<std::size_t>(v)]; }
  [[nodiscard]] const Edge& edge(EdgeId e) const { return edges_[static_cast<std::size_t>(e)]; }
  [[nodiscard]] std::span<const Point> vertices() const { return vertices_; }
  [[nodiscard]] std::span<const Edge> edges() const { return edges_; }
  [[nodiscard]] std::span<const std::pair<VertexId, VertexId>> segments() const { return segments_; }

  /// Outgoing directed edge ids of v, sorted by id.
  [[nodiscard]] std::span<const EdgeId> out_edges(VertexId v) const {
    return out_[static_cast<std::size_t>(v)];
  }
  [[nodiscard]] std::span<const EdgeId> in_edges(VertexId v) const {
    return in_[static_cast<std::size_t>(v)];
  }

  /// Directed edge id for u -> v, or -1.
  [[nodiscard]] EdgeId find_edge(VertexId u, VertexId v) const;

  [[nodiscard]] double agent_radius() const { return radius_; }
  [[nodiscard]] double agent_speed() const { return speed_; }
  [[nodiscard]] double max_segment_length() const { return max_segment_length_; }

  /// Shortest traversal times to `target`, cached with LRU eviction.
  [[nodiscard]] std::shared_ptr<const DistanceField> shortest_time_field(VertexId target) const;

  /// Content hash over geometry, topology, radius and speed.
  [[nodiscard]] std::uint64_t content_hash() const;

 private:
  std::vector<Point> vertices_;
  std::vector<std::pair<VertexId, VertexId>> segments_;
  std::vector<Edge> edges_;
  std::vector<std::vector<EdgeId>> out_;
  std::vector<std::vector<EdgeId>> in_;
  double radius_;
  double speed_;
  double max_segment_length_ = 0.0;

  struct Cache {
    std::mutex mutex;
    std::list<VertexId> order;  // front = most recently used
    std::unordered_map<VertexId, std::pair<std::shared_ptr<const DistanceField>, std::list<VertexId>::iterator>> entries;
  };
  mutable Cache cache_;
};

class DistanceField {
 public:
  DistanceField(VertexId target, std::vector<Time> time_to_target)
      : target_(target), time_(std::move(time_to_target)) {}

  [[nodiscard]] VertexId target() const { return target_; }
  [[nodiscard]] Time operator()(VertexId v) const { return time_[static_cast<std::size_t>(v)]; }
  [[nodiscard]] std::span<const Time> values() const { return time_; }

 private:
  VertexId target_;
  std::vector<Time> time_;
};

/// Uncached Dijkstra over reversed edges.
DistanceField compute_distance_field(const Roadmap& roadmap, VertexId target);

/// Structured-text roadmap document: `vertices`, `edges`, `agent_radius`,
/// `agent_speed`. Throws std::invalid_argument on malformed input.
std::unique_ptr<Roadmap> roadmap_from_json(const nlohmann::json& doc);
nlohmann::json roadmap_to_json(const Roadmap& roadmap);

}  // namespace cplp
