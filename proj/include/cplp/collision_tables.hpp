#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "cplp/geometry.hpp"
#include "cplp/interval.hpp"
#include "cplp/roadmap.hpp"

namespace cplp {

/// Sorted, pairwise-disjoint offset intervals. For a single straight
/// traversal against a disk or another straight traversal the unsafe set is
/// convex, so these lists hold at most one interval.
using OffsetIntervalList = std::vector<Interval>;

/// Times into a traversal of a -> b (speed s) during which the moving disk
/// is within 2r of vertex v. Unpadded.
OffsetIntervalList unsafe_tau_edge_vertex(Point a, Point b, Point v, double radius, double speed);

/// Start-time offsets delta = t2 - t1 for which an agent traversing a1 -> b1
/// from t1 and one traversing a2 -> b2 from t2 come within 2r while both
/// move. Unpadded.
OffsetIntervalList unsafe_delta_edge_edge(Point a1, Point b1, Point a2, Point b2, double radius, double speed);

struct VertexWindow {
  VertexId vertex;
  Interval tau;
};

struct EdgeWindow {
  EdgeId edge;
  Interval tau;
};

struct OffsetWindow {
  EdgeId other;
  Interval delta;  ///< t_other - t_this
};

/// Precomputed interaction lookups for a roadmap. All stored intervals are
/// padded outward by kPad. Immutable once built.
class ConflictTables {
 public:
  ConflictTables() = default;

  /// Vertices within 2r of the mover at some point of edge e, with the
  /// traversal offsets tau during which they are.
  [[nodiscard]] std::span<const VertexWindow> vertices_near_edge(EdgeId e) const { return edge_vertex_[idx(e)]; }
  /// Inverse of vertices_near_edge.
  [[nodiscard]] std::span<const EdgeWindow> edges_near_vertex(VertexId v) const { return vertex_edge_[idx(v)]; }
  /// Edges whose concurrent traversal can collide with e, sorted by id.
  [[nodiscard]] std::span<const OffsetWindow> edges_near_edge(EdgeId e) const { return edge_edge_[idx(e)]; }
  /// Vertices strictly within 2r of v, excluding v itself.
  [[nodiscard]] std::span<const VertexId> vertices_near_vertex(VertexId v) const { return vertex_vertex_[idx(v)]; }

  [[nodiscard]] std::optional<Interval> edge_edge(EdgeId e1, EdgeId e2) const;
  [[nodiscard]] std::optional<Interval> edge_vertex(EdgeId e, VertexId v) const;
  /// True when stationary agents at u and v collide (including u == v).
  [[nodiscard]] bool vertex_vertex(VertexId u, VertexId v) const;

  [[nodiscard]] std::size_t num_edge_edge_entries() const;
  [[nodiscard]] std::size_t num_edge_vertex_entries() const;
  [[nodiscard]] std::size_t num_vertex_vertex_entries() const;

  friend ConflictTables precompute(const Roadmap& roadmap, unsigned threads);
  friend void save_tables(const std::filesystem::path& path, const Roadmap& roadmap, const ConflictTables& tables);
  friend std::optional<ConflictTables> load_tables(const std::filesystem::path& path, const Roadmap& roadmap);

 private:
  static std::size_t idx(std::int32_t i) { return static_cast<std::size_t>(i); }

  std::vector<std::vector<VertexWindow>> edge_vertex_;
  std::vector<std::vector<EdgeWindow>> vertex_edge_;
  std::vector<std::vector<OffsetWindow>> edge_edge_;
  std::vector<std::vector<VertexId>> vertex_vertex_;
};

/// Builds all tables. Candidate pairs come from a uniform hash grid in which
/// every vertex and segment registers the cells covering its r-inflation, so
/// any pair closer than 2r shares a cell. Output is independent of `threads`.
ConflictTables precompute(const Roadmap& roadmap, unsigned threads = 1);

/// Binary cache keyed by Roadmap::content_hash().
void save_tables(const std::filesystem::path& path, const Roadmap& roadmap, const ConflictTables& tables);
/// Returns nullopt on missing file, version mismatch or hash mismatch.
std::optional<ConflictTables> load_tables(const std::filesystem::path& path, const Roadmap& roadmap);

}  // namespace cplp
