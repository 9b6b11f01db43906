#pragma once

#include <chrono>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "cplp/collision_tables.hpp"
#include "cplp/plan.hpp"
#include "cplp/timeline.hpp"

namespace cplp {

using Clock = std::chrono::steady_clock;

enum class ConstraintKind { kMoveStart, kPresence };

/// Forbids `agent` from starting a move on edge `resource` (kMoveStart) or
/// from being at vertex `resource` (kPresence) within `window`.
struct Constraint {
  AgentId agent = -1;
  ConstraintKind kind = ConstraintKind::kMoveStart;
  std::int32_t resource = 0;
  Interval window;

  friend bool operator==(const Constraint&, const Constraint&) = default;
};

/// Everything a single-agent search must avoid: filtered timeline layers
/// plus the agent's own constraints. Merged lists are cached per query key,
/// so a view must not outlive changes to its layers.
class ObstacleView {
 public:
  ObstacleView() = default;
  ObstacleView(const Timeline& timeline, EntryFilter filter) { add_layer(timeline, filter); }

  void add_layer(const Timeline& timeline, EntryFilter filter) { layers_.push_back({&timeline, filter}); }
  void add_constraints(std::span<const Constraint> constraints, AgentId agent);

  [[nodiscard]] std::span<const Interval> unsafe_presence(VertexId v) const;
  [[nodiscard]] std::span<const Interval> unsafe_move_starts(EdgeId e) const;

 private:
  struct Layer {
    const Timeline* timeline;
    EntryFilter filter;
  };
  std::vector<Layer> layers_;
  std::vector<Constraint> constraints_;
  mutable std::unordered_map<VertexId, std::vector<Interval>> presence_cache_;
  mutable std::unordered_map<EdgeId, std::vector<Interval>> move_cache_;
};

/// Earliest start t in `depart_window` with t outside `unsafe_starts` and
/// t + duration inside `successor_safe` (a closed safe window).
std::optional<Time> earliest_transition_into(std::span<const Interval> unsafe_starts, Time duration,
                                             Interval depart_window, Interval successor_safe);

/// Earliest start over all safe windows of the successor vertex.
std::optional<Time> earliest_transition(std::span<const Interval> unsafe_starts, Time duration,
                                        Interval depart_window, std::span<const Interval> successor_safe);

enum class SippObjective {
  kArrival,            ///< A* on f = arrival + dist(v, target)
  kEarliestDeparture,  ///< lexicographic (first departure, arrival); used for evacuation
};

struct SippRequest {
  AgentId agent = -1;
  VertexId start = 0;
  Time start_time = 0.0;
  std::optional<VertexId> target;
  /// Goal-eligible states count as goals once their arrival is >= this.
  Time horizon_end = kInf;
  SippObjective objective = SippObjective::kArrival;
  /// Per-vertex flag for vertices next to other agents' final positions.
  const std::vector<char>* blocked_goal = nullptr;
  /// 0 selects the default of 10 x |V|.
  std::size_t expansion_budget = 0;
  std::optional<Clock::time_point> deadline;
};

enum class SippStatus { kFound, kNoPath, kBudgetExhausted, kTimeout };

struct SippResult {
  SippStatus status = SippStatus::kNoPath;
  std::vector<Action> actions;  ///< explicit waits and moves from (start, start_time)
  VertexId end_vertex = 0;
  Time end_time = 0.0;
  Time departure = kInf;        ///< start time of the first move
  bool improving = false;       ///< ends strictly closer (in time) to the target than it started
  std::size_t expansions = 0;

  [[nodiscard]] bool found() const { return status == SippStatus::kFound; }
};

/// Safe-interval A* toward (not necessarily to) the target. A popped state
/// is a goal when it is not the root, its safe interval is open-ended, it is
/// not blocked, and either it is the target or its arrival is at or past
/// horizon_end. With kEarliestDeparture the start vertex itself is never a
/// goal.
SippResult plan_toward(const Roadmap& roadmap, const ObstacleView& view, const SippRequest& request);

}  // namespace cplp
