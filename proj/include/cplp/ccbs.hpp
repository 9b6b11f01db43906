#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "cplp/collision_tables.hpp"
#include "cplp/plan.hpp"
#include "cplp/sipp.hpp"
#include "cplp/timeline.hpp"

namespace cplp {

/// Actions appended after an agent's committed plan, ending idle forever at
/// (end_vertex, end_time).
struct Segment {
  std::vector<Action> actions;
  VertexId end_vertex = 0;
  Time end_time = 0.0;
};

/// One step of an agent's track inside a CT node. Terminal waits end at kInf.
struct TrackItem {
  Action action;
  bool terminal = false;
};

struct Conflict {
  AgentId agent1 = -1;
  TrackItem item1;
  AgentId agent2 = -1;
  TrackItem item2;
  Time time = 0.0;  ///< start of the earlier-detected interaction
  /// What each agent must avoid to resolve the conflict: [t_i, t_i^u) on the
  /// resource of its own action.
  Constraint constraint1;
  Constraint constraint2;
};

/// Conflict test for one pair of track items, in either direction, with the
/// constraints [t_i, t_i^u) that resolve it. nullopt when they do not
/// interact.
std::optional<Conflict> check_pair(const ConflictTables& tables, AgentId agent1, const TrackItem& item1,
                                   AgentId agent2, const TrackItem& item2);

struct CtNode {
  std::map<AgentId, Segment> overrides;  ///< agents whose plans differ from the committed ones
  std::vector<Constraint> constraints;
  double cost = 0.0;                     ///< sum of final arrival times over all agents
  std::size_t id = 0;
};

struct CcbsProblem {
  const Roadmap* roadmap = nullptr;
  const ConflictTables* tables = nullptr;
  /// Committed plans, indexed by agent id.
  std::span<const Plan> plans;
  /// Timeline of all committed plans (terminals included) from t_plan.
  const Timeline* committed = nullptr;
  AgentId agent = -1;
  VertexId target = 0;
  std::optional<Clock::time_point> deadline;
  /// 0 means unlimited; the search reports kInfeasible when exceeded.
  std::size_t max_nodes = 0;
};

enum class CcbsStatus { kSolved, kTimeout, kInfeasible };

struct CcbsResult {
  CcbsStatus status = CcbsStatus::kInfeasible;
  std::vector<std::pair<AgentId, Segment>> segments;  ///< new actions per moved agent, by agent id
  std::size_t expanded = 0;
  std::size_t generated = 0;
};

/// Constraint-tree search planning one agent to its target while treating
/// every other agent as idle at its committed end. Conflicts against an
/// idle agent evacuate it instead of branching.
class CcbsSearch {
 public:
  explicit CcbsSearch(const CcbsProblem& problem);

  /// Root node: the prioritized agent's path, everybody else idle. nullopt
  /// when no path exists.
  std::optional<CtNode> root();

  /// Earliest conflict among the node's tracks, or nullopt.
  [[nodiscard]] std::optional<Conflict> first_conflict(const CtNode& node) const;

  /// Children of `node` for `conflict`: one evacuation child when a party is
  /// idle, otherwise up to two constrained children.
  std::vector<CtNode> branch(const CtNode& node, const Conflict& conflict);

  /// Moves an idle agent to the nearest place where it may stay forever,
  /// leaving as early as possible.
  std::optional<Segment> evacuate_idle(const CtNode& node, AgentId agent);

  CcbsResult solve();

  /// Track of one agent in a node: new actions (with zero-length waits at
  /// transfer instants) followed by the terminal wait.
  [[nodiscard]] std::vector<TrackItem> track(const CtNode& node, AgentId agent) const;

  [[nodiscard]] bool idle(const CtNode& node, AgentId agent, const TrackItem& item) const;

 private:
  [[nodiscard]] VertexId end_vertex(const CtNode& node, AgentId agent) const;
  [[nodiscard]] Time end_time(const CtNode& node, AgentId agent) const;
  [[nodiscard]] double cost_of(const CtNode& node) const;
  [[nodiscard]] bool timed_out() const;

  /// Low-level replanning of `agent` under the node's constraints.
  std::optional<Segment> replan(const CtNode& node, AgentId agent);
  std::optional<Segment> search(const CtNode& node, AgentId agent, bool evacuation);

  CcbsProblem p_;
  std::size_t next_id_ = 0;
  bool timed_out_ = false;
};

/// Runs the search under the problem's deadline.
CcbsResult prioritized_plans(const CcbsProblem& problem);

}  // namespace cplp
