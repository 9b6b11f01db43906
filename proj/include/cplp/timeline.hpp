#pragma once

#include <span>
#include <unordered_map>
#include <vector>

#include "cplp/collision_tables.hpp"
#include "cplp/plan.hpp"

namespace cplp {

/// One unsafe window on a vertex (presence) or an edge (move start times),
/// tagged with the agent whose action induces it.
struct UnsafeEntry {
  Interval window;
  AgentId agent = -1;
  bool terminal = false;  ///< induced by the agent's idle-forever terminal wait
};

/// Which entries a query ignores.
struct EntryFilter {
  AgentId self = -1;                              ///< the planning agent
  bool skip_all_terminals = false;                ///< ignore every terminal-wait entry
  const std::vector<char>* skip_terminal_of = nullptr;  ///< per-agent flag

  [[nodiscard]] bool accepts(const UnsafeEntry& e) const {
    if (e.agent == self) {
      return false;
    }
    if (e.terminal && (skip_all_terminals ||
                       (skip_terminal_of != nullptr && (*skip_terminal_of)[static_cast<std::size_t>(e.agent)]))) {
      return false;
    }
    return true;
  }
};

struct FinalPosition {
  AgentId agent;
  VertexId vertex;
  Time since;
};

/// Unsafe intervals per vertex and per edge induced by a set of committed
/// plans, composed through ConflictTables. Only actions ending at or after
/// `from_time` contribute.
class Timeline {
 public:
  Timeline(const Roadmap& roadmap, const ConflictTables& tables, Time from_time);

  static Timeline rebuild(const Roadmap& roadmap, std::span<const Plan> plans, const ConflictTables& tables,
                          Time from_time);

  /// Adds the agent's actions (and its terminal wait when requested).
  void add_plan(const Plan& plan, bool with_terminal = true);
  /// Adds arbitrary actions for an agent, optionally followed by a terminal
  /// wait at (terminal_vertex, terminal_time).
  void add_actions(AgentId agent, std::span<const Action> actions, bool with_terminal, VertexId terminal_vertex,
                   Time terminal_time);
  void remove_agent(AgentId agent);
  void replace_plan(const Plan& plan) {
    remove_agent(plan.agent());
    add_plan(plan);
  }

  [[nodiscard]] Time from_time() const { return from_time_; }

  [[nodiscard]] std::span<const UnsafeEntry> vertex_entries(VertexId v) const { return vertex_[idx(v)]; }
  [[nodiscard]] std::span<const UnsafeEntry> edge_entries(EdgeId e) const { return edge_[idx(e)]; }

  /// Merged unsafe presence windows at v.
  [[nodiscard]] std::vector<Interval> unsafe_presence(VertexId v, const EntryFilter& filter = {}) const;
  /// Merged unsafe move-start windows for e.
  [[nodiscard]] std::vector<Interval> unsafe_move_starts(EdgeId e, const EntryFilter& filter = {}) const;
  /// Complement of unsafe_presence from time 0; the last window may be open-ended.
  [[nodiscard]] std::vector<Interval> safe_intervals(VertexId v, const EntryFilter& filter = {}) const;

  /// Final (vertex, time) of every agent with a terminal wait, except those
  /// listed in `excluding`.
  [[nodiscard]] std::vector<FinalPosition> blocked_final_positions(std::span<const AgentId> excluding = {}) const;

  /// Per-vertex flag: true when v is within 2r of (or equal to) a final
  /// position of an agent other than `self`.
  [[nodiscard]] std::vector<char> blocked_goal_mask(AgentId self) const;

  void collect_presence(VertexId v, const EntryFilter& filter, std::vector<Interval>& out) const;
  void collect_move_starts(EdgeId e, const EntryFilter& filter, std::vector<Interval>& out) const;

 private:
  static std::size_t idx(std::int32_t i) { return static_cast<std::size_t>(i); }

  void emit_wait(AgentId agent, VertexId v, Time a, Time b, bool terminal);
  void emit_move(AgentId agent, EdgeId e, Time t);
  void push_vertex(VertexId v, UnsafeEntry entry);
  void push_edge(EdgeId e, UnsafeEntry entry);

  const Roadmap* roadmap_;
  const ConflictTables* tables_;
  Time from_time_;
  std::vector<std::vector<UnsafeEntry>> vertex_;
  std::vector<std::vector<UnsafeEntry>> edge_;
  std::unordered_map<AgentId, std::vector<std::int32_t>> touched_;  // v >= 0: vertex v; v < 0: edge (-v - 1)
  std::unordered_map<AgentId, FinalPosition> finals_;
};

}  // namespace cplp
