#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cplp/interval.hpp"
#include "cplp/roadmap.hpp"

namespace cplp {

enum class ActionKind { kMove, kWait };

/// A move-action <edge, start> or a wait-action <vertex, start, end>.
/// For moves `vertex` is the source vertex and `end = start + dur(edge)`.
struct Action {
  ActionKind kind = ActionKind::kWait;
  VertexId vertex = 0;
  EdgeId edge = -1;
  Time start = 0.0;
  Time end = 0.0;

  static Action move(const Roadmap& roadmap, EdgeId e, Time start) {
    const Edge& edge = roadmap.edge(e);
    return {ActionKind::kMove, edge.from, e, start, start + edge.duration};
  }
  static Action wait(VertexId v, Time start, Time end) { return {ActionKind::kWait, v, -1, start, end}; }

  [[nodiscard]] bool is_move() const { return kind == ActionKind::kMove; }
  [[nodiscard]] bool is_wait() const { return kind == ActionKind::kWait; }
  [[nodiscard]] VertexId end_vertex(const Roadmap& roadmap) const {
    return is_move() ? roadmap.edge(edge).to : vertex;
  }

  friend bool operator==(const Action&, const Action&) = default;
};

/// Committed actions of one agent. The agent is implicitly idle at
/// end_vertex() from end_time() onward; that terminal wait is never stored.
class Plan {
 public:
  Plan() = default;
  Plan(AgentId agent, VertexId start_vertex, Time start_time = 0.0)
      : agent_(agent), start_vertex_(start_vertex), start_time_(start_time), end_vertex_(start_vertex),
        end_time_(start_time) {}

  [[nodiscard]] AgentId agent() const { return agent_; }
  [[nodiscard]] VertexId start_vertex() const { return start_vertex_; }
  [[nodiscard]] Time start_time() const { return start_time_; }
  [[nodiscard]] VertexId end_vertex() const { return end_vertex_; }
  [[nodiscard]] Time end_time() const { return end_time_; }
  [[nodiscard]] std::span<const Action> actions() const { return actions_; }
  [[nodiscard]] bool empty() const { return actions_.empty(); }

  /// Appends one action. Throws std::logic_error if it does not start where
  /// and when the plan currently ends (within kTimeEps).
  void append(const Roadmap& roadmap, const Action& action);
  void append(const Roadmap& roadmap, std::span<const Action> actions);

  /// Index of the first action whose end is >= t.
  [[nodiscard]] std::size_t first_action_ending_at_or_after(Time t) const;

 private:
  AgentId agent_ = 0;
  VertexId start_vertex_ = 0;
  Time start_time_ = 0.0;
  VertexId end_vertex_ = 0;
  Time end_time_ = 0.0;
  std::vector<Action> actions_;
};

/// Contiguity defects of a plan, as human-readable messages.
std::vector<std::string> plan_defects(const Roadmap& roadmap, const Plan& plan);

/// Trace document: per agent, ordered actions with times. The implicit
/// terminal wait is written explicitly with `"end": null`.
nlohmann::json plans_to_json(const Roadmap& roadmap, std::span<const Plan> plans);
/// Reads a trace document. A trailing open-ended wait is folded back into
/// the implicit terminal wait.
std::vector<Plan> plans_from_json(const Roadmap& roadmap, const nlohmann::json& doc);

}  // namespace cplp
