#include "cplp/timeline.hpp"

#include <algorithm>

namespace cplp {

Timeline::Timeline(const Roadmap& roadmap, const ConflictTables& tables, Time from_time)
    : roadmap_(&roadmap), tables_(&tables), from_time_(from_time), vertex_(roadmap.num_vertices()),
      edge_(roadmap.num_edges()) {}

Timeline Timeline::rebuild(const Roadmap& roadmap, std::span<const Plan> plans, const ConflictTables& tables,
                           Time from_time) {
  Timeline timeline(roadmap, tables, from_time);
  for (const auto& plan : plans) {
    timeline.add_plan(plan);
  }
  return timeline;
}

void Timeline::add_plan(const Plan& plan, bool with_terminal) {
  const auto actions = plan.actions().subspan(plan.first_action_ending_at_or_after(from_time_));
  add_actions(plan.agent(), actions, with_terminal, plan.end_vertex(), plan.end_time());
}

void Timeline::add_actions(AgentId agent, std::span<const Action> actions, bool with_terminal,
                           VertexId terminal_vertex, Time terminal_time) {
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const Action& a = actions[i];
    if (a.end < from_time_) {
      continue;
    }
    if (a.is_wait()) {
      emit_wait(agent, a.vertex, a.start, a.end, false);
      continue;
    }
    emit_move(agent, a.edge, a.start);
    // Zero-duration wait at the transfer instant between two moves.
    if (i + 1 < actions.size() && actions[i + 1].is_move()) {
      emit_wait(agent, roadmap_->edge(a.edge).to, a.end, a.end, false);
    }
  }
  if (with_terminal) {
    emit_wait(agent, terminal_vertex, terminal_time, kInf, true);
    finals_[agent] = {agent, terminal_vertex, terminal_time};
  }
}

void Timeline::remove_agent(AgentId agent) {
  if (auto it = touched_.find(agent); it != touched_.end()) {
    auto& ids = it->second;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    for (auto id : ids) {
      auto& list = id >= 0 ? vertex_[idx(id)] : edge_[idx(-id - 1)];
      std::erase_if(list, [agent](const UnsafeEntry& e) { return e.agent == agent; });
    }
    touched_.erase(it);
  }
  finals_.erase(agent);
}

void Timeline::push_vertex(VertexId v, UnsafeEntry entry) {
  if (entry.window.hi < from_time_) {
    return;
  }
  entry.window.lo = std::max(entry.window.lo, from_time_);
  vertex_[idx(v)].push_back(entry);
  touched_[entry.agent].push_back(v);
}

void Timeline::push_edge(EdgeId e, UnsafeEntry entry) {
  if (entry.window.hi < from_time_) {
    return;
  }
  entry.window.lo = std::max(entry.window.lo, from_time_);
  edge_[idx(e)].push_back(entry);
  touched_[entry.agent].push_back(-e - 1);
}

void Timeline::emit_wait(AgentId agent, VertexId v, Time a, Time b, bool terminal) {
  const Interval presence{a - kPad, b == kInf ? kInf : b + kPad};
  push_vertex(v, {presence, agent, terminal});
  for (VertexId u : tables_->vertices_near_vertex(v)) {
    push_vertex(u, {presence, agent, terminal});
  }
  // A mover on e starting at t is near v during (t + tau.lo, t + tau.hi).
  for (const auto& [e, tau] : tables_->edges_near_vertex(v)) {
    push_edge(e, {{a - tau.hi, b == kInf ? kInf : b - tau.lo}, agent, terminal});
  }
}

void Timeline::emit_move(AgentId agent, EdgeId e, Time t) {
  for (const auto& [v, tau] : tables_->vertices_near_edge(e)) {
    push_vertex(v, {{t + tau.lo, t + tau.hi}, agent, false});
  }
  // Table entry for (e, other) holds t_other - t; other start times inside
  // t + delta collide.
  for (const auto& [other, delta] : tables_->edges_near_edge(e)) {
    push_edge(other, {{t + delta.lo, t + delta.hi}, agent, false});
  }
}

void Timeline::collect_presence(VertexId v, const EntryFilter& filter, std::vector<Interval>& out) const {
  for (const auto& entry : vertex_[idx(v)]) {
    if (filter.accepts(entry)) {
      out.push_back(entry.window);
    }
  }
}

void Timeline::collect_move_starts(EdgeId e, const EntryFilter& filter, std::vector<Interval>& out) const {
  for (const auto& entry : edge_[idx(e)]) {
    if (filter.accepts(entry)) {
      out.push_back(entry.window);
    }
  }
}

std::vector<Interval> Timeline::unsafe_presence(VertexId v, const EntryFilter& filter) const {
  std::vector<Interval> out;
  collect_presence(v, filter, out);
  merge_intervals(out);
  return out;
}

std::vector<Interval> Timeline::unsafe_move_starts(EdgeId e, const EntryFilter& filter) const {
  std::vector<Interval> out;
  collect_move_starts(e, filter, out);
  merge_intervals(out);
  return out;
}

std::vector<Interval> Timeline::safe_intervals(VertexId v, const EntryFilter& filter) const {
  const auto unsafe = unsafe_presence(v, filter);
  return complement(unsafe, 0.0);
}

std::vector<FinalPosition> Timeline::blocked_final_positions(std::span<const AgentId> excluding) const {
  std::vector<FinalPosition> out;
  for (const auto& [agent, pos] : finals_) {
    if (std::find(excluding.begin(), excluding.end(), agent) == excluding.end()) {
      out.push_back(pos);
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.agent < b.agent; });
  return out;
}

std::vector<char> Timeline::blocked_goal_mask(AgentId self) const {
  std::vector<char> mask(roadmap_->num_vertices(), 0);
  for (const auto& [agent, pos] : finals_) {
    if (agent == self) {
      continue;
    }
    mask[idx(pos.vertex)] = 1;
    for (VertexId u : tables_->vertices_near_vertex(pos.vertex)) {
      mask[idx(u)] = 1;
    }
  }
  return mask;
}

}  // namespace cplp
