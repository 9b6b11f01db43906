#include "cplp/sipp.hpp"

#include <algorithm>
#include <queue>

namespace cplp {

void ObstacleView::add_constraints(std::span<const Constraint> constraints, AgentId agent) {
  for (const auto& c : constraints) {
    if (c.agent == agent) {
      constraints_.push_back(c);
    }
  }
  presence_cache_.clear();
  move_cache_.clear();
}

std::span<const Interval> ObstacleView::unsafe_presence(VertexId v) const {
  auto [it, inserted] = presence_cache_.try_emplace(v);
  if (inserted) {
    auto& out = it->second;
    for (const auto& layer : layers_) {
      layer.timeline->collect_presence(v, layer.filter, out);
    }
    for (const auto& c : constraints_) {
      if (c.kind == ConstraintKind::kPresence && c.resource == v) {
        out.push_back(c.window);
      }
    }
    merge_intervals(out);
  }
  return it->second;
}

std::span<const Interval> ObstacleView::unsafe_move_starts(EdgeId e) const {
  auto [it, inserted] = move_cache_.try_emplace(e);
  if (inserted) {
    auto& out = it->second;
    for (const auto& layer : layers_) {
      layer.timeline->collect_move_starts(e, layer.filter, out);
    }
    for (const auto& c : constraints_) {
      if (c.kind == ConstraintKind::kMoveStart && c.resource == e) {
        out.push_back(c.window);
      }
    }
    merge_intervals(out);
  }
  return it->second;
}

std::optional<Time> earliest_transition_into(std::span<const Interval> unsafe_starts, Time duration,
                                             Interval depart_window, Interval successor_safe) {
  const Interval window{std::max(depart_window.lo, successor_safe.lo - duration),
                        std::min(depart_window.hi, successor_safe.hi - duration)};
  if (window.lo > window.hi) {
    return std::nullopt;
  }
  Time t = 0.0;
  if (!earliest_free(unsafe_starts, window, t)) {
    return std::nullopt;
  }
  return t;
}

std::optional<Time> earliest_transition(std::span<const Interval> unsafe_starts, Time duration,
                                        Interval depart_window, std::span<const Interval> successor_safe) {
  for (const auto& safe : successor_safe) {
    if (auto t = earliest_transition_into(unsafe_starts, duration, depart_window, safe)) {
      return t;
    }
  }
  return std::nullopt;
}

namespace {

struct Node {
  VertexId vertex;
  std::int32_t interval;
  Time arrival;
  Time departure;  // first move start along the path; kInf at the root
  std::int32_t parent;
  EdgeId via;
  Time move_start;
  double key;
};

std::uint64_t state_key(VertexId v, std::int32_t interval) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(v)) << 32) | static_cast<std::uint32_t>(interval);
}

}  // namespace

SippResult plan_toward(const Roadmap& roadmap, const ObstacleView& view, const SippRequest& request) {
  SippResult result;
  result.end_vertex = request.start;
  result.end_time = request.start_time;

  std::shared_ptr<const DistanceField> field;
  if (request.target) {
    field = roadmap.shortest_time_field(*request.target);
  }
  auto h = [&](VertexId v) { return field ? (*field)(v) : 0.0; };
  const bool by_departure = request.objective == SippObjective::kEarliestDeparture;

  std::unordered_map<VertexId, std::vector<Interval>> safe_cache;
  auto safe_of = [&](VertexId v) -> const std::vector<Interval>& {
    auto [it, inserted] = safe_cache.try_emplace(v);
    if (inserted) {
      it->second = complement(view.unsafe_presence(v), request.start_time);
    }
    return it->second;
  };

  const auto& root_safe = safe_of(request.start);
  if (root_safe.empty() || root_safe.front().lo > request.start_time + kTimeEps) {
    return result;
  }

  std::vector<Node> nodes;
  nodes.push_back({request.start, 0, request.start_time, kInf, -1, -1, 0.0, request.start_time + h(request.start)});

  // Lower is better: (key, then per objective tie-breaks).
  auto worse = [&](std::int32_t ia, std::int32_t ib) {
    const Node& a = nodes[static_cast<std::size_t>(ia)];
    const Node& b = nodes[static_cast<std::size_t>(ib)];
    if (a.key != b.key) {
      return a.key > b.key;
    }
    if (by_departure) {
      if (a.arrival != b.arrival) {
        return a.arrival > b.arrival;
      }
    } else if (a.arrival != b.arrival) {
      return a.arrival < b.arrival;  // deeper first
    }
    if (a.vertex != b.vertex) {
      return a.vertex > b.vertex;
    }
    return ia > ib;
  };
  std::priority_queue<std::int32_t, std::vector<std::int32_t>, decltype(worse)> open(worse);
  std::unordered_map<std::uint64_t, std::pair<Time, Time>> best;  // (key, arrival)
  std::unordered_map<std::uint64_t, char> closed;
  open.push(0);
  best[state_key(request.start, 0)] = {nodes[0].key, nodes[0].arrival};

  const std::size_t budget = request.expansion_budget > 0 ? request.expansion_budget : 10 * roadmap.num_vertices();
  const double h_start = h(request.start);

  while (!open.empty()) {
    const std::int32_t index = open.top();
    open.pop();
    const Node node = nodes[static_cast<std::size_t>(index)];
    const auto skey = state_key(node.vertex, node.interval);
    if (closed.contains(skey)) {
      continue;
    }
    closed[skey] = 1;

    if (++result.expansions > budget) {
      result.status = SippStatus::kBudgetExhausted;
      return result;
    }
    if (request.deadline && (result.expansions & 63U) == 0 && Clock::now() > *request.deadline) {
      result.status = SippStatus::kTimeout;
      return result;
    }

    const Interval safe = safe_of(node.vertex)[static_cast<std::size_t>(node.interval)];
    const bool is_root = index == 0;
    const bool blocked = request.blocked_goal != nullptr &&
                         (*request.blocked_goal)[static_cast<std::size_t>(node.vertex)] != 0;
    bool goal = !is_root && safe.hi == kInf && !blocked;
    if (goal) {
      if (by_departure) {
        goal = node.vertex != request.start;
      } else {
        goal = (request.target && node.vertex == *request.target) || node.arrival >= request.horizon_end;
      }
    }
    if (goal) {
      std::vector<std::int32_t> chain;
      for (std::int32_t i = index; i > 0; i = nodes[static_cast<std::size_t>(i)].parent) {
        chain.push_back(i);
      }
      std::reverse(chain.begin(), chain.end());
      Time now = request.start_time;
      VertexId at = request.start;
      for (auto i : chain) {
        const Node& n = nodes[static_cast<std::size_t>(i)];
        if (n.move_start > now) {
          result.actions.push_back(Action::wait(at, now, n.move_start));
        }
        result.actions.push_back(Action::move(roadmap, n.via, n.move_start));
        now = n.arrival;
        at = n.vertex;
      }
      result.status = SippStatus::kFound;
      result.end_vertex = node.vertex;
      result.end_time = node.arrival;
      result.departure = node.departure;
      result.improving = field && h(node.vertex) < h_start;
      return result;
    }

    for (EdgeId e : roadmap.out_edges(node.vertex)) {
      const Edge& edge = roadmap.edge(e);
      const double hw = h(edge.to);
      if (hw == kInf) {
        continue;
      }
      const auto unsafe = view.unsafe_move_starts(e);
      const auto& successor_safe = safe_of(edge.to);
      const Interval depart{node.arrival, safe.hi};
      for (std::size_t j = 0; j < successor_safe.size(); ++j) {
        const Interval& s = successor_safe[j];
        if (s.lo - edge.duration > depart.hi) {
          break;
        }
        if (s.hi - edge.duration < depart.lo) {
          continue;
        }
        const auto t = earliest_transition_into(unsafe, edge.duration, depart, s);
        if (!t) {
          continue;
        }
        const Time arrival = *t + edge.duration;
        const auto ckey = state_key(edge.to, static_cast<std::int32_t>(j));
        if (closed.contains(ckey)) {
          continue;
        }
        const Time departure = is_root ? *t : node.departure;
        const double key = by_departure ? departure : arrival + hw;
        auto [slot, fresh] = best.try_emplace(ckey, std::make_pair(key, arrival));
        if (!fresh) {
          const auto [bk, ba] = slot->second;
          if (key > bk || (key == bk && arrival >= ba)) {
            continue;
          }
          slot->second = {key, arrival};
        }
        nodes.push_back({edge.to, static_cast<std::int32_t>(j), arrival, departure, index, e, *t, key});
        open.push(static_cast<std::int32_t>(nodes.size() - 1));
      }
    }
  }
  return result;
}

}  // namespace cplp
