#include "cplp/ccbs.hpp"

#include <algorithm>
#include <queue>

namespace cplp {

namespace {

// Unsafe window that action `y` induces on the resource used by action `x`:
// move starts for a move, presence times for a wait. nullopt when the two
// resources never interact.
std::optional<Interval> induced_window(const ConflictTables& tables, const Action& x, const Action& y) {
  if (x.is_move()) {
    if (y.is_move()) {
      if (auto d = tables.edge_edge(y.edge, x.edge)) {
        return Interval{y.start + d->lo, y.start + d->hi};
      }
      return std::nullopt;
    }
    if (auto tau = tables.edge_vertex(x.edge, y.vertex)) {
      return Interval{y.start - tau->hi, y.end == kInf ? kInf : y.end - tau->lo};
    }
    return std::nullopt;
  }
  if (y.is_move()) {
    if (auto tau = tables.edge_vertex(y.edge, x.vertex)) {
      return Interval{y.start + tau->lo, y.start + tau->hi};
    }
    return std::nullopt;
  }
  if (tables.vertex_vertex(x.vertex, y.vertex)) {
    return Interval{y.start - kPad, y.end == kInf ? kInf : y.end + kPad};
  }
  return std::nullopt;
}

// Whether x falls strictly inside u, with a margin far below the padding so
// that boundary-touching plans produced by the low-level search never count.
bool violates(const Action& x, const Interval& u) {
  if (x.is_move()) {
    return u.lo + kTimeEps < x.start && x.start < u.hi - kTimeEps;
  }
  return x.start < u.hi - kTimeEps && x.end > u.lo + kTimeEps;
}

Constraint make_constraint(AgentId agent, const Action& x, std::optional<Interval> u) {
  constexpr Time kMinWidth = 1e-6;
  if (x.is_move()) {
    const Time hi = u ? std::max(u->hi, x.start + kMinWidth) : x.start + kMinWidth;
    return {agent, ConstraintKind::kMoveStart, x.edge, {x.start, hi}};
  }
  Interval w = u ? *u : Interval{x.start, x.start + kMinWidth};
  if (!violates(x, w)) {
    w.lo = std::min(w.lo, x.start - kMinWidth);
    w.hi = std::max(w.hi, x.start + kMinWidth);
  }
  return {agent, ConstraintKind::kPresence, x.vertex, w};
}

}  // namespace

std::optional<Conflict> check_pair(const ConflictTables& tables, AgentId agent1, const TrackItem& item1,
                                   AgentId agent2, const TrackItem& item2) {
  const auto u1 = induced_window(tables, item1.action, item2.action);
  const auto u2 = induced_window(tables, item2.action, item1.action);
  if (!(u1 && violates(item1.action, *u1)) && !(u2 && violates(item2.action, *u2))) {
    return std::nullopt;
  }
  return Conflict{agent1,
                  item1,
                  agent2,
                  item2,
                  std::max(item1.action.start, item2.action.start),
                  make_constraint(agent1, item1.action, u1),
                  make_constraint(agent2, item2.action, u2)};
}

CcbsSearch::CcbsSearch(const CcbsProblem& problem) : p_(problem) {}

VertexId CcbsSearch::end_vertex(const CtNode& node, AgentId agent) const {
  if (auto it = node.overrides.find(agent); it != node.overrides.end()) {
    return it->second.end_vertex;
  }
  return p_.plans[static_cast<std::size_t>(agent)].end_vertex();
}

Time CcbsSearch::end_time(const CtNode& node, AgentId agent) const {
  if (auto it = node.overrides.find(agent); it != node.overrides.end()) {
    return it->second.end_time;
  }
  return p_.plans[static_cast<std::size_t>(agent)].end_time();
}

double CcbsSearch::cost_of(const CtNode& node) const {
  double cost = 0.0;
  for (std::size_t a = 0; a < p_.plans.size(); ++a) {
    cost += end_time(node, static_cast<AgentId>(a));
  }
  return cost;
}

bool CcbsSearch::timed_out() const { return p_.deadline && Clock::now() > *p_.deadline; }

std::vector<TrackItem> CcbsSearch::track(const CtNode& node, AgentId agent) const {
  std::vector<TrackItem> out;
  const Plan& plan = p_.plans[static_cast<std::size_t>(agent)];
  if (auto it = node.overrides.find(agent); it != node.overrides.end()) {
    // The committed plan ends at (end_vertex, end_time); the instant of
    // transfer into the new actions is a zero-length wait.
    bool after_move = true;
    VertexId at = plan.end_vertex();
    for (const auto& a : it->second.actions) {
      if (a.is_move() && after_move) {
        out.push_back({Action::wait(at, a.start, a.start), false});
      }
      out.push_back({a, false});
      after_move = a.is_move();
      at = a.end_vertex(*p_.roadmap);
    }
    out.push_back({Action::wait(it->second.end_vertex, it->second.end_time, kInf), true});
    return out;
  }
  out.push_back({Action::wait(plan.end_vertex(), plan.end_time(), kInf), true});
  return out;
}

bool CcbsSearch::idle(const CtNode& /*node*/, AgentId agent, const TrackItem& item) const {
  return item.terminal && agent != p_.agent;
}

std::optional<Conflict> CcbsSearch::first_conflict(const CtNode& node) const {
  const auto n = static_cast<AgentId>(p_.plans.size());
  std::vector<std::vector<TrackItem>> tracks(static_cast<std::size_t>(n));
  for (AgentId a = 0; a < n; ++a) {
    tracks[static_cast<std::size_t>(a)] = track(node, a);
  }
  // Interactions reach at most one traversal (plus padding) beyond an action.
  const Time reach = p_.roadmap->max_segment_length() / p_.roadmap->agent_speed() + 1.0;

  std::optional<Conflict> best;
  for (AgentId i = 0; i < n; ++i) {
    for (AgentId j = i + 1; j < n; ++j) {
      if (!node.overrides.contains(i) && !node.overrides.contains(j)) {
        continue;  // committed plans are conflict-free among themselves
      }
      for (const auto& x : tracks[static_cast<std::size_t>(i)]) {
        for (const auto& y : tracks[static_cast<std::size_t>(j)]) {
          if (x.action.end + reach < y.action.start || y.action.end + reach < x.action.start) {
            continue;
          }
          const Time when = std::max(x.action.start, y.action.start);
          if (best && when >= best->time) {
            continue;
          }
          if (auto c = check_pair(*p_.tables, i, x, j, y)) {
            best = std::move(c);
          }
        }
      }
    }
  }
  return best;
}

std::optional<Segment> CcbsSearch::search(const CtNode& node, AgentId agent, bool evacuation) {
  const Roadmap& g = *p_.roadmap;
  const Plan& plan = p_.plans[static_cast<std::size_t>(agent)];

  // Other moved agents, including their transfer instants and idle ends.
  Timeline moved(g, *p_.tables, p_.committed->from_time());
  for (const auto& [b, seg] : node.overrides) {
    if (b == agent) {
      continue;
    }
    const Plan& other = p_.plans[static_cast<std::size_t>(b)];
    std::vector<Action> actions{Action::wait(other.end_vertex(), other.end_time(), other.end_time())};
    actions.insert(actions.end(), seg.actions.begin(), seg.actions.end());
    moved.add_actions(b, actions, true, seg.end_vertex, seg.end_time);
  }

  ObstacleView view(*p_.committed, {.self = agent, .skip_all_terminals = true});
  view.add_layer(moved, {.self = agent});
  view.add_constraints(node.constraints, agent);

  SippRequest req;
  req.agent = agent;
  req.start = plan.end_vertex();
  req.start_time = plan.end_time();
  req.deadline = p_.deadline;
  std::vector<char> blocked;
  if (evacuation) {
    blocked.assign(g.num_vertices(), 0);
    for (AgentId b = 0; b < static_cast<AgentId>(p_.plans.size()); ++b) {
      if (b == agent) {
        continue;
      }
      const VertexId v = end_vertex(node, b);
      blocked[static_cast<std::size_t>(v)] = 1;
      for (VertexId u : p_.tables->vertices_near_vertex(v)) {
        blocked[static_cast<std::size_t>(u)] = 1;
      }
    }
    req.objective = SippObjective::kEarliestDeparture;
    req.blocked_goal = &blocked;
  } else {
    req.target = p_.target;
  }
  auto res = plan_toward(g, view, req);
  if (res.status == SippStatus::kTimeout) {
    timed_out_ = true;
  }
  if (!res.found()) {
    return std::nullopt;
  }
  return Segment{std::move(res.actions), res.end_vertex, res.end_time};
}

std::optional<Segment> CcbsSearch::evacuate_idle(const CtNode& node, AgentId agent) { return search(node, agent, true); }

std::optional<Segment> CcbsSearch::replan(const CtNode& node, AgentId agent) {
  return search(node, agent, agent != p_.agent);
}

std::optional<CtNode> CcbsSearch::root() {
  CtNode node;
  node.id = next_id_++;
  auto seg = search(node, p_.agent, false);
  if (!seg) {
    return std::nullopt;
  }
  node.overrides.emplace(p_.agent, std::move(*seg));
  node.cost = cost_of(node);
  return node;
}

std::vector<CtNode> CcbsSearch::branch(const CtNode& node, const Conflict& conflict) {
  std::vector<CtNode> children;
  const bool idle1 = idle(node, conflict.agent1, conflict.item1);
  const bool idle2 = idle(node, conflict.agent2, conflict.item2);
  if (idle1 || idle2) {
    // Move the idle party out of the way; constraints stay as they are.
    AgentId evacuee = idle2 ? conflict.agent2 : conflict.agent1;
    if (idle1 && idle2 && node.overrides.contains(conflict.agent1) && !node.overrides.contains(conflict.agent2)) {
      evacuee = conflict.agent1;
    }
    auto seg = evacuate_idle(node, evacuee);
    if (!seg) {
      return children;
    }
    CtNode child = node;
    child.id = next_id_++;
    child.overrides[evacuee] = std::move(*seg);
    child.cost = std::max(node.cost, cost_of(child));
    children.push_back(std::move(child));
    return children;
  }
  for (const auto& [agent, constraint] :
       {std::pair{conflict.agent1, conflict.constraint1}, std::pair{conflict.agent2, conflict.constraint2}}) {
    CtNode child = node;
    child.constraints.push_back(constraint);
    auto seg = replan(child, agent);
    if (!seg) {
      continue;
    }
    child.id = next_id_++;
    child.overrides[agent] = std::move(*seg);
    child.cost = std::max(node.cost, cost_of(child));
    children.push_back(std::move(child));
  }
  return children;
}

CcbsResult CcbsSearch::solve() {
  CcbsResult result;
  auto start = root();
  if (!start) {
    result.status = timed_out_ || timed_out() ? CcbsStatus::kTimeout : CcbsStatus::kInfeasible;
    return result;
  }
  std::vector<CtNode> nodes;
  nodes.push_back(std::move(*start));
  auto worse = [&nodes](std::size_t a, std::size_t b) {
    const CtNode& x = nodes[a];
    const CtNode& y = nodes[b];
    if (x.cost != y.cost) {
      return x.cost > y.cost;
    }
    if (x.constraints.size() != y.constraints.size()) {
      return x.constraints.size() > y.constraints.size();
    }
    return x.id > y.id;
  };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(worse)> open(worse);
  open.push(0);
  result.generated = 1;

  while (!open.empty()) {
    if (timed_out_ || timed_out()) {
      result.status = CcbsStatus::kTimeout;
      return result;
    }
    const std::size_t index = open.top();
    open.pop();
    ++result.expanded;
    const auto conflict = first_conflict(nodes[index]);
    if (!conflict) {
      result.status = CcbsStatus::kSolved;
      for (auto& [agent, seg] : nodes[index].overrides) {
        result.segments.emplace_back(agent, seg);
      }
      return result;
    }
    auto children = branch(nodes[index], *conflict);
    for (auto& child : children) {
      nodes.push_back(std::move(child));
      open.push(nodes.size() - 1);
      ++result.generated;
    }
    if (p_.max_nodes > 0 && result.generated > p_.max_nodes) {
      break;
    }
  }
  result.status = timed_out_ ? CcbsStatus::kTimeout : CcbsStatus::kInfeasible;
  return result;
}

CcbsResult prioritized_plans(const CcbsProblem& problem) {
  CcbsSearch search(problem);
  return search.solve();
}

}  // namespace cplp
