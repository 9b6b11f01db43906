#include "cplp/plan.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace cplp {

void Plan::append(const Roadmap& roadmap, const Action& action) {
  if (action.vertex != end_vertex_ || std::abs(action.start - end_time_) > kTimeEps) {
    std::ostringstream msg;
    msg << "agent " << agent_ << ": action at vertex " << action.vertex << " t=" << action.start
        << " does not continue plan ending at vertex " << end_vertex_ << " t=" << end_time_;
    throw std::logic_error(msg.str());
  }
  if (action.is_wait() && !(action.end >= action.start)) {
    throw std::logic_error("wait-action ends before it starts");
  }
  if (action.end == kInf) {
    throw std::logic_error("terminal waits are implicit and cannot be appended");
  }
  actions_.push_back(action);
  // Snap to the exact previous end so that drift never accumulates.
  actions_.back().start = end_time_;
  if (action.is_move()) {
    actions_.back().end = end_time_ + roadmap.edge(action.edge).duration;
  }
  end_vertex_ = action.end_vertex(roadmap);
  end_time_ = actions_.back().end;
}

void Plan::append(const Roadmap& roadmap, std::span<const Action> actions) {
  for (const auto& a : actions) {
    append(roadmap, a);
  }
}

std::size_t Plan::first_action_ending_at_or_after(Time t) const {
  auto it = std::lower_bound(actions_.begin(), actions_.end(), t,
                             [](const Action& a, Time value) { return a.end < value; });
  return static_cast<std::size_t>(it - actions_.begin());
}

std::vector<std::string> plan_defects(const Roadmap& roadmap, const Plan& plan) {
  std::vector<std::string> defects;
  VertexId at = plan.start_vertex();
  Time now = plan.start_time();
  for (std::size_t i = 0; i < plan.actions().size(); ++i) {
    const Action& a = plan.actions()[i];
    std::ostringstream where;
    where << "agent " << plan.agent() << " action " << i << ": ";
    if (a.vertex != at) {
      defects.push_back(where.str() + "starts at the wrong vertex");
    }
    if (std::abs(a.start - now) > kTimeEps) {
      defects.push_back(where.str() + "starts at the wrong time");
    }
    if (a.is_move()) {
      if (a.edge < 0 || static_cast<std::size_t>(a.edge) >= roadmap.num_edges()) {
        defects.push_back(where.str() + "unknown edge");
        return defects;
      }
      if (roadmap.edge(a.edge).from != a.vertex) {
        defects.push_back(where.str() + "edge does not leave the action vertex");
      }
      if (std::abs(a.end - a.start - roadmap.edge(a.edge).duration) > kTimeEps) {
        defects.push_back(where.str() + "move duration disagrees with the edge");
      }
    } else if (a.end < a.start) {
      defects.push_back(where.str() + "wait ends before it starts");
    }
    at = a.end_vertex(roadmap);
    now = a.end;
  }
  return defects;
}

nlohmann::json plans_to_json(const Roadmap& roadmap, std::span<const Plan> plans) {
  nlohmann::json doc;
  doc["agent_radius"] = roadmap.agent_radius();
  doc["agent_speed"] = roadmap.agent_speed();
  auto& out = doc["plans"] = nlohmann::json::array();
  for (const auto& plan : plans) {
    nlohmann::json p;
    p["agent"] = plan.agent();
    p["start_vertex"] = plan.start_vertex();
    p["start_time"] = plan.start_time();
    auto& actions = p["actions"] = nlohmann::json::array();
    for (const auto& a : plan.actions()) {
      if (a.is_move()) {
        const Edge& e = roadmap.edge(a.edge);
        actions.push_back({{"type", "move"}, {"edge", a.edge}, {"from", e.from}, {"to", e.to},
                           {"start", a.start}, {"end", a.end}});
      } else {
        actions.push_back({{"type", "wait"}, {"vertex", a.vertex}, {"start", a.start}, {"end", a.end}});
      }
    }
    actions.push_back(
        {{"type", "wait"}, {"vertex", plan.end_vertex()}, {"start", plan.end_time()}, {"end", nullptr}});
    out.push_back(std::move(p));
  }
  return doc;
}

std::vector<Plan> plans_from_json(const Roadmap& roadmap, const nlohmann::json& doc) {
  std::vector<Plan> plans;
  for (const auto& p : doc.at("plans")) {
    Plan plan(p.at("agent").get<AgentId>(), p.at("start_vertex").get<VertexId>(),
              p.value("start_time", 0.0));
    if (plan.start_vertex() < 0 || static_cast<std::size_t>(plan.start_vertex()) >= roadmap.num_vertices()) {
      throw std::invalid_argument("trace start_vertex out of range");
    }
    for (const auto& a : p.at("actions")) {
      const auto type = a.at("type").get<std::string>();
      const Time start = a.at("start").get<double>();
      if (type == "move") {
        const auto e = a.at("edge").get<EdgeId>();
        if (e < 0 || static_cast<std::size_t>(e) >= roadmap.num_edges()) {
          throw std::invalid_argument("trace references an unknown edge");
        }
        plan.append(roadmap, Action::move(roadmap, e, start));
      } else if (type == "wait") {
        if (a.at("end").is_null()) {
          if (a.at("vertex").get<VertexId>() != plan.end_vertex()) {
            throw std::invalid_argument("terminal wait is not at the plan's last vertex");
          }
          break;
        }
        plan.append(roadmap, Action::wait(a.at("vertex").get<VertexId>(), start, a.at("end").get<double>()));
      } else {
        throw std::invalid_argument("unknown action type " + type);
      }
    }
    plans.push_back(std::move(plan));
  }
  return plans;
}

}  // namespace cplp
