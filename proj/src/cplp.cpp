#include "cplp/cplp.hpp"

#include <algorithm>
#include <deque>
#include <numeric>

#include "cplp/sipp.hpp"

namespace cplp {

const char* to_string(Branch b) {
  switch (b) {
    case Branch::kNothingToDo:
      return "none";
    case Branch::kShortPlans:
      return "short_plans";
    case Branch::kShortRandomPlans:
      return "short_random_plans";
  }
  return "?";
}

Planner::Planner(const Roadmap& roadmap, const ConflictTables& tables, std::span<const VertexId> starts,
                 PlannerParams params)
    : roadmap_(&roadmap),
      tables_(&tables),
      params_(std::move(params)),
      visits_(roadmap.num_vertices()),
      timeline_(roadmap, tables, 0.0),
      agent_task_(starts.size()),
      rng_(params_.seed) {
  for (std::size_t a = 0; a < starts.size(); ++a) {
    plans_.emplace_back(static_cast<AgentId>(a), starts[a]);
  }
  refresh_timeline(0.0);
}

void Planner::refresh_timeline(Time t_plan) { timeline_ = Timeline::rebuild(*roadmap_, plans_, *tables_, t_plan); }

void Planner::add_tasks(std::span<const Task> tasks) { tasks_.insert(tasks_.end(), tasks.begin(), tasks.end()); }

void Planner::record_visits(const Action& a) {
  auto push = [this](VertexId v, Time from, Time to) {
    auto& list = visits_[static_cast<std::size_t>(v)];
    if (!list.empty() && list.back().to >= from - kTimeEps && list.back().from <= from) {
      list.back().to = std::max(list.back().to, to);
      return;
    }
    list.push_back({from, to});
  };
  if (a.is_wait()) {
    push(a.vertex, a.start, a.end);
    return;
  }
  const Edge& e = roadmap_->edge(a.edge);
  push(e.from, a.start, a.start);
  push(e.to, a.end, a.end);
}

void Planner::commit(AgentId agent, std::span<const Action> actions) {
  Plan& plan = plans_[static_cast<std::size_t>(agent)];
  for (const auto& a : actions) {
    plan.append(*roadmap_, a);
    record_visits(plan.actions().back());
  }
  timeline_.replace_plan(plan);
}

std::optional<Time> Planner::completion_time(VertexId target, Time release) const {
  Time best = kInf;
  for (const auto& v : visits_[static_cast<std::size_t>(target)]) {
    if (v.to >= release) {
      best = std::min(best, std::max(v.from, release));
    }
  }
  for (const auto& plan : plans_) {
    if (plan.end_vertex() == target) {
      best = std::min(best, std::max(plan.end_time(), release));
    }
  }
  if (best == kInf) {
    return std::nullopt;
  }
  return best;
}

bool Planner::scheduled(const Task& task) const { return completion_time(task.target, task.release).has_value(); }

std::vector<CompletedTask> Planner::remove_completed_tasks(Time /*t_plan*/) {
  std::vector<CompletedTask> done;
  std::vector<Task> open;
  for (auto& task : tasks_) {
    if (auto at = completion_time(task.target, task.release)) {
      done.push_back({task, *at});
    } else {
      open.push_back(task);
    }
  }
  tasks_ = std::move(open);
  for (auto& slot : agent_task_) {
    if (slot && std::none_of(tasks_.begin(), tasks_.end(), [&](const Task& t) { return t.id == *slot; })) {
      slot.reset();
    }
  }
  completed_.insert(completed_.end(), done.begin(), done.end());
  return done;
}

void Planner::add_wait_actions(Time t_plan) {
  for (auto& plan : plans_) {
    if (plan.end_time() < t_plan - kTimeEps) {
      const Action wait = Action::wait(plan.end_vertex(), plan.end_time(), t_plan);
      plan.append(*roadmap_, wait);
      record_visits(wait);
    }
  }
  refresh_timeline(t_plan);
}

void Planner::update_task_priorities(Time t_plan) {
  for (auto& task : tasks_) {
    task.priority = t_plan - task.release;
  }
}

std::vector<std::size_t> Planner::tasks_by_priority() const {
  std::vector<std::size_t> order(tasks_.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [this](std::size_t a, std::size_t b) {
    const Task& x = tasks_[a];
    const Task& y = tasks_[b];
    if (x.priority != y.priority) {
      return x.priority > y.priority;
    }
    return x.id < y.id;
  });
  return order;
}

Time Planner::arrival_estimate(AgentId agent, VertexId target) const {
  const Plan& plan = plans_[static_cast<std::size_t>(agent)];
  return plan.end_time() + (*roadmap_->shortest_time_field(target))(plan.end_vertex());
}

bool Planner::select_and_plan_prioritized(Time /*t_plan*/) {
  const auto order = tasks_by_priority();
  const auto n = static_cast<AgentId>(plans_.size());
  if (order.empty() || n == 0) {
    return false;
  }
  std::vector<std::vector<AgentId>> ranked;
  for (std::size_t ti : order) {
    const VertexId target = tasks_[ti].target;
    std::vector<std::pair<Time, AgentId>> by_arrival;
    for (AgentId a = 0; a < n; ++a) {
      by_arrival.emplace_back(arrival_estimate(a, target), a);
    }
    std::sort(by_arrival.begin(), by_arrival.end());
    std::vector<AgentId> agents;
    for (const auto& [t, a] : by_arrival) {
      agents.push_back(a);
    }
    ranked.push_back(std::move(agents));
  }

  const auto ranks = static_cast<std::size_t>(std::min<AgentId>(params_.alpha, n));
  for (std::size_t k = 0; k < ranks; ++k) {
    for (std::size_t i = 0; i < order.size(); ++i) {
      const Task& task = tasks_[order[i]];
      const AgentId agent = ranked[i][k];
      const auto budget = params_.attempt_budget ? params_.attempt_budget(last_.ccbs_attempts) : params_.ccbs_deadline;
      ++last_.ccbs_attempts;
      const CcbsProblem problem{.roadmap = roadmap_,
                                .tables = tables_,
                                .plans = plans_,
                                .committed = &timeline_,
                                .agent = agent,
                                .target = task.target,
                                .deadline = Clock::now() + budget,
                                .max_nodes = params_.ccbs_max_nodes};
      const auto res = prioritized_plans(problem);
      if (res.status != CcbsStatus::kSolved) {
        continue;
      }
      for (const auto& [a, seg] : res.segments) {
        commit(a, seg.actions);
        if (a == agent) {
          prioritized_arrival_ = seg.end_time;
        }
      }
      prioritized_task_ = task.id;
      prioritized_agent_ = agent;
      last_.new_prioritized_pair = true;
      return true;
    }
  }
  return false;
}

void Planner::assign_tasks_to_agents(Time /*t_plan*/) {
  std::vector<char> taken(plans_.size(), 0);
  for (auto& slot : agent_task_) {
    slot.reset();
  }
  for (auto& task : tasks_) {
    task.assigned.reset();
  }
  if (prioritized_task_) {
    taken[static_cast<std::size_t>(prioritized_agent_)] = 1;
    agent_task_[static_cast<std::size_t>(prioritized_agent_)] = prioritized_task_;
    for (auto& task : tasks_) {
      if (task.id == *prioritized_task_) {
        task.assigned = prioritized_agent_;
      }
    }
  }
  for (std::size_t ti : tasks_by_priority()) {
    Task& task = tasks_[ti];
    if (task.assigned || scheduled(task)) {
      continue;
    }
    AgentId best = -1;
    Time best_t = kInf;
    for (AgentId a = 0; a < static_cast<AgentId>(plans_.size()); ++a) {
      if (taken[static_cast<std::size_t>(a)]) {
        continue;
      }
      const Time t = arrival_estimate(a, task.target);
      if (t < best_t) {
        best_t = t;
        best = a;
      }
    }
    if (best < 0) {
      break;
    }
    taken[static_cast<std::size_t>(best)] = 1;
    task.assigned = best;
    agent_task_[static_cast<std::size_t>(best)] = task.id;
  }
}

void Planner::assign_next_task(AgentId agent, Time /*t_plan*/) {
  agent_task_[static_cast<std::size_t>(agent)].reset();
  for (std::size_t ti : tasks_by_priority()) {
    Task& task = tasks_[ti];
    if (task.assigned || scheduled(task)) {
      continue;
    }
    task.assigned = agent;
    agent_task_[static_cast<std::size_t>(agent)] = task.id;
    return;
  }
}

void Planner::short_plans(Time t_plan) {
  auto task_of = [this](AgentId a) -> Task* {
    const auto& slot = agent_task_[static_cast<std::size_t>(a)];
    if (!slot) {
      return nullptr;
    }
    for (auto& t : tasks_) {
      if (t.id == *slot) {
        return &t;
      }
    }
    return nullptr;
  };
  std::vector<AgentId> agents;
  for (AgentId a = 0; a < static_cast<AgentId>(plans_.size()); ++a) {
    if (a != prioritized_agent_ && task_of(a) != nullptr) {
      agents.push_back(a);
    }
  }
  std::stable_sort(agents.begin(), agents.end(), [&](AgentId a, AgentId b) {
    const Task* x = task_of(a);
    const Task* y = task_of(b);
    if (x->priority != y->priority) {
      return x->priority > y->priority;
    }
    return x->id < y->id;
  });

  const Time until = t_plan + params_.horizon;
  for (AgentId agent : agents) {
    // Each round commits at least one move, so the number of rounds is
    // bounded by the horizon; the cap only guards against degenerate input.
    for (int round = 0; round < 1000; ++round) {
      const Plan& plan = plans_[static_cast<std::size_t>(agent)];
      const Task* task = task_of(agent);
      if (task == nullptr || plan.end_time() >= until - kTimeEps) {
        break;
      }
      const auto blocked = timeline_.blocked_goal_mask(agent);
      const ObstacleView view(timeline_, {.self = agent});
      const auto res = plan_toward(*roadmap_, view,
                                   {.agent = agent,
                                    .start = plan.end_vertex(),
                                    .start_time = plan.end_time(),
                                    .target = task->target,
                                    .horizon_end = until,
                                    .blocked_goal = &blocked,
                                    .expansion_budget = 0,
                                    .deadline = std::nullopt});
      if (!res.found()) {
        break;
      }
      const bool reached = res.end_vertex == task->target;
      if (!reached && !res.improving) {
        break;
      }
      commit(agent, res.actions);
      if (reached) {
        assign_next_task(agent, t_plan);
      }
    }
  }
}

void Planner::short_random_plans(Time t_plan) {
  std::vector<AgentId> order(plans_.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng_);
  const Time until = t_plan + params_.horizon;
  for (AgentId agent : order) {
    const Plan& plan = plans_[static_cast<std::size_t>(agent)];
    if (plan.end_time() >= until - kTimeEps) {
      continue;
    }
    const auto blocked = timeline_.blocked_goal_mask(agent);
    // Goal-eligible vertices within three hops.
    std::vector<int> hops(roadmap_->num_vertices(), -1);
    std::deque<VertexId> queue{plan.end_vertex()};
    hops[static_cast<std::size_t>(plan.end_vertex())] = 0;
    std::vector<VertexId> candidates;
    while (!queue.empty()) {
      const VertexId v = queue.front();
      queue.pop_front();
      if (hops[static_cast<std::size_t>(v)] == 3) {
        continue;
      }
      for (EdgeId e : roadmap_->out_edges(v)) {
        const VertexId u = roadmap_->edge(e).to;
        if (hops[static_cast<std::size_t>(u)] >= 0) {
          continue;
        }
        hops[static_cast<std::size_t>(u)] = hops[static_cast<std::size_t>(v)] + 1;
        queue.push_back(u);
        if (!blocked[static_cast<std::size_t>(u)]) {
          candidates.push_back(u);
        }
      }
    }
    const ObstacleView view(timeline_, {.self = agent});
    for (int attempt = 0; attempt < 3 && !candidates.empty(); ++attempt) {
      std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
      const VertexId goal = candidates[pick(rng_)];
      const auto res = plan_toward(*roadmap_, view,
                                   {.agent = agent,
                                    .start = plan.end_vertex(),
                                    .start_time = plan.end_time(),
                                    .target = goal,
                                    .horizon_end = until,
                                    .blocked_goal = &blocked,
                                    .expansion_budget = 0,
                                    .deadline = std::nullopt});
      if (res.found()) {
        commit(agent, res.actions);
        break;
      }
    }
  }
}

Time Planner::get_next_planning_time(Time t_plan) const {
  const bool all_scheduled =
      std::all_of(tasks_.begin(), tasks_.end(), [this](const Task& t) { return scheduled(t); });
  if (all_scheduled) {
    Time latest = t_plan;
    for (const auto& plan : plans_) {
      latest = std::max(latest, plan.end_time());
    }
    return latest;
  }
  const Time until = t_plan + params_.horizon;
  Time earliest = kInf;
  for (const auto& plan : plans_) {
    if (plan.end_time() >= until - kTimeEps) {
      earliest = std::min(earliest, plan.end_time());
    }
  }
  return earliest == kInf ? until : earliest;
}

std::optional<Time> Planner::call(Time t_plan, std::span<const Task> new_tasks) {
  last_ = CallRecord{};
  last_.t_plan = t_plan;
  add_tasks(new_tasks);
  if (prioritized_task_ && prioritized_arrival_ <= t_plan + kTimeEps) {
    prioritized_task_.reset();
    prioritized_agent_ = -1;
  }
  last_.tasks_completed = remove_completed_tasks(t_plan).size();
  last_.uncompleted = tasks_.size();
  if (tasks_.empty()) {
    return std::nullopt;
  }
  add_wait_actions(t_plan);
  update_task_priorities(t_plan);
  if (!prioritized_task_) {
    select_and_plan_prioritized(t_plan);
  }
  assign_tasks_to_agents(t_plan);
  if (!prioritized_task_) {
    last_.branch = Branch::kShortRandomPlans;
    short_random_plans(t_plan);
    ++random_plan_calls_;
    if (++consecutive_random_ >= params_.random_plan_cap) {
      presumed_infeasible_ = true;
    }
  } else {
    last_.branch = Branch::kShortPlans;
    consecutive_random_ = 0;
    short_plans(t_plan);
  }
  last_.prioritized_task = prioritized_task_;
  last_.prioritized_agent = prioritized_agent_;
  last_.t_next = get_next_planning_time(t_plan);
  return last_.t_next;
}

}  // namespace cplp
