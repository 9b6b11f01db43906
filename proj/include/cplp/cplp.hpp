#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "cplp/ccbs.hpp"
#include "cplp/collision_tables.hpp"
#include "cplp/plan.hpp"
#include "cplp/roadmap.hpp"
#include "cplp/timeline.hpp"

namespace cplp {

using TaskId = std::int32_t;

struct Task {
  TaskId id = 0;
  VertexId target = 0;
  Time release = 0.0;
  double priority = 0.0;
  std::optional<AgentId> assigned;
};

struct PlannerParams {
  Time horizon = 1.0;  ///< t-bar, seconds of simulated time
  int alpha = 5;
  std::chrono::microseconds ccbs_deadline{25'000};
  /// Consecutive random-plan calls tolerated before the run is presumed
  /// infeasible.
  int random_plan_cap = 50;
  std::uint64_t seed = 1;
  /// CT node cap per prioritized attempt; 0 means unlimited.
  std::size_t ccbs_max_nodes = 0;
  /// Overrides the per-attempt deadline; receives the attempt index.
  std::function<std::chrono::microseconds(std::size_t)> attempt_budget;
};

enum class Branch { kNothingToDo, kShortPlans, kShortRandomPlans };

const char* to_string(Branch b);

/// Bookkeeping of one planner call.
struct CallRecord {
  Time t_plan = 0.0;
  Branch branch = Branch::kNothingToDo;
  std::optional<TaskId> prioritized_task;
  AgentId prioritized_agent = -1;
  bool new_prioritized_pair = false;
  std::size_t tasks_completed = 0;  ///< removed as completed at the start of the call
  std::size_t uncompleted = 0;      ///< after removal
  std::size_t ccbs_attempts = 0;
  std::optional<Time> t_next;
};

struct CompletedTask {
  Task task;
  Time completed_at = 0.0;
};

/// Lifelong planner state: committed plans, open tasks and the prioritized
/// task-agent pair. Plans are append-only.
class Planner {
 public:
  Planner(const Roadmap& roadmap, const ConflictTables& tables, std::span<const VertexId> starts,
          PlannerParams params = {});

  /// One planner call for plans starting at t_plan. Returns the next planning
  /// time, or nullopt when no task is open.
  std::optional<Time> call(Time t_plan, std::span<const Task> new_tasks);

  // Steps of a call, exposed for testing.
  std::vector<CompletedTask> remove_completed_tasks(Time t_plan);
  void add_wait_actions(Time t_plan);
  void update_task_priorities(Time t_plan);
  bool select_and_plan_prioritized(Time t_plan);
  void assign_tasks_to_agents(Time t_plan);
  void short_plans(Time t_plan);
  void short_random_plans(Time t_plan);
  [[nodiscard]] Time get_next_planning_time(Time t_plan) const;

  /// Earliest time >= release at which some committed plan (idling forever
  /// at its end) is at `target`, or nullopt.
  [[nodiscard]] std::optional<Time> completion_time(VertexId target, Time release) const;

  /// Appends actions to an agent's plan and keeps all indices in sync.
  void commit(AgentId agent, std::span<const Action> actions);

  [[nodiscard]] std::span<const Plan> plans() const { return plans_; }
  [[nodiscard]] std::span<const Task> open_tasks() const { return tasks_; }
  [[nodiscard]] std::span<const CompletedTask> completed() const { return completed_; }
  [[nodiscard]] std::optional<TaskId> prioritized_task() const { return prioritized_task_; }
  [[nodiscard]] AgentId prioritized_agent() const { return prioritized_agent_; }
  /// Arrival time of the prioritized agent at its task vertex.
  [[nodiscard]] Time prioritized_arrival() const { return prioritized_arrival_; }
  [[nodiscard]] const CallRecord& last_call() const { return last_; }
  [[nodiscard]] bool presumed_infeasible() const { return presumed_infeasible_; }
  [[nodiscard]] std::size_t random_plan_calls() const { return random_plan_calls_; }
  [[nodiscard]] const PlannerParams& params() const { return params_; }
  [[nodiscard]] const Timeline& timeline() const { return timeline_; }

  /// Adds tasks directly to the open set (used by tests and by call()).
  void add_tasks(std::span<const Task> tasks);

 private:
  struct Visit {
    Time from;
    Time to;
  };

  void record_visits(const Action& a);
  [[nodiscard]] Time arrival_estimate(AgentId agent, VertexId target) const;
  [[nodiscard]] std::vector<std::size_t> tasks_by_priority() const;
  [[nodiscard]] bool scheduled(const Task& task) const;
  void assign_next_task(AgentId agent, Time t_plan);
  void refresh_timeline(Time t_plan);

  const Roadmap* roadmap_;
  const ConflictTables* tables_;
  PlannerParams params_;
  std::vector<Plan> plans_;
  std::vector<Task> tasks_;
  std::vector<CompletedTask> completed_;
  std::vector<std::vector<Visit>> visits_;  // per vertex, finite visits
  Timeline timeline_;
  std::optional<TaskId> prioritized_task_;
  AgentId prioritized_agent_ = -1;
  Time prioritized_arrival_ = 0.0;
  std::vector<std::optional<TaskId>> agent_task_;
  std::mt19937_64 rng_;
  CallRecord last_;
  std::size_t random_plan_calls_ = 0;
  int consecutive_random_ = 0;
  bool presumed_infeasible_ = false;
};

}  // namespace cplp
