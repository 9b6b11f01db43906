#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cplp/collision_tables.hpp"
#include "cplp/cplp.hpp"
#include "cplp/roadmap.hpp"
#include "cplp/validate.hpp"

namespace cplp {

struct InstanceParams {
  int agents = 10;
  double density = 5.0;  ///< vertices per agent
  double gamma1 = 0.2;   ///< fraction of extra points sampled, then removed
  double gamma2 = 0.02;  ///< fraction of added long-range edges
  double task_rate = 0.05;
  Time duration = 200.0;  ///< tasks are released in [0, duration]
  std::uint64_t seed = 0;
};

struct Instance {
  std::shared_ptr<const Roadmap> roadmap;
  std::vector<VertexId> starts;
  std::vector<Task> tasks;  ///< sorted by release time
  InstanceParams params;
};

/// Pairs of sites whose Voronoi cells share a border. Sites are snapped to
/// a lattice of spacing 1/scale and must be distinct on it.
std::vector<std::pair<std::size_t, std::size_t>> voronoi_neighbors(std::span<const Point> sites,
                                                                   double scale = 1e5);

/// Random Voronoi roadmap with n_a * rho vertices on an l x l square,
/// l = 3 sqrt(n_v). Throws std::runtime_error if no connected graph could be
/// built.
std::unique_ptr<Roadmap> generate_graph(int agents, double density, std::uint64_t seed, double gamma1 = 0.2,
                                        double gamma2 = 0.02);

/// Exactly ceil(rate * n_a * duration) tasks, uniform in vertex and time.
std::vector<Task> generate_tasks(int agents, double rate, Time duration, std::size_t num_vertices,
                                 std::uint64_t seed);

/// Start vertices no two of which are within 2r, picked greedily in random
/// order. Throws std::runtime_error when the graph cannot hold all agents.
std::vector<VertexId> choose_starts(const Roadmap& roadmap, int agents, std::uint64_t seed);

Instance generate_instance(const InstanceParams& params);

nlohmann::json instance_to_json(const Instance& instance);
Instance instance_from_json(const nlohmann::json& doc);

/// Conservative rejection of instances that are certainly infeasible:
/// colliding starts, or an agent that cannot reach any vertex where it may
/// idle while every other agent stays at its start.
bool first_feasibility_screen(const Instance& instance, const ConflictTables& tables);

struct RunParams {
  PlannerParams planner;
  /// Planning lead time; by default max(n_a^1.25, 500) ms.
  std::optional<double> dt_ms;
  /// Simulated time allowed after the last release for open tasks to finish.
  Time drain = 100.0;
  /// Completion is measured over tasks released in this window; defaults to
  /// the second half of the release period.
  std::optional<Interval> window;
  /// Validates the committed plans after every call (slow).
  bool validate_each_call = false;
};

double default_dt_ms(int agents);

struct CallLog {
  Time t_call = 0.0;
  Time t_plan = 0.0;
  double duration_ms = 0.0;
  Branch branch = Branch::kNothingToDo;
  std::size_t uncompleted = 0;
  std::size_t tasks_completed = 0;
  bool new_prioritized_pair = false;
  std::size_t ccbs_attempts = 0;
  bool overrun = false;
};

struct RunReport {
  std::vector<CallLog> calls;
  double dt_ms = 0.0;
  Interval window;
  std::size_t released = 0;       ///< all tasks
  std::size_t completed = 0;      ///< all tasks, completed by the end of the run
  std::size_t uncompleted = 0;
  std::size_t window_released = 0;
  std::size_t window_completed = 0;   ///< released in the window and completed by the end
  std::size_t window_throughput = 0;  ///< completions that happen inside the window
  std::size_t collisions = 0;
  std::size_t per_call_collision_checks_failed = 0;
  Time max_task_wait = 0.0;
  std::size_t random_plan_calls = 0;
  bool presumed_infeasible = false;
  Time end_time = 0.0;

  [[nodiscard]] double completion_pct() const {
    return window_released == 0 ? 100.0 : 100.0 * static_cast<double>(window_completed) / window_released;
  }
  [[nodiscard]] double mean_call_ms() const;
  [[nodiscard]] double max_call_ms() const;
  [[nodiscard]] std::size_t overruns() const;
};

/// Lifelong simulation of one instance. The final committed plans are
/// written to `plans_out` when given.
RunReport run(const Instance& instance, const ConflictTables& tables, const RunParams& params,
              std::vector<Plan>* plans_out = nullptr);

nlohmann::json report_to_json(const RunReport& report);
/// One row per call: t_plan, duration_ms, branch, open tasks.
std::string calls_to_csv(const RunReport& report);

}  // namespace cplp
