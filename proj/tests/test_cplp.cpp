#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "cplp/cplp.hpp"
#include "cplp/validate.hpp"
#include "support.hpp"

using namespace cplp;
using namespace std::chrono_literals;

namespace {

Task task(TaskId id, VertexId target, Time release) {
  Task t;
  t.id = id;
  t.target = target;
  t.release = release;
  return t;
}

struct World {
  std::unique_ptr<Roadmap> g;
  ConflictTables tables;

  explicit World(std::unique_ptr<Roadmap> roadmap) : g(std::move(roadmap)), tables(precompute(*g)) {}
};

void wait_until(Planner& p, AgentId a, Time t) {
  const Plan& plan = p.plans()[static_cast<std::size_t>(a)];
  const Action w = Action::wait(plan.end_vertex(), plan.end_time(), t);
  p.commit(a, std::span<const Action>(&w, 1));
}

bool is_prefix(const Plan& before, const Plan& after) {
  if (after.actions().size() < before.actions().size()) {
    return false;
  }
  return std::equal(before.actions().begin(), before.actions().end(), after.actions().begin());
}

}  // namespace

TEST_CASE("get_next_planning_time branches") {
  World w(cplp::testing::path_graph(8, 3.0));
  const std::vector<VertexId> starts{0, 3, 6};

  SUBCASE("all tasks scheduled: latest plan end") {
    Planner p(*w.g, w.tables, std::span(starts).first(2));
    wait_until(p, 0, 5.0);
    wait_until(p, 1, 9.0);
    const std::vector<Task> ts{task(0, 3, 2.0)};
    p.add_tasks(ts);
    CHECK(p.get_next_planning_time(0.0) == 9.0);
  }
  SUBCASE("unscheduled tasks: earliest end past the horizon") {
    Planner p(*w.g, w.tables, starts);
    const Time t_plan = 10.0;
    wait_until(p, 0, t_plan + 0.4);
    wait_until(p, 1, t_plan + 1.2);
    wait_until(p, 2, t_plan + 3.0);
    const std::vector<Task> ts{task(0, 7, t_plan)};
    p.add_tasks(ts);
    CHECK(p.get_next_planning_time(t_plan) == doctest::Approx(t_plan + 1.2));
  }
  SUBCASE("unscheduled tasks, nothing past the horizon: t_plan + horizon") {
    Planner p(*w.g, w.tables, starts);
    wait_until(p, 0, 10.2);
    const std::vector<Task> ts{task(0, 7, 10.0)};
    p.add_tasks(ts);
    CHECK(p.get_next_planning_time(10.0) == doctest::Approx(11.0));
  }
}

TEST_CASE("remove_completed_tasks") {
  World w(cplp::testing::path_graph(4, 3.0));
  const std::vector<VertexId> starts{0};
  Planner p(*w.g, w.tables, starts);
  // Wait at 0 until 2, pass through 1 at t = 5 without stopping, end at 2.
  wait_until(p, 0, 2.0);
  const std::vector<Action> moves{Action::move(*w.g, w.g->find_edge(0, 1), 2.0),
                                  Action::move(*w.g, w.g->find_edge(1, 2), 5.0)};
  p.commit(0, moves);
  const std::vector<Task> ts{task(0, 1, 4.0), task(1, 0, 3.0), task(2, 2, 50.0), task(3, 3, 0.0)};
  p.add_tasks(ts);
  const auto done = p.remove_completed_tasks(0.0);
  REQUIRE(done.size() == 2);
  CHECK(done[0].task.id == 0);
  CHECK(done[0].completed_at == doctest::Approx(5.0));
  CHECK(done[1].task.id == 2);
  CHECK(done[1].completed_at == 50.0);
  REQUIRE(p.open_tasks().size() == 2);
  CHECK(p.open_tasks()[0].id == 1);
  CHECK(p.open_tasks()[1].id == 3);
}

TEST_CASE("add_wait_actions") {
  World w(cplp::testing::path_graph(4, 3.0));
  const std::vector<VertexId> starts{0, 2, 3};
  Planner p(*w.g, w.tables, std::span(starts).first(2));
  wait_until(p, 1, 6.0);
  p.add_wait_actions(5.0);
  const Plan& empty_before = p.plans()[0];
  REQUIRE(empty_before.actions().size() == 1);
  CHECK(empty_before.actions()[0] == Action::wait(0, 0.0, 5.0));
  CHECK(p.plans()[1].actions().size() == 1);
  CHECK(p.plans()[1].end_time() == 6.0);

  Planner q(*w.g, w.tables, std::span(starts).first(1));
  wait_until(q, 0, 3.0);
  q.add_wait_actions(5.0);
  REQUIRE(q.plans()[0].actions().size() == 2);
  CHECK(q.plans()[0].actions()[1] == Action::wait(0, 3.0, 5.0));

  const std::vector<Plan> once(p.plans().begin(), p.plans().end());
  p.add_wait_actions(5.0);
  for (std::size_t a = 0; a < once.size(); ++a) {
    CHECK(once[a].actions().size() == p.plans()[a].actions().size());
  }
}

TEST_CASE("update_task_priorities") {
  World w(cplp::testing::path_graph(4, 3.0));
  const std::vector<VertexId> starts{0};
  Planner p(*w.g, w.tables, starts);
  const std::vector<Task> ts{task(0, 3, 10.0), task(1, 3, 40.0), task(2, 3, 25.0)};
  p.add_tasks(ts);
  p.update_task_priorities(40.0);
  CHECK(p.open_tasks()[0].priority == 30.0);
  CHECK(p.open_tasks()[1].priority == 0.0);
  CHECK(p.open_tasks()[2].priority == 15.0);
}

TEST_CASE("planner call") {
  World w(cplp::testing::path_graph(4, 3.0));
  const std::vector<VertexId> starts{0};

  SUBCASE("no open tasks") {
    Planner p(*w.g, w.tables, starts);
    CHECK_FALSE(p.call(1.0, {}).has_value());
    CHECK(p.plans()[0].empty());
  }
  SUBCASE("task at the agent's vertex") {
    Planner p(*w.g, w.tables, starts);
    const std::vector<Task> ts{task(0, 0, 0.5)};
    CHECK_FALSE(p.call(1.0, ts).has_value());
    CHECK(p.completed().size() == 1);
  }
  SUBCASE("one distant task") {
    Planner p(*w.g, w.tables, starts);
    const std::vector<Task> ts{task(0, 3, 0.0)};
    const auto t_next = p.call(0.5, ts);
    REQUIRE(p.prioritized_task().has_value());
    CHECK(*p.prioritized_task() == 0);
    CHECK(p.prioritized_agent() == 0);
    CHECK(p.plans()[0].end_vertex() == 3);
    REQUIRE(t_next.has_value());
    CHECK(*t_next == doctest::Approx(9.5));
    CHECK(*t_next == p.plans()[0].end_time());
    CHECK(p.last_call().branch == Branch::kShortPlans);

    // At arrival the pair is released and the task is done.
    CHECK_FALSE(p.call(*t_next, {}).has_value());
    CHECK_FALSE(p.prioritized_task().has_value());
    REQUIRE(p.completed().size() == 1);
    CHECK(p.completed()[0].completed_at == doctest::Approx(9.5));
  }
}

TEST_CASE("select_and_plan_prioritized") {
  World w(cplp::testing::path_graph(5, 3.0));
  const std::vector<VertexId> starts{0, 4};
  const std::vector<Task> ts{task(0, 1, 0.0)};

  SUBCASE("nearest agent on a free path") {
    Planner p(*w.g, w.tables, starts);
    p.add_tasks(ts);
    p.add_wait_actions(0.0);
    CHECK(p.select_and_plan_prioritized(0.0));
    CHECK(p.prioritized_agent() == 0);
  }
  SUBCASE("the second-nearest agent takes over after a timeout") {
    PlannerParams params;
    params.attempt_budget = [](std::size_t attempt) { return attempt == 0 ? 0us : std::chrono::microseconds(1s); };
    Planner p(*w.g, w.tables, starts, params);
    p.add_tasks(ts);
    p.add_wait_actions(0.0);
    CHECK(p.select_and_plan_prioritized(0.0));
    CHECK(p.prioritized_agent() == 1);
    CHECK(p.plans()[1].end_vertex() == 1);
  }
  SUBCASE("every attempt fails: random short plans instead") {
    PlannerParams params;
    params.attempt_budget = [](std::size_t) { return 0us; };
    Planner p(*w.g, w.tables, starts, params);
    p.call(0.0, ts);
    CHECK_FALSE(p.prioritized_task().has_value());
    CHECK(p.last_call().branch == Branch::kShortRandomPlans);
    CHECK(p.last_call().ccbs_attempts == 2);
  }
}

TEST_CASE("assign_tasks_to_agents") {
  World w(cplp::testing::path_graph(9, 3.0));

  SUBCASE("two tasks, two agents") {
    const std::vector<VertexId> starts{0, 8};
    Planner p(*w.g, w.tables, starts);
    const std::vector<Task> ts{task(0, 6, 0.0), task(1, 2, 5.0)};
    p.add_tasks(ts);
    p.update_task_priorities(10.0);
    p.assign_tasks_to_agents(10.0);
    CHECK(p.open_tasks()[0].assigned == 1);
    CHECK(p.open_tasks()[1].assigned == 0);
  }
  SUBCASE("more tasks than agents") {
    const std::vector<VertexId> starts{4};
    Planner p(*w.g, w.tables, starts);
    const std::vector<Task> ts{task(0, 8, 3.0), task(1, 0, 1.0), task(2, 7, 2.0)};
    p.add_tasks(ts);
    p.update_task_priorities(10.0);
    p.assign_tasks_to_agents(10.0);
    CHECK(p.open_tasks()[1].assigned == 0);
    CHECK_FALSE(p.open_tasks()[0].assigned.has_value());
    CHECK_FALSE(p.open_tasks()[2].assigned.has_value());
  }
  SUBCASE("more agents than tasks") {
    const std::vector<VertexId> starts{0, 4, 8};
    Planner p(*w.g, w.tables, starts);
    const std::vector<Task> ts{task(0, 5, 0.0)};
    p.add_tasks(ts);
    p.update_task_priorities(1.0);
    p.assign_tasks_to_agents(1.0);
    CHECK(p.open_tasks()[0].assigned == 1);
  }
}

TEST_CASE("short_plans") {
  SUBCASE("adjacent task is reached and the next task assigned") {
    World w(cplp::testing::path_graph(4, 3.0));
    const std::vector<VertexId> starts{0};
    Planner p(*w.g, w.tables, starts);
    const std::vector<Task> ts{task(0, 1, 0.0), task(1, 3, 0.5)};
    p.add_tasks(ts);
    p.add_wait_actions(1.0);
    p.update_task_priorities(1.0);
    p.assign_tasks_to_agents(1.0);
    p.short_plans(1.0);
    CHECK(p.plans()[0].end_vertex() == 1);
    CHECK(p.plans()[0].end_time() == doctest::Approx(4.0));
    CHECK(p.open_tasks()[1].assigned == 0);
  }
  SUBCASE("boxed in by a neighbour's final position") {
    // Vertex 1 is within 2r of agent 1 at vertex 2, and agent 0's only way out.
    World w(cplp::testing::make_roadmap({{0, 0}, {1.4, 0}, {3, 0}, {6, 0}}, {{0, 1}, {1, 2}, {2, 3}}));
    const std::vector<VertexId> starts{0, 2};
    Planner p(*w.g, w.tables, starts);
    const std::vector<Task> ts{task(0, 1, 0.0)};
    p.add_tasks(ts);
    p.add_wait_actions(1.0);
    p.update_task_priorities(1.0);
    p.assign_tasks_to_agents(1.0);
    REQUIRE(p.open_tasks()[0].assigned == 0);
    const auto before = p.plans()[0].actions().size();
    p.short_plans(1.0);
    CHECK(p.plans()[0].actions().size() == before);
  }
}

TEST_CASE("short_random_plans") {
  SUBCASE("single agent makes one excursion") {
    World w(cplp::testing::path_graph(6, 3.0));
    const std::vector<VertexId> starts{2};
    Planner p(*w.g, w.tables, starts);
    p.add_wait_actions(0.0);
    p.short_random_plans(0.0);
    CHECK(p.plans()[0].end_vertex() != 2);
    CHECK(p.plans()[0].end_time() >= 1.0);
  }
  SUBCASE("a blockade keeps everybody idle") {
    // Three agents on a triangle of side 2.5; every vertex is next to one.
    World w(cplp::testing::make_roadmap({{0, 0}, {2.5, 0}, {1.25, 2.165}, {1.25, 0.7}},
                                        {{0, 1}, {1, 2}, {2, 0}, {3, 0}, {3, 1}, {3, 2}}));
    const std::vector<VertexId> starts{0, 1, 2};
    Planner p(*w.g, w.tables, starts);
    p.add_wait_actions(0.0);
    p.short_random_plans(0.0);
    for (const auto& plan : p.plans()) {
      CHECK(plan.end_time() == 0.0);
    }
  }
  SUBCASE("seeded runs are reproducible") {
    std::mt19937_64 rng(3);
    World w(cplp::testing::random_roadmap(rng, 30, 20.0, 10));
    const std::vector<VertexId> starts{0, 10, 20};
    auto once = [&]() {
      Planner p(*w.g, w.tables, starts);
      p.add_wait_actions(0.0);
      p.short_random_plans(0.0);
      return std::vector<Plan>(p.plans().begin(), p.plans().end());
    };
    const auto a = once();
    const auto b = once();
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(std::equal(a[i].actions().begin(), a[i].actions().end(), b[i].actions().begin(), b[i].actions().end()));
    }
  }
}

TEST_CASE("lifelong invariants on random instances") {
  std::mt19937_64 rng(2024);
  std::size_t calls = 0;
  std::size_t pairs = 0;
  for (int trial = 0; trial < 6; ++trial) {
    World w(cplp::testing::random_roadmap(rng, 40, 22.0, 20));
    std::vector<VertexId> starts;
    for (VertexId v = 0; v < 40 && starts.size() < 6; ++v) {
      if (std::none_of(starts.begin(), starts.end(), [&](VertexId u) { return w.tables.vertex_vertex(u, v); })) {
        starts.push_back(v);
      }
    }
    PlannerParams params;
    params.ccbs_deadline = 1s;
    Planner p(*w.g, w.tables, starts, params);
    std::uniform_int_distribution<VertexId> vertex(0, 39);
    std::vector<Task> pending;
    for (TaskId id = 0; id < 30; ++id) {
      pending.push_back(task(id, vertex(rng), 1.5 * id));
    }
    std::size_t next = 0;
    Time t_plan = 0.0;
    Time t_prev = -1.0;
    std::optional<Time> t_next;
    std::optional<Time> pair_arrival;
    while (t_plan < 120.0) {
      std::vector<Task> fresh;
      while (next < pending.size() && pending[next].release <= t_plan) {
        fresh.push_back(pending[next++]);
      }
      const std::vector<Plan> before(p.plans().begin(), p.plans().end());
      t_next = p.call(t_plan, fresh);
      ++calls;
      for (std::size_t a = 0; a < before.size(); ++a) {
        CHECK(is_prefix(before[a], p.plans()[a]));
      }
      CHECK(validate(*w.g, p.plans()).empty());
      if (p.last_call().new_prioritized_pair) {
        ++pairs;
        // A new pair only once the previous one has arrived.
        if (pair_arrival) {
          CHECK(*pair_arrival <= t_plan + kTimeEps);
        }
        pair_arrival = p.prioritized_arrival();
      }
      t_prev = t_plan;
      if (t_next) {
        t_plan = std::max(*t_next, t_prev + 0.25);
      } else if (next < pending.size()) {
        t_plan = std::max(pending[next].release, t_prev + 0.25);
      } else {
        break;
      }
    }
    CHECK(p.completed().size() + p.open_tasks().size() == next);
  }
  CHECK(calls > 50);
  CHECK(pairs > 20);
}
