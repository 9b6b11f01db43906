#include "cplp/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include <boost/polygon/voronoi.hpp>
#include <nlohmann/json.hpp>

namespace cplp {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Independent streams for graph, starts and tasks of one instance seed.
std::uint64_t stream(std::uint64_t seed, std::uint64_t k) { return splitmix(splitmix(seed) + k); }

std::size_t ceil_count(double x) { return static_cast<std::size_t>(std::ceil(x - 1e-9)); }

bool connected(const std::vector<std::set<std::size_t>>& adj, const std::vector<char>& alive) {
  std::size_t first = adj.size();
  std::size_t count = 0;
  for (std::size_t v = 0; v < adj.size(); ++v) {
    if (alive[v]) {
      first = std::min(first, v);
      ++count;
    }
  }
  if (count == 0) {
    return false;
  }
  std::vector<char> seen(adj.size(), 0);
  std::deque<std::size_t> queue{first};
  seen[first] = 1;
  std::size_t reached = 1;
  while (!queue.empty()) {
    const std::size_t v = queue.front();
    queue.pop_front();
    for (std::size_t u : adj[v]) {
      if (alive[u] && !seen[u]) {
        seen[u] = 1;
        ++reached;
        queue.push_back(u);
      }
    }
  }
  return reached == count;
}

std::optional<std::unique_ptr<Roadmap>> try_generate(std::size_t n_v, std::uint64_t seed, double gamma1,
                                                     double gamma2) {
  std::mt19937_64 rng(seed);
  const double side = 3.0 * std::sqrt(static_cast<double>(n_v));
  const std::size_t sampled = ceil_count((1.0 + gamma1) * static_cast<double>(n_v));
  const std::size_t to_remove = sampled - n_v;

  // Sites live on the lattice used by the Voronoi construction, so the
  // roadmap matches the diagram exactly.
  constexpr double kScale = 1e5;
  std::uniform_real_distribution<double> coord(0.0, side);
  std::set<std::pair<long, long>> seen;
  std::vector<Point> sites;
  while (sites.size() < sampled) {
    const long x = std::lround(coord(rng) * kScale);
    const long y = std::lround(coord(rng) * kScale);
    if (seen.insert({x, y}).second) {
      sites.push_back({static_cast<double>(x) / kScale, static_cast<double>(y) / kScale});
    }
  }
  std::vector<std::set<std::size_t>> adj(sampled);
  for (const auto& [a, b] : voronoi_neighbors(sites, kScale)) {
    adj[a].insert(b);
    adj[b].insert(a);
  }

  std::vector<char> alive(sampled, 1);
  std::vector<std::size_t> order(sampled);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t removed = 0;
  for (std::size_t v : order) {
    if (removed == to_remove) {
      break;
    }
    alive[v] = 0;
    if (connected(adj, alive)) {
      ++removed;
    } else {
      alive[v] = 1;
    }
  }
  if (removed < to_remove) {
    return std::nullopt;
  }

  std::vector<VertexId> relabel(sampled, -1);
  std::vector<Point> points;
  for (std::size_t v = 0; v < sampled; ++v) {
    if (alive[v]) {
      relabel[v] = static_cast<VertexId>(points.size());
      points.push_back(sites[v]);
    }
  }
  std::set<std::pair<VertexId, VertexId>> edges;
  for (std::size_t v = 0; v < sampled; ++v) {
    if (!alive[v]) {
      continue;
    }
    for (std::size_t u : adj[v]) {
      if (alive[u] && v < u) {
        edges.insert({relabel[v], relabel[u]});
      }
    }
  }

  // Extra edges between uniformly drawn non-adjacent pairs.
  const std::size_t extra = ceil_count(gamma2 * static_cast<double>(n_v));
  const std::size_t max_pairs = n_v * (n_v - 1) / 2;
  std::uniform_int_distribution<VertexId> pick(0, static_cast<VertexId>(n_v) - 1);
  for (std::size_t added = 0; added < extra && edges.size() < max_pairs;) {
    VertexId a = pick(rng);
    VertexId b = pick(rng);
    if (a == b) {
      continue;
    }
    if (a > b) {
      std::swap(a, b);
    }
    if (edges.insert({a, b}).second) {
      ++added;
    }
  }
  return std::make_unique<Roadmap>(std::move(points), std::vector<std::pair<VertexId, VertexId>>(edges.begin(), edges.end()),
                                   1.0, 1.0);
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> voronoi_neighbors(std::span<const Point> sites, double scale) {
  std::vector<boost::polygon::point_data<int>> lattice;
  lattice.reserve(sites.size());
  for (const auto& p : sites) {
    lattice.emplace_back(static_cast<int>(std::lround(p.x * scale)), static_cast<int>(std::lround(p.y * scale)));
  }
  boost::polygon::voronoi_diagram<double> vd;
  boost::polygon::construct_voronoi(lattice.begin(), lattice.end(), &vd);
  std::set<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& edge : vd.edges()) {
    const std::size_t a = edge.cell()->source_index();
    const std::size_t b = edge.twin()->cell()->source_index();
    if (a < b) {
      pairs.insert({a, b});
    }
  }
  return {pairs.begin(), pairs.end()};
}

std::unique_ptr<Roadmap> generate_graph(int agents, double density, std::uint64_t seed, double gamma1,
                                        double gamma2) {
  if (agents < 1 || density < 1.0) {
    throw std::invalid_argument("generate_graph: need agents >= 1 and density >= 1");
  }
  const std::size_t n_v = ceil_count(agents * density);
  if (n_v < 2) {
    throw std::invalid_argument("generate_graph: fewer than two vertices");
  }
  for (std::uint64_t attempt = 0; attempt < 20; ++attempt) {
    if (auto g = try_generate(n_v, stream(seed, 100 + attempt), gamma1, gamma2)) {
      return std::move(*g);
    }
  }
  throw std::runtime_error("generate_graph: could not keep the graph connected");
}

std::vector<Task> generate_tasks(int agents, double rate, Time duration, std::size_t num_vertices,
                                 std::uint64_t seed) {
  if (!(rate > 0.0) || !(duration > 0.0) || num_vertices == 0) {
    throw std::invalid_argument("generate_tasks: rate and duration must be positive");
  }
  const std::size_t count = ceil_count(rate * agents * duration);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<VertexId> vertex(0, static_cast<VertexId>(num_vertices) - 1);
  std::uniform_real_distribution<double> time(0.0, duration);
  std::vector<Task> tasks(count);
  for (auto& t : tasks) {
    t.target = vertex(rng);
    t.release = time(rng);
  }
  std::stable_sort(tasks.begin(), tasks.end(), [](const Task& a, const Task& b) { return a.release < b.release; });
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    tasks[i].id = static_cast<TaskId>(i);
  }
  return tasks;
}

std::vector<VertexId> choose_starts(const Roadmap& roadmap, int agents, std::uint64_t seed) {
  std::vector<VertexId> order(roadmap.num_vertices());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const double min_gap = 2.0 * roadmap.agent_radius();
  std::vector<VertexId> starts;
  for (VertexId v : order) {
    if (static_cast<int>(starts.size()) == agents) {
      break;
    }
    const bool clear = std::all_of(starts.begin(), starts.end(), [&](VertexId u) {
      return distance(roadmap.position(u), roadmap.position(v)) >= min_gap;
    });
    if (clear) {
      starts.push_back(v);
    }
  }
  if (static_cast<int>(starts.size()) < agents) {
    throw std::runtime_error("choose_starts: not enough separated vertices");
  }
  return starts;
}

Instance generate_instance(const InstanceParams& params) {
  Instance in;
  in.params = params;
  auto g = generate_graph(params.agents, params.density, stream(params.seed, 1), params.gamma1, params.gamma2);
  in.starts = choose_starts(*g, params.agents, stream(params.seed, 2));
  in.tasks = generate_tasks(params.agents, params.task_rate, params.duration, g->num_vertices(), stream(params.seed, 3));
  in.roadmap = std::move(g);
  return in;
}

nlohmann::json instance_to_json(const Instance& instance) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : instance.tasks) {
    tasks.push_back({{"id", t.id}, {"target", t.target}, {"release", t.release}});
  }
  const auto& p = instance.params;
  return {{"roadmap", roadmap_to_json(*instance.roadmap)},
          {"starts", instance.starts},
          {"tasks", tasks},
          {"params",
           {{"agents", p.agents},
            {"density", p.density},
            {"gamma1", p.gamma1},
            {"gamma2", p.gamma2},
            {"task_rate", p.task_rate},
            {"duration", p.duration},
            {"seed", p.seed}}}};
}

Instance instance_from_json(const nlohmann::json& doc) {
  Instance in;
  try {
    in.roadmap = roadmap_from_json(doc.at("roadmap"));
    in.starts = doc.at("starts").get<std::vector<VertexId>>();
    for (const auto& t : doc.at("tasks")) {
      Task task;
      task.id = t.at("id").get<TaskId>();
      task.target = t.at("target").get<VertexId>();
      task.release = t.at("release").get<double>();
      in.tasks.push_back(task);
    }
    if (doc.contains("params")) {
      const auto& p = doc.at("params");
      in.params.agents = p.value("agents", static_cast<int>(in.starts.size()));
      in.params.density = p.value("density", 0.0);
      in.params.gamma1 = p.value("gamma1", 0.2);
      in.params.gamma2 = p.value("gamma2", 0.02);
      in.params.task_rate = p.value("task_rate", 0.05);
      in.params.duration = p.value("duration", 200.0);
      in.params.seed = p.value("seed", std::uint64_t{0});
    } else {
      in.params.agents = static_cast<int>(in.starts.size());
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("instance: ") + e.what());
  }
  const auto n = static_cast<VertexId>(in.roadmap->num_vertices());
  for (VertexId v : in.starts) {
    if (v < 0 || v >= n) {
      throw std::invalid_argument("instance: start vertex out of range");
    }
  }
  for (const auto& t : in.tasks) {
    if (t.target < 0 || t.target >= n || !std::isfinite(t.release)) {
      throw std::invalid_argument("instance: bad task");
    }
  }
  std::stable_sort(in.tasks.begin(), in.tasks.end(),
                   [](const Task& a, const Task& b) { return a.release < b.release; });
  return in;
}

bool first_feasibility_screen(const Instance& instance, const ConflictTables& tables) {
  const Roadmap& g = *instance.roadmap;
  const auto& starts = instance.starts;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    for (std::size_t j = i + 1; j < starts.size(); ++j) {
      if (tables.vertex_vertex(starts[i], starts[j])) {
        return false;
      }
    }
  }
  for (std::size_t i = 0; i < starts.size(); ++i) {
    std::vector<char> blocked(g.num_vertices(), 0);
    for (std::size_t j = 0; j < starts.size(); ++j) {
      if (j == i) {
        continue;
      }
      blocked[static_cast<std::size_t>(starts[j])] = 1;
      for (VertexId u : tables.vertices_near_vertex(starts[j])) {
        blocked[static_cast<std::size_t>(u)] = 1;
      }
    }
    std::vector<char> seen(g.num_vertices(), 0);
    std::deque<VertexId> queue{starts[i]};
    seen[static_cast<std::size_t>(starts[i])] = 1;
    bool escape = false;
    while (!queue.empty() && !escape) {
      const VertexId v = queue.front();
      queue.pop_front();
      for (EdgeId e : g.out_edges(v)) {
        const VertexId u = g.edge(e).to;
        if (seen[static_cast<std::size_t>(u)] || blocked[static_cast<std::size_t>(u)]) {
          continue;
        }
        seen[static_cast<std::size_t>(u)] = 1;
        escape = true;
        queue.push_back(u);
      }
    }
    if (!escape) {
      return false;
    }
  }
  return true;
}

double default_dt_ms(int agents) { return std::max(std::pow(static_cast<double>(agents), 1.25), 500.0); }

double RunReport::mean_call_ms() const {
  if (calls.empty()) {
    return 0.0;
  }
  double sum = 0.0;
  for (const auto& c : calls) {
    sum += c.duration_ms;
  }
  return sum / static_cast<double>(calls.size());
}

double RunReport::max_call_ms() const {
  double m = 0.0;
  for (const auto& c : calls) {
    m = std::max(m, c.duration_ms);
  }
  return m;
}

std::size_t RunReport::overruns() const {
  return static_cast<std::size_t>(std::count_if(calls.begin(), calls.end(), [](const CallLog& c) { return c.overrun; }));
}

RunReport run(const Instance& instance, const ConflictTables& tables, const RunParams& params,
              std::vector<Plan>* plans_out) {
  const Roadmap& g = *instance.roadmap;
  RunReport report;
  report.dt_ms = params.dt_ms.value_or(default_dt_ms(static_cast<int>(instance.starts.size())));
  const Time dt = report.dt_ms / 1000.0;
  const Time duration = instance.params.duration;
  report.window = params.window.value_or(Interval{duration / 2.0, duration});
  const Time stop = duration + params.drain;

  Planner planner(g, tables, instance.starts, params.planner);
  const auto& tasks = instance.tasks;
  std::size_t next = 0;
  std::optional<Time> t_next;
  Time last_call = -kInf;
  Time run_end = stop;

  while (true) {
    Time t_call = 0.0;
    if (t_next) {
      t_call = *t_next - dt;
    } else if (next < tasks.size()) {
      t_call = tasks[next].release;
    } else {
      break;
    }
    if (last_call > -kInf) {
      t_call = std::max(t_call, last_call + 1e-3);
    }
    if (t_call > stop) {
      break;
    }
    std::vector<Task> fresh;
    while (next < tasks.size() && tasks[next].release <= t_call) {
      fresh.push_back(tasks[next++]);
    }
    const Time t_plan = t_call + dt;
    const auto wall = std::chrono::steady_clock::now();
    t_next = planner.call(t_plan, fresh);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - wall).count();
    const auto& rec = planner.last_call();
    report.calls.push_back({t_call, t_plan, ms, rec.branch, rec.uncompleted, rec.tasks_completed,
                            rec.new_prioritized_pair, rec.ccbs_attempts, ms >= report.dt_ms});
    last_call = t_call;
    if (params.validate_each_call && !validate(g, planner.plans()).empty()) {
      ++report.per_call_collision_checks_failed;
    }
    if (planner.presumed_infeasible()) {
      report.presumed_infeasible = true;
      run_end = t_call;
      break;
    }
  }
  planner.remove_completed_tasks(run_end);

  report.end_time = run_end;
  report.released = next;
  for (const auto& c : planner.completed()) {
    const Task& t = c.task;
    const bool done = c.completed_at <= run_end;
    if (done) {
      ++report.completed;
      report.max_task_wait = std::max(report.max_task_wait, c.completed_at - t.release);
    } else {
      report.max_task_wait = std::max(report.max_task_wait, run_end - t.release);
    }
    if (t.release >= report.window.lo && t.release <= report.window.hi) {
      report.window_completed += done ? 1 : 0;
    }
    if (done && c.completed_at >= report.window.lo && c.completed_at <= report.window.hi) {
      ++report.window_throughput;
    }
  }
  for (const auto& t : planner.open_tasks()) {
    report.max_task_wait = std::max(report.max_task_wait, run_end - t.release);
  }
  report.uncompleted = report.released - report.completed;
  for (std::size_t i = 0; i < next; ++i) {
    if (tasks[i].release >= report.window.lo && tasks[i].release <= report.window.hi) {
      ++report.window_released;
    }
  }
  report.random_plan_calls = planner.random_plan_calls();
  report.collisions = validate(g, planner.plans()).size();
  if (plans_out != nullptr) {
    plans_out->assign(planner.plans().begin(), planner.plans().end());
  }
  return report;
}

nlohmann::json report_to_json(const RunReport& r) {
  std::map<std::string, std::size_t> branches;
  for (const auto& c : r.calls) {
    ++branches[to_string(c.branch)];
  }
  return {{"calls", r.calls.size()},
          {"dt_ms", r.dt_ms},
          {"mean_call_ms", r.mean_call_ms()},
          {"max_call_ms", r.max_call_ms()},
          {"overruns", r.overruns()},
          {"branches", branches},
          {"window", {r.window.lo, r.window.hi}},
          {"released", r.released},
          {"completed", r.completed},
          {"uncompleted", r.uncompleted},
          {"window_released", r.window_released},
          {"window_completed", r.window_completed},
          {"window_throughput", r.window_throughput},
          {"completion_pct", r.completion_pct()},
          {"collisions", r.collisions},
          {"per_call_collision_checks_failed", r.per_call_collision_checks_failed},
          {"max_task_wait", r.max_task_wait},
          {"random_plan_calls", r.random_plan_calls},
          {"presumed_infeasible", r.presumed_infeasible},
          {"end_time", r.end_time}};
}

std::string calls_to_csv(const RunReport& report) {
  std::ostringstream out;
  out << "t_plan,duration_ms,branch,open_tasks\n";
  out.precision(10);
  for (const auto& c : report.calls) {
    out << c.t_plan << ',' << c.duration_ms << ',' << to_string(c.branch) << ',' << c.uncompleted << '\n';
  }
  return out.str();
}

}  // namespace cplp
