#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cplp/collision_tables.hpp"
#include "cplp/plan.hpp"
#include "cplp/sim.hpp"
#include "cplp/validate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::mutex g_log_mutex;

template <typename... Args>
void log_line(Args&&... args) {
  std::ostringstream s;
  (s << ... << args);
  std::lock_guard lock(g_log_mutex);
  std::cerr << s.str() << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << text;
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

// Flag values; a config file fills in whatever is not given explicitly.
struct PlannerFlags {
  std::optional<double> dt_ms;
  double horizon_s = 1.0;
  int alpha = 5;
  double ccbs_deadline_ms = 25.0;
  int random_cap = 50;
  std::uint64_t planner_seed = 1;
  double drain = 100.0;
  bool validate_each_call = false;

  void add_to(CLI::App& app) {
    app.add_option("--dt-ms", dt_ms, "Planning lead time in ms (default max(n_a^1.25, 500))")
        ->check(CLI::PositiveNumber);
    app.add_option("--horizon-s", horizon_s, "Short-plan horizon in simulated seconds")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app.add_option("--alpha", alpha, "Agents tried per prioritized task")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--ccbs-deadline-ms", ccbs_deadline_ms, "Wall-clock limit per CCBS attempt")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app.add_option("--random-cap", random_cap, "Consecutive random-plan calls before aborting")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app.add_option("--planner-seed", planner_seed, "Seed of the planner's random choices")->capture_default_str();
    app.add_option("--drain", drain, "Simulated seconds after the last release")->capture_default_str();
    app.add_flag("--validate-each-call", validate_each_call, "Check all plans after every call");
  }

  [[nodiscard]] cplp::RunParams to_params() const {
    cplp::RunParams p;
    p.planner.horizon = horizon_s;
    p.planner.alpha = alpha;
    p.planner.ccbs_deadline = std::chrono::microseconds(static_cast<long long>(ccbs_deadline_ms * 1000.0));
    p.planner.random_plan_cap = random_cap;
    p.planner.seed = planner_seed;
    p.dt_ms = dt_ms;
    p.drain = drain;
    p.validate_each_call = validate_each_call;
    return p;
  }
};

fs::path default_cache_path(const fs::path& instance) {
  fs::path p = instance;
  p += ".tables";
  return p;
}

cplp::ConflictTables precompute_and_save(const cplp::Roadmap& roadmap, const fs::path& cache, unsigned threads) {
  const auto t0 = std::chrono::steady_clock::now();
  auto tables = cplp::precompute(roadmap, threads);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  cplp::save_tables(cache, roadmap, tables);
  log_line("precomputed ", roadmap.num_vertices(), " vertices in ", secs, " s -> ", cache.string());
  return tables;
}

cplp::ConflictTables load_or_precompute(const cplp::Roadmap& roadmap, const fs::path& cache) {
  if (auto tables = cplp::load_tables(cache, roadmap)) {
    return std::move(*tables);
  }
  log_line("warning: no valid table cache at ", cache.string(), ", precomputing");
  return precompute_and_save(roadmap, cache, 1);
}

json instance_summary(const cplp::Instance& inst) {
  return {{"agents", inst.params.agents},
          {"density", inst.params.density},
          {"seed", inst.params.seed},
          {"vertices", inst.roadmap->num_vertices()},
          {"tasks", inst.tasks.size()}};
}

// Runs one instance and writes report.json, calls.csv and trace.json to
// `out_dir`. Returns the number of collisions found by the validator.
std::size_t run_one(const fs::path& instance_path, const std::optional<fs::path>& cache_path,
                    const cplp::RunParams& params, const fs::path& out_dir) {
  const auto inst = cplp::instance_from_json(read_json(instance_path));
  const auto tables = load_or_precompute(*inst.roadmap, cache_path.value_or(default_cache_path(instance_path)));
  const bool screen = cplp::first_feasibility_screen(inst, tables);

  std::vector<cplp::Plan> plans;
  const auto report = cplp::run(inst, tables, params, &plans);
  const auto collisions = cplp::validate(*inst.roadmap, plans);

  json doc;
  doc["instance"] = instance_summary(inst);
  doc["instance"]["path"] = instance_path.string();
  doc["instance"]["passes_feasibility_screen"] = screen;
  doc["planner"] = {{"horizon_s", params.planner.horizon},
                    {"alpha", params.planner.alpha},
                    {"ccbs_deadline_ms", params.planner.ccbs_deadline.count() / 1000.0},
                    {"random_plan_cap", params.planner.random_plan_cap},
                    {"seed", params.planner.seed}};
  doc["run"] = cplp::report_to_json(report);
  doc["validation"] = {{"collisions", collisions.size()}};

  fs::create_directories(out_dir);
  write_json(out_dir / "report.json", doc);
  write_text(out_dir / "calls.csv", cplp::calls_to_csv(report));
  write_json(out_dir / "trace.json", cplp::plans_to_json(*inst.roadmap, plans));

  log_line(instance_path.string(), ": ", report.calls.size(), " calls, completion ",
           report.completion_pct(), "%, max call ", report.max_call_ms(), " ms, collisions ", collisions.size(),
           report.presumed_infeasible ? ", presumed infeasible" : "");
  return collisions.size();
}

// Runs `jobs` on up to `workers` threads; each job is single-threaded.
template <typename Job>
void run_parallel(std::size_t count, int workers, Job job) {
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        job(i);
      } catch (...) {
        std::lock_guard lock(err_mutex);
        if (!first_error) {
          first_error = std::current_exception();
        }
      }
    }
  };
  const int n = std::max(1, std::min<int>(workers, static_cast<int>(count)));
  {
    std::vector<std::jthread> pool;
    for (int w = 1; w < n; ++w) {
      pool.emplace_back(worker);
    }
    worker();
  }
  if (first_error) {
    std::rethrow_exception(first_error);
  }
}

// One row of the aggregate table.
struct Cell {
  std::size_t runs = 0;
  std::size_t screened = 0;
  double completion_sum = 0.0;
  double completion_min = 100.0;
  double mean_call_sum = 0.0;
  double max_call = 0.0;
  std::size_t overruns = 0;
  std::size_t collisions = 0;
  std::size_t aborted = 0;
};

std::vector<fs::path> collect_reports(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      for (const auto& e : fs::recursive_directory_iterator(p)) {
        if (e.is_regular_file() && e.path().filename() == "report.json") {
          out.push_back(e.path());
        }
      }
    } else if (fs::exists(p)) {
      out.push_back(p);
    } else {
      throw std::runtime_error("no such file: " + in);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string aggregate(const std::vector<fs::path>& reports) {
  std::map<std::pair<int, double>, Cell> cells;
  for (const auto& path : reports) {
    const auto doc = read_json(path);
    if (!doc.contains("instance") || !doc.contains("run")) {
      throw std::runtime_error(path.string() + ": not a run report");
    }
    const auto& r = doc.at("run");
    auto& c = cells[{doc.at("instance").at("agents").get<int>(), doc.at("instance").at("density").get<double>()}];
    const double pct = r.at("completion_pct").get<double>();
    ++c.runs;
    c.screened += doc.at("instance").value("passes_feasibility_screen", true) ? 1 : 0;
    c.completion_sum += pct;
    c.completion_min = std::min(c.completion_min, pct);
    c.mean_call_sum += r.at("mean_call_ms").get<double>();
    c.max_call = std::max(c.max_call, r.at("max_call_ms").get<double>());
    c.overruns += r.at("overruns").get<std::size_t>();
    c.collisions += doc.at("validation").at("collisions").get<std::size_t>();
    c.aborted += r.at("presumed_infeasible").get<bool>() ? 1 : 0;
  }
  std::ostringstream out;
  out << "agents,density,runs,screen_feasible,mean_completion_pct,min_completion_pct,mean_call_ms,max_call_ms,"
         "overruns,collisions,aborted\n";
  for (const auto& [key, c] : cells) {
    out << key.first << ',' << key.second << ',' << c.runs << ',' << c.screened << ','
        << c.completion_sum / c.runs << ',' << c.completion_min << ',' << c.mean_call_sum / c.runs << ','
        << c.max_call << ',' << c.overruns << ',' << c.collisions << ',' << c.aborted << '\n';
  }
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lifelong multi-agent pickup-and-delivery planner on continuous-time roadmaps"};
  app.set_config("--config", "", "TOML/INI file with option values; explicit flags take precedence");
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Generate a random instance");
  cplp::InstanceParams gen_params;
  std::string gen_out;
  gen->add_option("--agents", gen_params.agents, "Number of agents")->required()->check(CLI::PositiveNumber);
  gen->add_option("--density", gen_params.density, "Vertices per agent")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_params.seed, "Instance seed")->capture_default_str();
  gen->add_option("--task-rate", gen_params.task_rate, "Tasks per agent per second")->capture_default_str();
  gen->add_option("--duration", gen_params.duration, "Release period in seconds")->capture_default_str();
  gen->add_option("--gamma1", gen_params.gamma1, "Fraction of extra sites removed")->capture_default_str();
  gen->add_option("--gamma2", gen_params.gamma2, "Fraction of long-range edges")->capture_default_str();
  gen->add_option("--out", gen_out, "Instance file")->required();

  // precompute
  auto* pre = app.add_subcommand("precompute", "Build the collision table cache of an instance");
  std::string pre_instance;
  std::string pre_out;
  unsigned pre_threads = 1;
  pre->add_option("--instance", pre_instance, "Instance file")->required()->check(CLI::ExistingFile);
  pre->add_option("--out", pre_out, "Cache file (default <instance>.tables)");
  pre->add_option("--threads", pre_threads, "Worker threads")->capture_default_str();

  // run
  auto* run = app.add_subcommand("run", "Simulate one or more instances");
  std::vector<std::string> run_instances;
  std::string run_tables;
  std::string run_out;
  int run_parallel_n = 1;
  PlannerFlags run_flags;
  run->add_option("instances", run_instances, "Instance files")->required()->check(CLI::ExistingFile);
  run->add_option("--tables", run_tables, "Table cache (single instance only)");
  run->add_option("--out", run_out, "Output directory")->required();
  run->add_option("--parallel", run_parallel_n, "Instances simulated concurrently")->capture_default_str();
  run_flags.add_to(*run);

  // validate
  auto* val = app.add_subcommand("validate", "Check a trace for collisions; exits 1 on any");
  std::string val_instance;
  std::string val_trace;
  val->add_option("--instance", val_instance, "Instance file")->required()->check(CLI::ExistingFile);
  val->add_option("--trace", val_trace, "Trace file")->required()->check(CLI::ExistingFile);

  // report
  auto* rep = app.add_subcommand("report", "Aggregate run reports per (agents, density)");
  std::vector<std::string> rep_inputs;
  std::string rep_out;
  rep->add_option("inputs", rep_inputs, "report.json files or directories searched recursively");
  rep->add_option("--out", rep_out, "CSV output (stdout when omitted)");

  // experiment
  auto* exp = app.add_subcommand("experiment", "Generate, run and validate a grid of instances");
  std::vector<int> exp_agents{10, 25, 50};
  std::vector<double> exp_density{5.0, 10.0};
  int exp_seeds = 5;
  std::uint64_t exp_seed = 1;
  double exp_rate = 0.05;
  double exp_duration = 200.0;
  std::string exp_out;
  int exp_parallel = 1;
  PlannerFlags exp_flags;
  exp->add_option("--agents", exp_agents, "Agent counts")->capture_default_str()->delimiter(',');
  exp->add_option("--density", exp_density, "Densities")->capture_default_str()->delimiter(',');
  exp->add_option("--seeds", exp_seeds, "Seeds per cell")->capture_default_str()->check(CLI::PositiveNumber);
  exp->add_option("--seed", exp_seed, "First instance seed; cell k uses seed .. seed + seeds - 1")
      ->capture_default_str();
  exp->add_option("--task-rate", exp_rate, "Tasks per agent per second")->capture_default_str();
  exp->add_option("--duration", exp_duration, "Release period in seconds")->capture_default_str();
  exp->add_option("--out", exp_out, "Output directory")->required();
  exp->add_option("--parallel", exp_parallel, "Instances simulated concurrently")->capture_default_str();
  exp_flags.add_to(*exp);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const auto inst = cplp::generate_instance(gen_params);
      write_json(gen_out, cplp::instance_to_json(inst));
      log_line("wrote ", gen_out, ": ", inst.roadmap->num_vertices(), " vertices, ", inst.tasks.size(), " tasks");
      return 0;
    }

    if (*pre) {
      const auto inst = cplp::instance_from_json(read_json(pre_instance));
      const fs::path out = pre_out.empty() ? default_cache_path(pre_instance) : fs::path(pre_out);
      precompute_and_save(*inst.roadmap, out, pre_threads);
      return 0;
    }

    if (*run) {
      if (!run_tables.empty() && run_instances.size() > 1) {
        throw std::runtime_error("--tables needs exactly one instance");
      }
      const auto params = run_flags.to_params();
      std::atomic<std::size_t> collisions{0};
      run_parallel(run_instances.size(), run_parallel_n, [&](std::size_t i) {
        const fs::path in = run_instances[i];
        const auto cache = run_tables.empty() ? std::nullopt : std::optional<fs::path>(run_tables);
        const fs::path dir = run_instances.size() == 1 ? fs::path(run_out) : fs::path(run_out) / in.stem();
        collisions += run_one(in, cache, params, dir);
      });
      return collisions == 0 ? 0 : 1;
    }

    if (*val) {
      const auto inst = cplp::instance_from_json(read_json(val_instance));
      const auto plans = cplp::plans_from_json(*inst.roadmap, read_json(val_trace));
      std::size_t defects = 0;
      for (const auto& p : plans) {
        for (const auto& d : cplp::plan_defects(*inst.roadmap, p)) {
          std::cout << "agent " << p.agent() << ": " << d << '\n';
          ++defects;
        }
      }
      const auto collisions = cplp::validate(*inst.roadmap, plans);
      for (const auto& c : collisions) {
        std::cout << "collision: agents " << c.agent1 << " and " << c.agent2 << " during [" << c.begin << ", "
                  << c.end << "], min distance " << c.min_distance << '\n';
      }
      std::cout << plans.size() << " plans, " << defects << " defects, " << collisions.size() << " collisions\n";
      return defects == 0 && collisions.empty() ? 0 : 1;
    }

    if (*rep) {
      const auto reports = collect_reports(rep_inputs);
      if (reports.empty()) {
        throw std::runtime_error("no reports given");
      }
      const auto table = aggregate(reports);
      if (rep_out.empty()) {
        std::cout << table;
      } else {
        write_text(rep_out, table);
      }
      return 0;
    }

    if (*exp) {
      if (exp_agents.empty() || exp_density.empty()) {
        throw std::runtime_error("agent and density lists must be nonempty");
      }
      struct Job {
        cplp::InstanceParams params;
        fs::path dir;
      };
      std::vector<Job> jobs;
      for (int na : exp_agents) {
        for (double rho : exp_density) {
          for (int k = 0; k < exp_seeds; ++k) {
            Job j;
            j.params.agents = na;
            j.params.density = rho;
            j.params.seed = exp_seed + static_cast<std::uint64_t>(k);
            j.params.task_rate = exp_rate;
            j.params.duration = exp_duration;
            std::ostringstream name;
            name << "na" << na << "_rho" << rho << "_s" << j.params.seed;
            j.dir = fs::path(exp_out) / name.str();
            jobs.push_back(std::move(j));
          }
        }
      }
      const auto params = exp_flags.to_params();
      std::atomic<std::size_t> collisions{0};
      run_parallel(jobs.size(), exp_parallel, [&](std::size_t i) {
        const auto& j = jobs[i];
        const auto inst = cplp::generate_instance(j.params);
        const fs::path inst_path = j.dir / "instance.json";
        write_json(inst_path, cplp::instance_to_json(inst));
        precompute_and_save(*inst.roadmap, default_cache_path(inst_path), 1);
        collisions += run_one(inst_path, std::nullopt, params, j.dir);
      });
      const auto table = aggregate(collect_reports({exp_out}));
      write_text(fs::path(exp_out) / "summary.csv", table);
      std::cout << table;
      return collisions == 0 ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
