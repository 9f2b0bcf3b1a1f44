// escape-rate: compute, simulate or verify the block-length rate of escape
// of a random walk on a free product described by a JSON configuration.
//
// Exit codes: 0 success, 1 failed check, 2 configuration or usage error,
// 3 non-transient model, 4 convergence failure, 5 invalid simulation
// parameters.

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "escape_rate/config.hpp"
#include "escape_rate/drift.hpp"
#include "escape_rate/errors.hpp"
#include "escape_rate/report.hpp"
#include "escape_rate/simulate.hpp"
#include "escape_rate/verify.hpp"
#include "escape_rate/version.hpp"
#include "escape_rate/xi_solver.hpp"

namespace {

namespace er = escape_rate;

enum Exit : int {
  kOk = 0,
  kCheckFailed = 1,
  kConfig = 2,
  kNonTransient = 3,
  kConvergence = 4,
  kSimulationParameters = 5,
};

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

unsigned simulation_threads() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("ESCAPE_RATE_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v < 1) throw std::invalid_argument("nonpositive");
      n = static_cast<unsigned>(v);
    } catch (const std::exception&) {
      throw er::UsageError(std::string("ESCAPE_RATE_THREADS must be a positive integer, got '") +
                           env + "'");
    }
  }
  return n;
}

struct Common {
  std::string config;
  std::string format = "json";
  bool timings = false;
};

void emit(nlohmann::json doc, const Common& c, const nlohmann::json& timings) {
  if (c.timings) doc["timings"] = timings;
  std::cout << er::report::render(doc, er::report::parse_format(c.format));
}

int run_compute(const Common& c, const er::SolverOptions& opt) {
  Stopwatch sw;
  const auto cfg = er::config::load_config(c.config);
  nlohmann::json t{{"parse", sw.lap()}};
  const auto sol = er::solve_xi(cfg.model, opt);
  t["solve"] = sw.lap();
  er::AnalysisOptions aopt;
  aopt.solver = opt;
  const auto rep = er::analyze(cfg.model, sol, aopt);
  t["drift"] = sw.lap();
  const auto doc = er::report::compute_json(cfg.model, cfg.name, cfg.hash, opt, sol, rep);
  emit(doc, c, t);
  if (doc["status"] != "ok") {
    for (const auto& f : doc["failures"]) std::cerr << "escape-rate: check failed: " << f.get<std::string>() << '\n';
    return kCheckFailed;
  }
  return kOk;
}

int run_simulate(const Common& c, er::SimulationConfig sc) {
  Stopwatch sw;
  const auto cfg = er::config::load_config(c.config);
  nlohmann::json t{{"parse", sw.lap()}};
  try {
    er::validate(sc);
  } catch (const er::UsageError& e) {
    std::cerr << "escape-rate: invalid simulation parameters: " << e.what() << '\n';
    return kSimulationParameters;
  }
  const auto reference = er::analyze(cfg.model);
  t["drift"] = sw.lap();
  sc.threads = simulation_threads();
  const auto res = er::simulate(cfg.model, sc);
  t["simulate"] = sw.lap();
  emit(er::report::simulate_json(cfg.model, cfg.name, cfg.hash, res, &reference), c, t);
  return kOk;
}

int run_verify(const Common& c, int order) {
  Stopwatch sw;
  const auto cfg = er::config::load_config(c.config);
  nlohmann::json t{{"parse", sw.lap()}};
  const auto rep = er::verify_model(cfg.model, order);
  t["verify"] = sw.lap();
  for (const auto& n : rep.notices) std::cerr << "escape-rate: note: " << n << '\n';
  emit(er::report::verify_json(cfg.model, cfg.name, cfg.hash, rep), c, t);
  for (const auto& f : rep.failures) std::cerr << "escape-rate: check failed: " << f << '\n';
  return rep.passed() ? kOk : kCheckFailed;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("config", c.config, "model configuration (JSON)")->required();
  sub->add_option("--format", c.format, "output format")
      ->check(CLI::IsMember({"json", "csv", "text"}))
      ->capture_default_str();
  sub->add_flag("--timings", c.timings, "include wall-clock timings in the report");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rate of escape of random walks on free products"};
  app.set_version_flag("--version", std::string(er::kVersion));
  app.require_subcommand(1);

  Common common;
  er::SolverOptions solver;
  auto* compute = app.add_subcommand("compute", "solve for xi and evaluate every drift formula");
  add_common(compute, common);
  compute->add_option("--tol", solver.tol, "fixed-point tolerance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  compute->add_option("--max-iter", solver.max_iter, "iteration limit")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  er::SimulationConfig sim;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimates with confidence intervals");
  add_common(simulate, common);
  simulate->add_option("--steps", sim.steps, "steps per trajectory")->capture_default_str();
  simulate->add_option("--trials", sim.trials, "independent trajectories")->capture_default_str();
  simulate->add_option("--seed", sim.seed, "base seed")->capture_default_str();
  simulate->add_option("--checkpoints", sim.checkpoints, "prefix profile checkpoints")
      ->capture_default_str();

  int order = 12;
  auto* verify = app.add_subcommand("verify", "oracle identities and cross-method checks");
  add_common(verify, common);
  verify->add_option("--order", order, "series order")
      ->check(CLI::Range(1, 12))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*compute) return run_compute(common, solver);
    if (*simulate) return run_simulate(common, sim);
    return run_verify(common, order);
  } catch (const er::ConfigError& e) {
    std::cerr << "escape-rate: configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const er::NonTransientModelError& e) {
    std::cerr << "escape-rate: non-transient model: " << e.what() << '\n';
    return kNonTransient;
  } catch (const er::ConvergenceError& e) {
    std::cerr << "escape-rate: convergence failure: " << e.what() << " (residual " << e.residual()
              << ")\n";
    return kConvergence;
  } catch (const er::UsageError& e) {
    std::cerr << "escape-rate: usage error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "escape-rate: " << e.what() << '\n';
    return kCheckFailed;
  }
}
