// lifecycle: simulate, oracle-check, analyze, serve, export.
//
// Exit codes: 0 success, 1 usage, 2 data error (or failed check), 3 capability.

#include "lifecycle/dataset.hpp"
#include "lifecycle/error.hpp"
#include "lifecycle/oracle_check.hpp"
#include "lifecycle/report.hpp"
#include "lifecycle/server.hpp"
#include "lifecycle/service.hpp"
#include "lifecycle/simulate.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace lifecycle;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitCapability = 3;

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

// LIFECYCLE_LOG=trace|debug|info|warn|error|off (default info).
void setup_logging() {
  auto logger = spdlog::stderr_color_mt("lifecycle");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%Y-%m-%d %H:%M:%S.%e] [%^%l%$] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("LIFECYCLE_LOG")) {
    const auto level = spdlog::level::from_str(env);
    if (level == spdlog::level::off && std::string(env) != "off")
      spdlog::warn("LIFECYCLE_LOG='{}' is not a level; using info", env);
    else
      spdlog::set_level(level);
  }
}

std::set<std::string> split_list(const std::string& text) {
  std::set<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto s = lifecycle::detail::trim(item);
    if (!s.empty()) out.insert(s);
  }
  return out;
}

StudyConfig config_or_default(const std::string& path) {
  return path.empty() ? StudyConfig{} : load_study_config(path);
}

struct SimulateArgs {
  std::string agents;
  int n = 10;
  std::string ordering = "BF";
  std::uint64_t seed = 1;
  std::string out;
  std::string config;
};

int cmd_simulate(const SimulateArgs& a) {
  AgentSpec agent;
  try {
    agent = parse_agent_spec(a.agents, a.seed);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  auto cfg = config_or_default(a.config);
  if (a.config.empty()) cfg.shock_seed = a.seed;
  const fs::path out{a.out};
  const auto logs = out / "logs";
  if (fs::exists(logs) && !fs::is_empty(logs))
    throw Error(ErrorKind::Data, "'" + logs.string() + "' already holds session logs; choose an empty --out");

  ServiceOptions opts;
  opts.log_dir = logs;
  opts.allow_ordering_override = true;
  std::uint64_t token_counter = a.seed;
  opts.make_token = [&token_counter] {
    std::mt19937_64 rng{token_counter++};
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
    return std::string(buf);
  };
  Service service{cfg, opts};

  CohortSpec spec;
  spec.agent = agent;
  spec.n = a.n;
  spec.ordering = parse_ordering_mode(a.ordering);
  spec.seed = a.seed;
  const auto results = simulate_cohort(service, spec);
  const auto exported = service.export_dataset(out);
  spdlog::info("simulated {} '{}' participants; export in {}", results.size(), to_string(agent.kind), out.string());
  std::cout << "sessions " << exported.sessions << "\n";
  return 0;
}

struct OracleArgs {
  int horizon = 3;
  double theta = 0.02;
  double sigma = 10.0;
};

int cmd_oracle_check(const OracleArgs& a) {
  bool pass = true;
  for (const auto t : {Treatment::Borrowing, Treatment::Saving}) {
    ModelParams p;
    p.horizon = a.horizon;
    p.theta = a.theta;
    p.shock_sigma = a.sigma;
    const auto res = oracle_sweep(with_treatment(p, t));
    const bool ok = res.max_abs_diff <= 1e-6;
    pass = pass && ok;
    std::printf("%s T=%d theta=%g sigma=%g %s nodes=%zu max_abs_diff=%.3e (period %d, wealth %.6f) %.3fs\n",
                ok ? "PASS" : "FAIL", a.horizon, a.theta, a.sigma, std::string(to_string(t)).c_str(), res.nodes,
                res.max_abs_diff, res.worst_period, res.worst_wealth, res.seconds);
  }
  return pass ? 0 : kExitData;
}

struct AnalyzeArgs {
  std::vector<std::string> in;
  std::vector<std::string> import_maps;
  std::string tables = "1,2,3,4,5,da";
  std::string figs = "2,3,4";
  std::string out;
  std::string focal;
  std::string config;
};

int cmd_analyze(const AnalyzeArgs& a) {
  if (a.in.empty() && a.import_maps.empty()) {
    std::cerr << "error: give at least one --in directory or --import-map file\n";
    return kExitUsage;
  }
  AnalysisDataset ds;
  for (const auto& dir : a.in) append(ds, load_canonical(dir));
  for (const auto& map : a.import_maps) append(ds, import_dataset(load_import_map(map)));
  ds.validate();
  if (ds.rows.empty()) throw Error(ErrorKind::Data, "empty report: the input holds no participant-round rows");

  report::Selection sel;
  sel.tables = split_list(a.tables);
  sel.figures = split_list(a.figs);
  for (const auto& t : sel.tables)
    if (!std::set<std::string>{"1", "2", "3", "4", "5", "da"}.count(t)) {
      std::cerr << "error: unknown table '" << t << "'\n";
      return kExitUsage;
    }
  for (const auto& f : sel.figures)
    if (!std::set<std::string>{"2", "3", "4"}.count(f)) {
      std::cerr << "error: unknown figure '" << f << "'\n";
      return kExitUsage;
    }
  if (!a.focal.empty()) sel.focal = a.focal;
  sel.params = config_or_default(a.config).params;
  const auto written = report::write_report(ds, sel, a.out);
  for (const auto& n : written.notes) spdlog::warn("{}", n);
  for (const auto& f : written.files) std::cout << (fs::path(a.out) / f).string() << "\n";
  return 0;
}

struct ServeArgs {
  std::string config;
  std::string bind = "127.0.0.1:8765";
  std::string log_dir;
  bool allow_ordering = false;
};

int cmd_serve(const ServeArgs& a) {
  const auto cfg = load_study_config(a.config);
  ServiceOptions opts;
  opts.log_dir = a.log_dir;
  opts.allow_ordering_override = a.allow_ordering;
  Service service{cfg, opts};
  if (service.recovered_sessions())
    spdlog::info("recovered {} sessions from {}", service.recovered_sessions(), a.log_dir);
  Server server{service, parse_bind_address(a.bind)};
  std::signal(SIGTERM, on_signal);
  std::signal(SIGINT, on_signal);
  spdlog::info("study '{}' listening on port {}", cfg.study_id, server.port());
  std::cout << "listening " << server.port() << std::endl;
  server.run(&g_stop);
  spdlog::info("shutting down");
  return 0;
}

struct ExportArgs {
  std::string config;
  std::string log_dir;
  std::string out;
};

int cmd_export(const ExportArgs& a) {
  if (!fs::is_directory(a.log_dir)) throw Error(ErrorKind::Data, "no log directory '" + a.log_dir + "'");
  ServiceOptions opts;
  opts.log_dir = a.log_dir;
  Service service{load_study_config(a.config), opts};
  const auto res = service.export_dataset(a.out);
  if (res.empty) spdlog::warn("no completed sessions; wrote header-only files");
  std::cout << "sessions " << res.sessions << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Life-cycle consumption experiment: simulation, verification, analysis and serving"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "run synthetic participants through the session engine");
  simulate->add_option("--agents", sim.agents, "optimal | handtomouth | debtaverse | noisy[:SD]")->required();
  simulate->add_option("--n", sim.n, "number of participants")->check(CLI::Range(1, 100000));
  simulate->add_option("--ordering", sim.ordering, "BF, SF or mixed")->check(CLI::IsMember({"BF", "SF", "mixed"}));
  simulate->add_option("--seed", sim.seed, "seed for shocks, agents and orderings");
  simulate->add_option("--out", sim.out, "output directory")->required();
  simulate->add_option("--config", sim.config, "study config (default: built-in, shock seed = --seed)");

  OracleArgs orc;
  auto* oracle = app.add_subcommand("oracle-check", "compare the closed-form policy with backward induction");
  oracle->add_option("--horizon", orc.horizon, "number of periods (2..6)")->check(CLI::Range(1, 1000));
  oracle->add_option("--theta", orc.theta, "absolute risk aversion");
  oracle->add_option("--sigma", orc.sigma, "income shock size");

  AnalyzeArgs ana;
  auto* analyze = app.add_subcommand("analyze", "compute tables and figure data");
  analyze->add_option("--in", ana.in, "canonical export directory (repeatable)");
  analyze->add_option("--import-map", ana.import_maps, "column-mapping file for external data (repeatable)");
  analyze->add_option("--tables", ana.tables, "comma list from 1,2,3,4,5,da");
  analyze->add_option("--fig", ana.figs, "comma list from 2,3,4");
  analyze->add_option("--out", ana.out, "output directory")->required();
  analyze->add_option("--focal-country", ana.focal, "country used for covariate regressions");
  analyze->add_option("--config", ana.config, "study config supplying model parameters for figure 2");

  ServeArgs srv;
  auto* serve = app.add_subcommand("serve", "serve a study over TCP");
  serve->add_option("--config", srv.config, "study config file")->required();
  serve->add_option("--bind", srv.bind, "HOST:PORT");
  serve->add_option("--log-dir", srv.log_dir, "directory for session event logs")->required();
  serve->add_flag("--allow-ordering", srv.allow_ordering, "let HELLO choose BF/SF (synthetic studies)");

  ExportArgs exp;
  auto* exporter = app.add_subcommand("export", "rebuild sessions from logs and write the canonical CSVs");
  exporter->add_option("--config", exp.config, "study config file")->required();
  exporter->add_option("--log-dir", exp.log_dir, "directory of session event logs")->required();
  exporter->add_option("--out", exp.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim);
    if (*oracle) return cmd_oracle_check(orc);
    if (*analyze) return cmd_analyze(ana);
    if (*serve) return cmd_serve(srv);
    if (*exporter) return cmd_export(exp);
  } catch (const Error& e) {
    spdlog::error("{} error: {}", to_string(e.kind()), e.what());
    return e.kind() == ErrorKind::Capability ? kExitCapability : kExitData;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  }
  return kExitUsage;
}
