// Command-line entry points: allocate, simulate, compare, oracle.
//
// Exit codes: 0 ok, 2 configuration error, 3 infeasible instance, 4 I/O error.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "tilevr/io.hpp"

namespace fs = std::filesystem;
using namespace tilevr;

namespace {

struct Options {
  std::string config;
  std::string out = ".";
  std::string format = "csv";
  std::string strategies;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> cap;
};

std::vector<Strategy> parse_strategy_list(const std::string& text) {
  std::vector<Strategy> out;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, ','))
    if (!detail::trim(item).empty()) out.push_back(parse_strategy(detail::trim(item)));
  if (out.empty()) throw ConfigError("--strategy: no strategy named");
  return out;
}

ConfigDocument load_document(const Options& opt) {
  fs::path path(opt.config);
  ConfigDocument doc = parse_config_document(detail::read_file(path), path.parent_path());
  if (opt.seed) doc.seed = opt.seed;
  if (!opt.strategies.empty()) doc.strategies = parse_strategy_list(opt.strategies);
  if (opt.cap) {
    if (*opt.cap < 1) throw ConfigError("--cap: must be at least 1");
    doc.allocation.oracle_cap = *opt.cap;
  }
  for (const auto& w : doc.warnings) std::cerr << "warning: " << w << "\n";
  return doc;
}

fs::path output_path(const Options& opt, const std::string& stem) {
  fs::path dir(opt.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(detail::cat("cannot create '", dir.string(), "': ", ec.message()));
  return dir / (stem + "." + opt.format);
}

void require_seed(const ConfigDocument& doc, const char* command) {
  if (!doc.seed) throw ConfigError(detail::cat("seed: required for ", command, " (set it in the config or pass --seed)"));
}

/// Instance for the single-snapshot commands: the explicit one, or a
/// synthetic draw that needs a seed.
Instance snapshot_instance(const ConfigDocument& doc) {
  if (!doc.instance && !doc.seed) throw ConfigError("seed: required to synthesize an instance");
  return build_scenario(doc).base;
}

int run_allocate(const Options& opt, bool oracle) {
  ConfigDocument doc = load_document(opt);
  Instance inst = snapshot_instance(doc);
  ResultTable table;
  std::vector<Strategy> list = oracle ? std::vector<Strategy>{Strategy::exhaustive} : doc.strategies;
  for (Strategy s : list) {
    Allocation a = run_strategy(inst, s, doc.allocation, doc.fov_mode);
    append_allocation(table, doc.id, std::string(strategy_name(s)), a, inst);
  }
  emit_report(table, parse_report_format(opt.format), output_path(opt, oracle ? "oracle" : "allocation"));
  return 0;
}

int run_simulate(const Options& opt) {
  ConfigDocument doc = load_document(opt);
  require_seed(doc, "simulate");
  Scenario sc = build_scenario(doc);
  ResultTable table;
  for (Strategy s : sc.strategies) append_session(table, sc.id, run_session(sc, s, sc.buffer));
  emit_report(table, parse_report_format(opt.format), output_path(opt, "session"));
  return 0;
}

int run_compare(const Options& opt) {
  ConfigDocument doc = load_document(opt);
  require_seed(doc, "compare");
  Scenario sc = build_scenario(doc);
  ComparisonReport rep = compare_strategies(sc, sc.strategies);
  ResultTable table;
  append_comparison(table, sc.id, rep);
  emit_report(table, parse_report_format(opt.format), output_path(opt, "comparison"));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tile-based 360-degree video allocation over LTE and Wi-Fi"};
  app.require_subcommand(1);
  Options opt;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "Scenario configuration (JSON)")->required();
    sub->add_option("--out", opt.out, "Output directory");
    sub->add_option("--format", opt.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--strategy", opt.strategies, "Comma-separated strategy names");
    sub->add_option("--seed", opt.seed, "Seed (overrides the config)");
  };
  auto* allocate = app.add_subcommand("allocate", "Allocate one network snapshot");
  auto* simulate = app.add_subcommand("simulate", "Run trace-driven sessions");
  auto* compare = app.add_subcommand("compare", "Compare strategies and run sweeps");
  auto* oracle = app.add_subcommand("oracle", "Exhaustive allocation of a small snapshot");
  for (auto* sub : {allocate, simulate, compare, oracle}) common(sub);
  oracle->add_option("--cap", opt.cap, "Maximum association vectors to enumerate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*allocate) return run_allocate(opt, false);
    if (*oracle) return run_allocate(opt, true);
    if (*simulate) return run_simulate(opt);
    if (*compare) return run_compare(opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 4;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
