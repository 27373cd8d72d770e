#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "tierpt/config.hpp"
#include "tierpt/engine.hpp"
#include "tierpt/report.hpp"

namespace {

using namespace tierpt;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitOomKilled = 3;

int do_run(const std::string& config_path, std::optional<std::uint64_t> seed,
           std::optional<std::string> out_dir) {
  RunConfig cfg = load_config_file(config_path);
  if (seed) cfg.seed = *seed;
  if (out_dir) cfg.output_dir = *out_dir;
  resolve_config(cfg);

  Simulation sim(cfg);
  Report report = sim.run();
  if (!cfg.output_dir.empty()) write_outputs(report, cfg, cfg.output_dir);

  const auto& b = report.processes[0].acct;
  std::printf("scenario=%s seed=%llu\n", report.scenario.c_str(),
              static_cast<unsigned long long>(report.seed));
  std::printf("benchmark: instructions=%llu cycles=%llu walk_cycles=%llu "
              "tlb_misses=%llu faults=%llu mpki=%.3f\n",
              static_cast<unsigned long long>(b.instructions),
              static_cast<unsigned long long>(b.total_cycles(1)),
              static_cast<unsigned long long>(b.walk_cycles),
              static_cast<unsigned long long>(b.tlb_misses),
              static_cast<unsigned long long>(b.faults),
              report.processes[0].mpki);
  std::printf("migrations: data=%llu l4_success=%llu l4_skips=%llu "
              "reclaim_demotions=%llu\n",
              static_cast<unsigned long long>(report.migration.data_migrations),
              static_cast<unsigned long long>(report.migration.l4_success),
              static_cast<unsigned long long>(
                  report.migration.l4_invocations() -
                  report.migration.l4_success),
              static_cast<unsigned long long>(
                  report.migration.reclaim_demotions));
  if (report.benchmark_oom_killed) {
    std::printf("benchmark was OOM-killed\n");
    return kExitOomKilled;
  }
  return kExitOk;
}

struct MatrixCell {
  PtPolicy pt_policy;
  bool migration;
  Report report;
  bool failed = false;
  std::string error;
};

int do_matrix(const std::string& config_path,
              std::optional<std::uint64_t> seed,
              std::optional<std::string> out_dir) {
  RunConfig base = load_config_file(config_path);
  if (seed) base.seed = *seed;
  if (out_dir) base.output_dir = *out_dir;
  resolve_config(base);

  const PtPolicy policies[] = {PtPolicy::FollowData, PtPolicy::BindAll,
                               PtPolicy::BindHigh};
  std::vector<MatrixCell> cells;
  for (PtPolicy p : policies)
    for (bool mig : {false, true}) cells.push_back({p, mig, {}, false, ""});

  std::vector<std::thread> threads;
  threads.reserve(cells.size());
  for (MatrixCell& cell : cells) {
    threads.emplace_back([&cell, &base] {
      RunConfig cfg = base;
      cfg.pt_policy = cell.pt_policy;
      cfg.pte_migration = cell.migration;
      if (!cfg.output_dir.empty())
        cfg.output_dir += std::string("/") + to_string(cell.pt_policy) +
                          (cell.migration ? "_mig" : "_nomig");
      try {
        Simulation sim(cfg);
        cell.report = sim.run();
        if (!cfg.output_dir.empty())
          write_outputs(cell.report, cfg, cfg.output_dir);
      } catch (const std::exception& e) {
        cell.failed = true;
        cell.error = e.what();
      }
    });
  }
  for (std::thread& t : threads) t.join();

  const MatrixCell* baseline = nullptr;
  for (const MatrixCell& c : cells)
    if (c.pt_policy == PtPolicy::FollowData && !c.migration && !c.failed &&
        !c.report.benchmark_oom_killed)
      baseline = &c;

  std::printf("%-12s %-5s %14s %14s %9s %9s  %s\n", "pt_policy", "mig",
              "bench_cycles", "walk_cycles", "rel_cyc", "rel_walk", "note");
  std::string csv = "pt_policy,migration,bench_cycles,walk_cycles,rel_cycles,"
                    "rel_walk,note\n";
  for (const MatrixCell& c : cells) {
    std::string note;
    double rel_cyc = 0.0, rel_walk = 0.0;
    unsigned long long cyc = 0, walk = 0;
    if (c.failed) {
      note = "error: " + c.error;
    } else {
      const auto& a = c.report.processes[0].acct;
      cyc = a.total_cycles(1);
      walk = a.walk_cycles;
      if (c.report.benchmark_oom_killed) note = "oom_killed";
      if (baseline) {
        const auto& ba = baseline->report.processes[0].acct;
        rel_cyc = static_cast<double>(cyc) /
                  static_cast<double>(ba.total_cycles(1));
        rel_walk = ba.walk_cycles
                       ? static_cast<double>(walk) /
                             static_cast<double>(ba.walk_cycles)
                       : 0.0;
      }
    }
    std::printf("%-12s %-5s %14llu %14llu %9.3f %9.3f  %s\n",
                to_string(c.pt_policy), c.migration ? "on" : "off", cyc, walk,
                rel_cyc, rel_walk, note.c_str());
    csv += std::string(to_string(c.pt_policy)) + "," +
           (c.migration ? "on" : "off") + "," + std::to_string(cyc) + "," +
           std::to_string(walk) + "," + std::to_string(rel_cyc) + "," +
           std::to_string(rel_walk) + "," + note + "\n";
  }
  if (!base.output_dir.empty()) {
    std::filesystem::create_directories(base.output_dir);
    FILE* f = std::fopen(
        (std::filesystem::path(base.output_dir) / "matrix.csv").c_str(),
        "w");
    if (!f) throw SimError("cannot write matrix.csv");
    std::fputs(csv.c_str(), f);
    std::fclose(f);
  }
  return kExitOk;
}

int do_validate(const std::string& config_path) {
  RunConfig cfg = load_config_file(config_path);
  resolve_config(cfg);
  std::printf("config ok: scenario=%s nodes=%zu seed=%llu\n",
              to_string(cfg.scenario), cfg.topo.nodes.size(),
              static_cast<unsigned long long>(cfg.seed));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tierpt: page-table placement simulator for tiered memory"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;

  auto add_common = [&](CLI::App* cmd, bool with_overrides) {
    cmd->add_option("-c,--config", config_path, "config file")->required();
    if (with_overrides) {
      cmd->add_option("-s,--seed", seed, "override [run] seed");
      cmd->add_option("-o,--out", out_dir, "override [run] output_dir");
    }
  };
  CLI::App* run = app.add_subcommand("run", "run one simulation");
  add_common(run, true);
  CLI::App* matrix = app.add_subcommand(
      "matrix", "sweep pt policies x pte migration, normalized table");
  add_common(matrix, true);
  CLI::App* validate =
      app.add_subcommand("validate", "parse and check a config");
  add_common(validate, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return do_run(config_path, seed, out_dir);
    if (matrix->parsed()) return do_matrix(config_path, seed, out_dir);
    return do_validate(config_path);
  } catch (const tierpt::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
}
