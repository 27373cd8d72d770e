#include "tierpt/report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace tierpt {

using nlohmann::ordered_json;

namespace {

ordered_json acct_json(const CycleAccounting& a, std::uint32_t cpi_base) {
  ordered_json j;
  j["instructions"] = a.instructions;
  j["memory_accesses"] = a.memory_accesses;
  j["dram_data_accesses"] = a.dram_data_accesses;
  j["tlb_misses"] = a.tlb_misses;
  j["faults"] = a.faults;
  j["slow_path_allocs"] = a.slow_path_allocs;
  j["lock_block_episodes"] = a.lock_block_episodes;
  j["total_cycles"] = a.total_cycles(cpi_base);
  j["stall_cycles"] = a.stall_cycles;
  j["walk_cycles"] = a.walk_cycles;
  j["data_cycles"] = a.data_cycles;
  j["alloc_cycles"] = a.alloc_cycles;
  j["lock_wait_cycles"] = a.lock_wait_cycles;
  j["migration_copy_cycles"] = a.migration_copy_cycles;
  j["max_walk_cycles"] = a.max_walk_cycles;
  return j;
}

ordered_json dist_json(const PtDistribution& d) {
  ordered_json arr = ordered_json::array();
  for (const auto& [key, pages] : d) {
    auto [level, node] = key;
    ordered_json row;
    row["level"] = level;
    row["node"] = node;
    row["pages"] = pages;
    arr.push_back(std::move(row));
  }
  return arr;
}

ordered_json occupancy_json(const std::vector<NodeOccupancy>& occ) {
  ordered_json arr = ordered_json::array();
  for (const NodeOccupancy& n : occ) {
    ordered_json row;
    row["node"] = n.node;
    row["tier"] = to_string(n.tier);
    row["capacity_pages"] = n.capacity_pages;
    row["free_pages"] = n.free_pages;
    arr.push_back(std::move(row));
  }
  return arr;
}

}  // namespace

ordered_json report_to_json(const Report& r) {
  ordered_json j;
  j["scenario"] = r.scenario;
  j["seed"] = r.seed;
  j["benchmark_oom_killed"] = r.benchmark_oom_killed;
  j["l4_residency_violations"] = r.l4_residency_violations;
  j["total"] = acct_json(r.total, 1);

  ordered_json procs = ordered_json::array();
  for (const ProcessReport& p : r.processes) {
    ordered_json pj;
    pj["pid"] = p.pid;
    pj["name"] = p.name;
    pj["cpu"] = p.cpu;
    pj["mpki"] = p.mpki;
    pj["oom_killed"] = p.oom_killed;
    pj["ran_to_completion"] = p.ran_to_completion;
    pj["acct"] = acct_json(p.acct, 1);
    procs.push_back(std::move(pj));
  }
  j["processes"] = std::move(procs);

  ordered_json mig;
  const MigrationStats& m = r.migration;
  mig["data_migrations"] = m.data_migrations;
  mig["promotions"] = m.promotions;
  mig["demotions"] = m.demotions;
  mig["data_oom"] = m.data_oom;
  mig["data_busy"] = m.data_busy;
  mig["data_skipped_unmapped"] = m.data_skipped_unmapped;
  mig["data_already_at_dest"] = m.data_already_at_dest;
  mig["l4_success"] = m.l4_success;
  mig["l4_already_in_destination"] = m.l4_already_in_destination;
  mig["l4_same_tier_skip"] = m.l4_same_tier_skip;
  mig["l4_dram_guard_skip"] = m.l4_dram_guard_skip;
  mig["l4_trylock_skip"] = m.l4_trylock_skip;
  mig["l4_nomem_skip"] = m.l4_nomem_skip;
  mig["l4_aborted"] = m.l4_aborted;
  mig["l4_invocations"] = m.l4_invocations();
  mig["l4_drain_invocations"] = m.l4_drain_invocations;
  mig["reclaim_demotions"] = m.reclaim_demotions;
  j["migration"] = std::move(mig);

  ordered_json events = ordered_json::array();
  for (const Event& e : r.events) {
    ordered_json ej;
    ej["kind"] = to_string(e.kind);
    ej["pid"] = e.pid;
    ej["cycle"] = e.cycle;
    ej["detail"] = e.detail;
    events.push_back(std::move(ej));
  }
  j["events"] = std::move(events);

  ordered_json snaps = ordered_json::array();
  for (const PtSnapshot& s : r.snapshots) {
    ordered_json sj;
    sj["label"] = s.label;
    sj["pid"] = s.pid;
    sj["l4_total"] = s.l4_total;
    sj["l4_dram"] = s.l4_dram;
    sj["upper_total"] = s.upper_total;
    sj["upper_dram"] = s.upper_dram;
    sj["data_dram"] = s.data_dram;
    sj["data_nvmm"] = s.data_nvmm;
    sj["distribution"] = dist_json(s.dist);
    snaps.push_back(std::move(sj));
  }
  j["snapshots"] = std::move(snaps);

  j["final_pt_distribution"] = dist_json(r.final_pt_distribution);
  j["occupancy"] = occupancy_json(r.occupancy);
  if (!r.occupancy_at_oom.empty())
    j["occupancy_at_oom"] = occupancy_json(r.occupancy_at_oom);

  ordered_json series = ordered_json::array();
  for (const WalkSample& w : r.walk_series) {
    ordered_json wj;
    wj["window_start_cycle"] = w.window_start_cycle;
    wj["mean_walk_cycles"] = w.mean_walk_cycles;
    wj["tlb_miss_count"] = w.tlb_miss_count;
    series.push_back(std::move(wj));
  }
  j["walk_series"] = std::move(series);
  return j;
}

std::string walk_latency_csv(const Report& r) {
  std::ostringstream o;
  o << "window_start_cycle,mean_walk_cycles,tlb_miss_count\n";
  char buf[32];
  for (const WalkSample& w : r.walk_series) {
    std::snprintf(buf, sizeof buf, "%.3f", w.mean_walk_cycles);
    o << w.window_start_cycle << "," << buf << "," << w.tlb_miss_count
      << "\n";
  }
  return o.str();
}

std::string pt_distribution_csv(const Report& r) {
  std::ostringstream o;
  o << "level,node,pages,bytes\n";
  for (const auto& [key, pages] : r.final_pt_distribution) {
    auto [level, node] = key;
    o << "L" << level << "," << node << "," << pages << ","
      << pages * kPageSize << "\n";
  }
  return o.str();
}

std::string migrations_csv(const Report& r) {
  const MigrationStats& m = r.migration;
  std::ostringstream o;
  o << "counter,value\n";
  o << "data_migrations," << m.data_migrations << "\n";
  o << "promotions," << m.promotions << "\n";
  o << "demotions," << m.demotions << "\n";
  o << "data_oom," << m.data_oom << "\n";
  o << "data_busy," << m.data_busy << "\n";
  o << "data_skipped_unmapped," << m.data_skipped_unmapped << "\n";
  o << "data_already_at_dest," << m.data_already_at_dest << "\n";
  o << "l4_success," << m.l4_success << "\n";
  o << "l4_already_in_destination," << m.l4_already_in_destination << "\n";
  o << "l4_same_tier_skip," << m.l4_same_tier_skip << "\n";
  o << "l4_dram_guard_skip," << m.l4_dram_guard_skip << "\n";
  o << "l4_trylock_skip," << m.l4_trylock_skip << "\n";
  o << "l4_nomem_skip," << m.l4_nomem_skip << "\n";
  o << "l4_aborted," << m.l4_aborted << "\n";
  o << "l4_invocations," << m.l4_invocations() << "\n";
  o << "l4_drain_invocations," << m.l4_drain_invocations << "\n";
  o << "reclaim_demotions," << m.reclaim_demotions << "\n";
  return o.str();
}

void write_outputs(const Report& r, const RunConfig& cfg,
                   const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream out(fs::path(dir) / name, std::ios::binary);
    if (!out) throw SimError("cannot write " + name + " in " + dir);
    out << body;
  };
  write("summary.json", report_to_json(r).dump(2) + "\n");
  write("walk_latency.csv", walk_latency_csv(r));
  write("pt_distribution.csv", pt_distribution_csv(r));
  write("migrations.csv", migrations_csv(r));
  write("effective_config", emit_config(cfg));
}

}  // namespace tierpt
