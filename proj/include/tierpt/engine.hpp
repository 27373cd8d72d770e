#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tierpt/config.hpp"
#include "tierpt/locks.hpp"
#include "tierpt/migration.hpp"
#include "tierpt/mmu.hpp"
#include "tierpt/page_table.hpp"
#include "tierpt/topology.hpp"
#include "tierpt/types.hpp"
#include "tierpt/workloads.hpp"

namespace tierpt {

struct CycleAccounting {
  std::uint64_t instructions = 0;
  std::uint64_t memory_accesses = 0;
  std::uint64_t dram_data_accesses = 0;
  std::uint64_t tlb_misses = 0;
  std::uint64_t faults = 0;
  std::uint64_t slow_path_allocs = 0;
  std::uint64_t lock_block_episodes = 0;
  Cycles stall_cycles = 0;
  Cycles walk_cycles = 0;
  Cycles data_cycles = 0;
  Cycles alloc_cycles = 0;
  Cycles lock_wait_cycles = 0;
  Cycles migration_copy_cycles = 0;
  Cycles max_walk_cycles = 0;

  Cycles total_cycles(std::uint32_t cpi_base) const {
    return instructions * cpi_base + stall_cycles;
  }
  void add(const CycleAccounting& o);
};

enum class EventKind : std::uint8_t {
  ProcessStart,
  ProcessExit,
  OomKill,
  DramSpill,
};
const char* to_string(EventKind k);

struct Event {
  EventKind kind;
  ProcessId pid;
  Cycles cycle;
  std::string detail;
};

struct WalkSample {
  Cycles window_start_cycle;
  double mean_walk_cycles;
  std::uint64_t tlb_miss_count;
};

struct PtSnapshot {
  std::string label;
  ProcessId pid;
  PtDistribution dist;
  std::uint64_t l4_total = 0;
  std::uint64_t l4_dram = 0;
  std::uint64_t upper_total = 0;  // L1..L3 pages
  std::uint64_t upper_dram = 0;
  std::uint64_t data_dram = 0;
  std::uint64_t data_nvmm = 0;
};

struct NodeOccupancy {
  NodeId node;
  Tier tier;
  std::uint64_t capacity_pages;
  std::uint64_t free_pages;
};

struct ProcessReport {
  ProcessId pid;
  std::string name;
  CpuId cpu;
  CycleAccounting acct;
  double mpki = 0.0;
  bool oom_killed = false;
  bool ran_to_completion = false;
};

struct Report {
  std::string scenario;
  std::uint64_t seed = 0;
  CycleAccounting total;
  std::vector<ProcessReport> processes;
  MigrationStats migration;
  std::vector<Event> events;
  std::vector<WalkSample> walk_series;  // benchmark process
  std::vector<PtSnapshot> snapshots;
  PtDistribution final_pt_distribution;  // live processes only
  std::vector<NodeOccupancy> occupancy;
  std::vector<NodeOccupancy> occupancy_at_oom;  // empty unless a kill happened
  std::uint64_t l4_residency_violations = 0;
  bool benchmark_oom_killed = false;

  Cycles benchmark_cycles(std::uint32_t cpi_base = 1) const {
    return processes.empty() ? 0 : processes[0].acct.total_cycles(cpi_base);
  }
};

class Simulation;

class Agent {
 public:
  virtual ~Agent() = default;
  virtual bool ready(Simulation& sim) = 0;
  virtual void step(Simulation& sim) = 0;
  bool finished = false;
  bool blocked = false;
  AgentId id = kNoAgent;
};

struct ProcessCtx {
  ProcessId pid;
  std::string name;
  CpuId cpu;
  std::unique_ptr<PageTable> pt;
  CycleAccounting acct;
  bool populate_done = false;
  bool running_done = false;  // problem stream exhausted
  bool oom_killed = false;

  // Walk-latency window state, benchmark only.
  std::uint64_t window_accesses = 0;
  std::uint64_t window_misses = 0;
  Cycles window_walk_cycles = 0;
  Cycles window_start_cycle = 0;
};

// Owns the whole simulated machine and drives the agents under a seeded
// random interleaving until everything has run to completion.
class Simulation {
 public:
  explicit Simulation(RunConfig cfg);  // resolves the config internally
  Report run();

  // World state, also used directly by tests.
  Topology& topo() { return *topo_; }
  ReverseMap& rmap() { return rmap_; }
  LockTable& locks() { return locks_; }
  MigrationStats& stats() { return stats_; }
  HotnessTracker& tracker() { return *tracker_; }
  const RunConfig& cfg() const { return cfg_; }
  ProcessCtx& process(ProcessId pid) { return *processes_.at(pid); }
  std::size_t process_count() const { return processes_.size(); }
  Mmu& mmu_of_cpu(CpuId cpu) { return mmus_.at(cpu); }

  // Furthest-ahead clock among processes still running; once everything has
  // finished, the overall maximum.
  Cycles now() const;
  void flush_all_mmus();
  void charge_stall(ProcessId pid, Cycles cycles);  // migration copy costs
  MigrationEnv migration_env();

  void record_event(EventKind kind, ProcessId pid, std::string detail);
  void take_snapshot(const std::string& label, ProcessId pid);
  void account_access(ProcessCtx& p, const AccessOutcome& out,
                      std::uint32_t compute_gap);

  ProcessId spawn_process(std::string name, CpuId cpu);
  void kill_process(ProcessId pid, bool oom);

  bool all_workloads_done() const;
  void wake_agents(std::vector<AgentId>&& ids);
  void block_agent(AgentId id, Pfn token);

  std::uint64_t count_l4_residency_violations() const;

 private:
  friend class WorkloadAgent;
  friend class NumaBalanceAgent;

  void build_agents();
  void scheduler_loop();
  void drain_leaf_residency();
  Report make_report();
  void flush_window(ProcessCtx& p);

  RunConfig cfg_;
  std::unique_ptr<Topology> topo_;
  ReverseMap rmap_;
  LockTable locks_;
  MigrationStats stats_;
  std::unique_ptr<HotnessTracker> tracker_;
  std::vector<Mmu> mmus_;
  std::vector<std::unique_ptr<ProcessCtx>> processes_;
  std::vector<std::unique_ptr<Agent>> agents_;
  std::vector<Event> events_;
  std::vector<WalkSample> walk_series_;
  std::vector<PtSnapshot> snapshots_;
  std::vector<NodeOccupancy> occupancy_at_oom_;
  std::vector<AgentId> workload_agents_;
  std::mt19937_64 sched_rng_;
  bool ran_ = false;
};

}  // namespace tierpt
