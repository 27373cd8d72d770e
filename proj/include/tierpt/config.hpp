#pragma once

#include <cstdint>
#include <string>

#include "tierpt/migration.hpp"
#include "tierpt/mmu.hpp"
#include "tierpt/topology.hpp"
#include "tierpt/types.hpp"
#include "tierpt/workloads.hpp"

namespace tierpt {

struct WorkloadConfig {
  std::uint64_t footprint_mib = 64;
  bool populate = true;
  Distribution dist = Distribution::Zipfian;
  double theta = 0.99;
  bool scramble = true;
  double read_ratio = 0.8;
  std::uint64_t op_count = 200'000;
  std::uint32_t compute_gap = 0;
  std::string trace_file;  // replaces the synthetic stream when set
  CpuId cpu = 0;
};

struct MultiTenantConfig {
  std::uint64_t filler_mib = 0;       // 0: sized to cover all of DRAM
  std::uint64_t filler_dwell_ops = 0; // 0: quarter of the benchmark ops
  CpuId filler_cpu = 0;
};

struct EngineTuning {
  std::uint32_t cpi_base = 1;
  Cycles lock_wait_cycles = 1000;
  std::uint64_t sample_window = 2048;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string output_dir;
  ScenarioKind scenario = ScenarioKind::FullSystem;

  TopologyConfig topo;  // empty node list: desk-scale default machine
  MmuConfig mmu;

  DataPolicy data_policy = DataPolicy::FirstTouch;
  PtPolicy pt_policy = PtPolicy::BindHigh;
  bool thp = false;

  HotnessConfig autonuma;
  bool pte_migration = true;
  bool drain_at_quiescence = true;
  bool require_l3_lock = true;
  bool demotion_enabled = true;
  bool reclaim_enabled = true;
  std::uint32_t reclaim_batch = 64;

  EngineTuning engine;
  WorkloadConfig workload;
  MultiTenantConfig multi_tenant;

  PageSizeMode page_mode() const {
    return thp ? PageSizeMode::Thp2M : PageSizeMode::Base4K;
  }
};

// Two DRAM nodes with CPUs plus two larger, slower NVMM nodes; small enough
// that every scenario saturates DRAM in seconds of simulated time.
std::vector<NodeConfig> default_nodes();

// Parses the key = value config format, rejecting unknown sections or keys.
RunConfig parse_config(const std::string& text);
RunConfig load_config_file(const std::string& path);

// Canonical text form; every key explicit. parse(emit(c)) reproduces c.
std::string emit_config(const RunConfig& cfg);

// Fills scenario-derived values (filler sizing, forced policies) and checks
// cross-field consistency. Throws ConfigError. Safe to call twice.
void resolve_config(RunConfig& cfg);

}  // namespace tierpt
