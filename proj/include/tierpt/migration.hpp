#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "tierpt/locks.hpp"
#include "tierpt/page_table.hpp"
#include "tierpt/topology.hpp"
#include "tierpt/types.hpp"

namespace tierpt {

struct MigrationStats {
  std::uint64_t data_migrations = 0;  // committed data page moves
  std::uint64_t promotions = 0;       // NVMM -> DRAM subset
  std::uint64_t demotions = 0;        // DRAM -> NVMM subset
  std::uint64_t data_oom = 0;
  std::uint64_t data_busy = 0;            // leaf lock contention at start
  std::uint64_t data_skipped_unmapped = 0;
  std::uint64_t data_already_at_dest = 0;

  // Leaf table migration outcomes; one of these per invocation.
  std::uint64_t l4_success = 0;
  std::uint64_t l4_already_in_destination = 0;
  std::uint64_t l4_same_tier_skip = 0;
  std::uint64_t l4_dram_guard_skip = 0;
  std::uint64_t l4_trylock_skip = 0;
  std::uint64_t l4_nomem_skip = 0;
  std::uint64_t l4_aborted = 0;  // mapping vanished between data move and here

  // How many invocations came from the end-of-run residency sweep.
  std::uint64_t l4_drain_invocations = 0;
  std::uint64_t reclaim_demotions = 0;  // demotions done to unblock PT allocs

  std::uint64_t l4_invocations() const {
    return l4_success + l4_already_in_destination + l4_same_tier_skip +
           l4_dram_guard_skip + l4_trylock_skip + l4_nomem_skip + l4_aborted;
  }
};

enum class DataOutcome : std::uint8_t {
  Success,
  NotMapped,
  AlreadyThere,
  OutOfMemory,
  Busy,
};

enum class L4Outcome : std::uint8_t {
  Success,
  AlreadyInDestination,
  SameTierSkip,
  DramGuardSkip,
  TrylockSkip,
  NoMemSkip,
};

const char* to_string(DataOutcome o);
const char* to_string(L4Outcome o);

// Everything a migration needs to touch, wired up by the caller. The
// callbacks keep this module ignorant of the scheduler and the MMUs.
struct MigrationEnv {
  Topology& topo;
  ReverseMap& rmap;
  LockTable& locks;
  MigrationStats& stats;
  std::function<PageTable*(ProcessId)> pt_of;
  std::function<void()> flush_all_mmus;
  std::function<void(ProcessId, Cycles)> charge_stall;
  std::function<void(std::vector<AgentId>&&)> wake;  // may be null
  bool pte_migration_enabled = true;
  bool require_l3_lock = true;

  void unlock(Pfn pfn, AgentId agent);
};

// One migration in flight, advanced one phase per scheduler step so that
// faults and other migrations can interleave with it. A data task moves a
// data page and then, for 4 KiB mappings, offers its leaf table the chance
// to follow. A leaf task runs only the second half.
class MigrationTask {
 public:
  static MigrationTask data_task(Pfn frame, NodeId dest, AgentId agent);
  static MigrationTask leaf_task(Pfn mapped_child_frame, AgentId agent);

  enum class StepResult { Running, Done };
  StepResult step(MigrationEnv& env);

  bool done() const { return phase_ == Phase::Finished; }
  std::optional<DataOutcome> data_outcome() const { return data_outcome_; }
  std::optional<L4Outcome> leaf_outcome() const { return leaf_outcome_; }
  Pfn current_frame() const { return frame_; }

 private:
  enum class Phase {
    DataAcquire,  // resolve mapping, try-lock the leaf
    DataAlloc,
    DataCopy,
    DataCommit,   // flush, rebind, free old frame
    DataUnlock,
    LeafAcquire,  // re-resolve, skip ladder, try-lock L3 then L4
    LeafAlloc,
    LeafCommit,   // flush, swap table page, release both locks
    Finished,
  };

  MigrationTask() = default;
  StepResult finish_data(DataOutcome o);
  StepResult finish_leaf(MigrationEnv& env, L4Outcome o);
  bool still_mapped(const MigrationEnv& env) const;
  StepResult abort_data(MigrationEnv& env);
  StepResult abort_leaf(MigrationEnv& env);

  Phase phase_ = Phase::Finished;
  AgentId agent_ = kNoAgent;
  Pfn frame_ = kNullPfn;  // data frame; updated when the data move commits
  NodeId dest_ = 0;
  bool leaf_only_ = false;

  ProcessId pid_ = 0;
  VirtAddr va_ = 0;
  Pfn leaf_pfn_ = kNullPfn;
  Pfn parent_pfn_ = kNullPfn;
  std::uint32_t parent_index_ = 0;
  std::uint64_t frames_ = 1;
  Pfn staged_ = kNullPfn;      // freshly allocated destination frame
  NodeId staged_node_ = 0;
  bool l3_locked_ = false;
  bool l4_locked_ = false;

  std::optional<DataOutcome> data_outcome_;
  std::optional<L4Outcome> leaf_outcome_;
};

// Drives a task to completion in one go. Contended locks surface as Busy /
// TrylockSkip outcomes exactly as they would under the scheduler.
void run_to_completion(MigrationTask& task, MigrationEnv& env);

struct MovePageResult {
  VirtAddr va;
  DataOutcome data;
  std::optional<L4Outcome> leaf;
};

// Synchronous batch interface in the style of the move_pages syscall.
std::vector<MovePageResult> move_pages(MigrationEnv& env, ProcessId pid,
                                       std::span<const VirtAddr> vas,
                                       NodeId dest, AgentId agent);

struct HotnessConfig {
  bool enabled = true;
  Cycles epoch_cycles = 1'000'000;
  std::uint32_t hot_threshold = 4;
  std::uint32_t promotion_budget = 256;
};

// Exact per-frame access counters standing in for NUMA-hinting faults.
// Counters are cleared at every epoch boundary, so a frame freed and reused
// within one epoch briefly inherits its predecessor's count; hint generation
// filters through the reverse map, which bounds the effect to that window.
class HotnessTracker {
 public:
  HotnessTracker(std::uint32_t cpu_count, const HotnessConfig& cfg);

  void record_access(Pfn frame, CpuId cpu);
  void epoch_reset();
  std::uint64_t count_of(Pfn frame) const;

  struct Hint {
    Pfn frame;
    NodeId dest;
  };
  // NVMM-resident mapped frames at or above the hot threshold, hottest
  // first (ties by ascending pfn), capped at the promotion budget. Empty
  // whenever no DRAM node sits above its low watermark: promoting into an
  // already-pressured tier only forces reclaim.
  std::vector<Hint> promotion_hints(const Topology& topo,
                                    const ReverseMap& rmap) const;

  // Coldest DRAM-resident mapped frames, up to max_frames.
  std::vector<Pfn> cold_dram_frames(const Topology& topo,
                                    const ReverseMap& rmap,
                                    std::uint64_t max_frames) const;

  const HotnessConfig& config() const { return cfg_; }

 private:
  struct FrameCounts {
    std::uint64_t total = 0;
    std::vector<std::uint32_t> per_cpu;
  };
  HotnessConfig cfg_;
  std::uint32_t cpu_count_;
  std::unordered_map<Pfn, FrameCounts> counts_;
};

// Demotes up to max_pages of the coldest DRAM data pages toward the nearest
// NVMM node with room. Returns how many were actually moved. The tracker may
// be null, in which case every page counts as equally cold.
std::uint64_t demote_cold_pages(MigrationEnv& env, const HotnessTracker* hot,
                                std::uint64_t max_pages, AgentId agent);

}  // namespace tierpt
