#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tierpt/topology.hpp"
#include "tierpt/types.hpp"

namespace tierpt {

struct VaIndices {
  std::uint32_t i1, i2, i3, i4;
  std::uint32_t offset;
};

// Splits a canonical 48-bit address into four 9-bit radix indices plus the
// 12-bit page offset. Throws on non-canonical input.
VaIndices decompose(VirtAddr va);
VirtAddr compose(std::uint32_t i1, std::uint32_t i2, std::uint32_t i3,
                 std::uint32_t i4, std::uint32_t offset = 0);

// Global frame-to-mapping index shared by every process. Lets migration code
// go from a data frame back to the page table entry that references it.
class ReverseMap {
 public:
  struct Mapping {
    ProcessId pid;
    VirtAddr va;  // page-aligned (2 MiB-aligned for huge mappings)
  };

  void insert(Pfn frame, ProcessId pid, VirtAddr va);
  void erase(Pfn frame);
  std::optional<Mapping> find(Pfn frame) const;
  std::size_t size() const { return map_.size(); }

  // Frames in ascending order, for deterministic scans.
  std::vector<Pfn> sorted_frames() const;

 private:
  std::unordered_map<Pfn, Mapping> map_;
};

struct PtPage {
  Pfn pfn = kNullPfn;
  PtLevel level = PtLevel::L1;
  NodeId node = 0;
  std::array<Pfn, kEntriesPerPage> entries{};
  std::uint32_t present_count = 0;
  // Leaf pages only: how many referenced data frames live on DRAM.
  std::uint32_t dram_child_count = 0;
};

struct LevelTouch {
  PtLevel level;
  NodeId node;
  Pfn frame;
};

struct WalkResult {
  Pfn data_pfn = kNullPfn;
  std::uint32_t offset = 0;
  std::array<LevelTouch, 4> touched{};
  std::uint32_t touched_count = 0;
};

struct MapOutcome {
  Pfn data_pfn = kNullPfn;
  std::array<std::pair<PtLevel, NodeId>, 3> new_tables{};
  std::uint32_t new_table_count = 0;
  Cycles alloc_latency = 0;  // summed over every allocation the fault did
  bool slow_path = false;
};

struct MapError {
  bool table_alloc_failed = false;  // else the data allocation failed
  PtLevel level = PtLevel::L4;      // which table level, when table_alloc_failed
};

struct MapResult {
  std::optional<MapOutcome> ok;
  MapError err;
};

// (level, node) -> page count
using PtDistribution = std::map<std::pair<int, NodeId>, std::uint64_t>;

struct PtSizeEstimate {
  std::uint64_t l1_pages, l2_pages, l3_pages, l4_pages;
  std::uint64_t total_pages() const {
    return l1_pages + l2_pages + l3_pages + l4_pages;
  }
  std::uint64_t total_bytes() const { return total_pages() * kPageSize; }
  std::uint64_t upper_pages() const { return l1_pages + l2_pages + l3_pages; }
};

// Table pages needed for a densely mapped region of `footprint_bytes`,
// assuming each level packs entries fully before spilling to a new page.
PtSizeEstimate pt_size_estimate(std::uint64_t footprint_bytes,
                                PageSizeMode mode);

// One process' radix tree. Placement decisions go through the topology with
// the process' policies; the reverse map is updated on every data map/unmap.
class PageTable {
 public:
  PageTable(ProcessId pid, PageSizeMode mode, DataPolicy data_policy,
            PtPolicy pt_policy, Topology& topo, ReverseMap& rmap,
            NodeId root_local_node);
  ~PageTable();

  PageTable(const PageTable&) = delete;
  PageTable& operator=(const PageTable&) = delete;

  ProcessId pid() const { return pid_; }
  PageSizeMode mode() const { return mode_; }
  DataPolicy data_policy() const { return data_policy_; }
  PtPolicy pt_policy() const { return pt_policy_; }
  InterleaveCursor& cursor() { return cursor_; }
  bool alive() const { return root_ != kNullPfn; }
  Pfn root_pfn() const { return root_; }

  // Installs any missing intermediate tables plus the data frame. On an
  // allocation failure every table page created so far stays in place and
  // the error names the level that failed.
  MapResult map(VirtAddr va, NodeId local_node);
  Pfn unmap(VirtAddr va);  // frees the data frame, returns its old pfn

  std::optional<WalkResult> try_walk(VirtAddr va) const;
  WalkResult walk_sw(VirtAddr va) const;  // throws InvalidOperation if unmapped

  struct LeafRef {
    PtPage* leaf;    // L4 page (L3 for huge mappings)
    PtPage* parent;  // its parent table page
    std::uint32_t leaf_index;    // data entry slot within leaf
    std::uint32_t parent_index;  // leaf's slot within parent
    VirtAddr va;
  };
  // Resolves a mapped data frame of this process to its leaf entry.
  LeafRef pt_entries_of(Pfn data_pfn);

  // The leaf (or would-be leaf) table whose lock matters for changing the
  // mapping at `va`: the L4 page when present, else the L3 page that the
  // fault would insert a new L4 into. Null when nothing relevant exists yet.
  Pfn lock_target_for(VirtAddr va) const;

  PtPage* page(Pfn table_pfn);
  const PtPage* page(Pfn table_pfn) const;
  std::size_t table_page_count() const { return pages_.size(); }

  PtDistribution distribution() const;
  std::uint64_t mapped_data_pages() const { return mapped_data_pages_; }
  // Mapped data pages split into (dram, nvmm) by current residency.
  std::pair<std::uint64_t, std::uint64_t> data_tier_counts() const;
  // Table pfns in ascending order, optionally restricted to one level.
  std::vector<Pfn> table_pfns(std::optional<PtLevel> level = {}) const;

  // Swaps a leaf table page for a copy on another node: caller provides the
  // already-allocated replacement frame; entries and counters carry over,
  // the parent pointer is updated and the old frame is freed.
  PtPage* replace_leaf_table(Pfn old_pfn, Pfn parent_pfn,
                             std::uint32_t parent_index, Pfn new_pfn,
                             NodeId new_node);

  // Data-side bookkeeping used by migration: rebind the leaf entry for va
  // from old_pfn to new_pfn and fix dram_child_count.
  void rebind_data(VirtAddr va, Pfn old_pfn, Pfn new_pfn);

  // Frees all data frames and table pages and erases reverse mappings.
  void teardown();

 private:
  struct DescendHit {
    PtPage* chain[4] = {nullptr, nullptr, nullptr, nullptr};
    int depth = 0;  // how many chain entries are valid
  };
  DescendHit descend(VirtAddr va) const;
  int leaf_depth() const { return mode_ == PageSizeMode::Base4K ? 4 : 3; }
  std::uint32_t leaf_index(const VaIndices& ix) const {
    return mode_ == PageSizeMode::Base4K ? ix.i4 : ix.i3;
  }

  ProcessId pid_;
  PageSizeMode mode_;
  DataPolicy data_policy_;
  PtPolicy pt_policy_;
  Topology& topo_;
  ReverseMap& rmap_;
  InterleaveCursor cursor_;
  Pfn root_ = kNullPfn;
  std::unordered_map<Pfn, PtPage> pages_;
  std::uint64_t mapped_data_pages_ = 0;
};

}  // namespace tierpt
