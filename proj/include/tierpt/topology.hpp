#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "tierpt/types.hpp"

namespace tierpt {

inline constexpr std::size_t kMaxNodes = 16;

struct NodeConfig {
  NodeId id = 0;
  Tier tier = Tier::Dram;
  std::uint64_t capacity_pages = 0;
  Cycles read_latency = 100;
  Cycles write_latency = 100;
  std::uint32_t cpu_count = 0;
};

struct TopologyConfig {
  std::vector<NodeConfig> nodes;
  // Row-major distance matrix. Empty means "derive a default": 0 on the
  // diagonal, 17 DRAM<->NVMM on the same socket, 21 remote same tier,
  // 28 remote cross tier, pairing DRAM k with NVMM k as one socket.
  std::vector<std::vector<std::uint32_t>> distance;
  double low_watermark_pct = 2.0;
  double min_watermark_pct = 0.5;
  Cycles fast_path_latency = 500;
  Cycles slow_path_latency = 50000;
};

enum class AllocPath : std::uint8_t { Fast, Slow };

struct AllocOutcome {
  Pfn pfn = kNullPfn;
  NodeId node = 0;
  AllocPath path = AllocPath::Fast;
  Cycles latency = 0;
};

// Preference-ordered allocation targets, highest priority first.
struct CandidateList {
  std::array<NodeId, kMaxNodes> nodes{};
  std::size_t count = 0;

  void push(NodeId n) { nodes[count++] = n; }
  const NodeId* begin() const { return nodes.data(); }
  const NodeId* end() const { return nodes.data() + count; }
  NodeId operator[](std::size_t i) const { return nodes[i]; }
};

// Round-robin state for interleaved placement. One cursor per process, shared
// by data and table allocations of that process.
struct InterleaveCursor {
  std::uint32_t next = 0;
};

class NumaNode {
 public:
  NumaNode(const NodeConfig& cfg, double low_pct, double min_pct);

  NodeId id() const { return id_; }
  Tier tier() const { return tier_; }
  std::uint64_t capacity_pages() const { return capacity_; }
  std::uint64_t free_pages() const { return free_; }
  std::uint64_t allocated_pages() const { return capacity_ - free_; }
  std::uint64_t low_watermark() const { return low_wm_; }
  std::uint64_t min_watermark() const { return min_wm_; }
  Cycles read_latency() const { return read_lat_; }
  Cycles write_latency() const { return write_lat_; }
  std::uint32_t cpu_count() const { return cpu_count_; }

  bool can_provide(std::uint64_t frames) const {
    return free_ > min_wm_ && free_ >= frames;
  }

 private:
  friend class Topology;

  std::uint64_t take(std::uint64_t frames);  // returns base frame index
  void give_back(std::uint64_t base, std::uint64_t frames);

  NodeId id_;
  Tier tier_;
  std::uint64_t capacity_;
  std::uint64_t free_;
  std::uint64_t low_wm_;
  std::uint64_t min_wm_;
  Cycles read_lat_;
  Cycles write_lat_;
  std::uint32_t cpu_count_;

  std::uint64_t next_fresh_ = 0;
  std::vector<std::uint64_t> free_singles_;
  std::vector<std::uint64_t> free_blocks_;  // 512-frame huge blocks
  std::vector<bool> allocated_;             // marks block base frames
};

class Topology {
 public:
  explicit Topology(const TopologyConfig& cfg);

  std::size_t node_count() const { return nodes_.size(); }
  const NumaNode& node(NodeId id) const { return nodes_.at(id); }
  const std::vector<NumaNode>& nodes() const { return nodes_; }
  std::uint32_t distance(NodeId a, NodeId b) const { return distance_[a][b]; }

  // Ordered allocation targets for one page. Table pages are filtered by the
  // placement policy (BindAll: all levels to DRAM, BindHigh: L1..L3 only);
  // data pages never are. The cursor advances once per call under Interleave.
  CandidateList select_node(PageKind kind, DataPolicy data_policy,
                            PtPolicy pt_policy, NodeId local_node,
                            InterleaveCursor& cursor) const;

  // Walks the candidate list and takes `frames` frames from the first node
  // that can provide them without crossing its min watermark. The slow path
  // is charged when that node sits below its low watermark at selection time.
  std::optional<AllocOutcome> alloc_page(const CandidateList& candidates,
                                         std::uint64_t frames = 1);
  void free_page(Pfn pfn);

  NodeId node_of(Pfn pfn) const;  // throws InvalidOperation on unknown frames
  Tier tier_of(Pfn pfn) const { return nodes_[node_of(pfn)].tier(); }
  bool is_allocated(Pfn pfn) const;
  Cycles read_latency_of(Pfn pfn) const {
    return nodes_[node_of(pfn)].read_latency();
  }

  bool any_dram_above_low_watermark() const;
  std::vector<NodeId> dram_nodes() const;
  std::vector<NodeId> nvmm_nodes() const;
  // Nodes of `tier` ordered by distance from `from`, nearest first.
  std::vector<NodeId> tier_by_distance(NodeId from, Tier tier) const;
  NodeId local_node_of_cpu(CpuId cpu) const;
  std::uint32_t total_cpus() const { return total_cpus_; }

  Cycles fast_path_latency() const { return fast_lat_; }
  Cycles slow_path_latency() const { return slow_lat_; }

 private:
  void check_pfn(Pfn pfn) const;

  std::vector<NumaNode> nodes_;
  std::vector<std::vector<std::uint32_t>> distance_;
  // Fallback order per local node: same tier by distance, then the other
  // tier by distance; the local node itself comes first at lookup time.
  std::vector<std::vector<NodeId>> first_touch_order_;
  std::unordered_map<Pfn, std::uint32_t> block_sizes_;  // bases of >1 blocks
  std::vector<CpuId> cpu_to_node_;
  std::uint32_t total_cpus_ = 0;
  Cycles fast_lat_;
  Cycles slow_lat_;
};

std::vector<std::vector<std::uint32_t>> default_distance_matrix(
    const std::vector<NodeConfig>& nodes);

}  // namespace tierpt
