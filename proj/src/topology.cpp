#include "tierpt/topology.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tierpt {

std::vector<std::vector<std::uint32_t>> default_distance_matrix(
    const std::vector<NodeConfig>& nodes) {
  // Pair the k-th DRAM node with the k-th NVMM node as one socket, mirroring
  // a two-socket board where each socket carries DIMMs plus persistent
  // memory. CPU-less NVMM nodes inherit their socket from that pairing.
  std::vector<int> socket(nodes.size(), 0);
  int dram_seen = 0, nvmm_seen = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].tier == Tier::Dram)
      socket[i] = dram_seen++;
    else
      socket[i] = nvmm_seen++;
  }
  std::vector<std::vector<std::uint32_t>> d(
      nodes.size(), std::vector<std::uint32_t>(nodes.size(), 0));
  for (std::size_t a = 0; a < nodes.size(); ++a) {
    for (std::size_t b = 0; b < nodes.size(); ++b) {
      if (a == b) continue;
      bool same_socket = socket[a] == socket[b];
      bool same_tier = nodes[a].tier == nodes[b].tier;
      if (same_socket && !same_tier)
        d[a][b] = 17;
      else if (same_tier)
        d[a][b] = 21;
      else
        d[a][b] = 28;
    }
  }
  return d;
}

NumaNode::NumaNode(const NodeConfig& cfg, double low_pct, double min_pct)
    : id_(cfg.id),
      tier_(cfg.tier),
      capacity_(cfg.capacity_pages),
      free_(cfg.capacity_pages),
      read_lat_(cfg.read_latency),
      write_lat_(cfg.write_latency),
      cpu_count_(cfg.cpu_count),
      allocated_(cfg.capacity_pages, false) {
  low_wm_ = static_cast<std::uint64_t>(
      std::llround(static_cast<double>(capacity_) * low_pct / 100.0));
  min_wm_ = static_cast<std::uint64_t>(
      std::llround(static_cast<double>(capacity_) * min_pct / 100.0));
}

std::uint64_t NumaNode::take(std::uint64_t frames) {
  std::uint64_t base;
  if (frames == 1 && !free_singles_.empty()) {
    base = free_singles_.back();
    free_singles_.pop_back();
  } else if (frames == kFramesPerHugePage && !free_blocks_.empty()) {
    base = free_blocks_.back();
    free_blocks_.pop_back();
  } else {
    // Fresh range. free_ >= frames was checked, but recycled frames do not
    // extend the fresh region, so a fragmented node can still fail here.
    if (next_fresh_ + frames > capacity_) return capacity_;  // sentinel
    base = next_fresh_;
    next_fresh_ += frames;
  }
  allocated_[base] = true;
  free_ -= frames;
  return base;
}

void NumaNode::give_back(std::uint64_t base, std::uint64_t frames) {
  allocated_[base] = false;
  free_ += frames;
  if (frames == 1)
    free_singles_.push_back(base);
  else
    free_blocks_.push_back(base);
}

Topology::Topology(const TopologyConfig& cfg)
    : fast_lat_(cfg.fast_path_latency), slow_lat_(cfg.slow_path_latency) {
  if (cfg.nodes.empty()) throw ConfigError("topology: no nodes");
  if (cfg.nodes.size() > kMaxNodes)
    throw ConfigError("topology: too many nodes");
  nodes_.reserve(cfg.nodes.size());
  for (std::size_t i = 0; i < cfg.nodes.size(); ++i) {
    if (cfg.nodes[i].id != i)
      throw ConfigError("topology: node ids must be 0..n-1 in order");
    if (cfg.nodes[i].capacity_pages == 0)
      throw ConfigError("topology: node with zero capacity");
    nodes_.emplace_back(cfg.nodes[i], cfg.low_watermark_pct,
                        cfg.min_watermark_pct);
  }
  distance_ = cfg.distance.empty() ? default_distance_matrix(cfg.nodes)
                                   : cfg.distance;
  if (distance_.size() != nodes_.size())
    throw ConfigError("topology: distance matrix size mismatch");
  for (const auto& row : distance_)
    if (row.size() != nodes_.size())
      throw ConfigError("topology: distance matrix size mismatch");

  bool have_dram_cpu = false;
  for (const auto& n : nodes_) {
    if (n.cpu_count() > 0 && n.tier() == Tier::Dram) have_dram_cpu = true;
    if (n.cpu_count() > 0 && n.tier() == Tier::Nvmm)
      throw ConfigError("topology: NVMM nodes are CPU-less");
    for (std::uint32_t c = 0; c < n.cpu_count(); ++c)
      cpu_to_node_.push_back(n.id());
  }
  if (!have_dram_cpu) throw ConfigError("topology: no CPUs on any DRAM node");
  total_cpus_ = static_cast<std::uint32_t>(cpu_to_node_.size());

  first_touch_order_.resize(nodes_.size());
  for (NodeId local = 0; local < nodes_.size(); ++local) {
    auto& order = first_touch_order_[local];
    for (NodeId n = 0; n < nodes_.size(); ++n)
      if (n != local) order.push_back(n);
    std::sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
      bool a_same = nodes_[a].tier() == nodes_[local].tier();
      bool b_same = nodes_[b].tier() == nodes_[local].tier();
      if (a_same != b_same) return a_same;
      if (distance_[local][a] != distance_[local][b])
        return distance_[local][a] < distance_[local][b];
      return a < b;
    });
  }
}

CandidateList Topology::select_node(PageKind kind, DataPolicy data_policy,
                                    PtPolicy pt_policy, NodeId local_node,
                                    InterleaveCursor& cursor) const {
  CandidateList order;
  if (data_policy == DataPolicy::FirstTouch) {
    order.push(local_node);
    for (NodeId n : first_touch_order_[local_node]) order.push(n);
  } else {
    auto n = static_cast<std::uint32_t>(nodes_.size());
    std::uint32_t start = cursor.next % n;
    cursor.next = (start + 1) % n;
    for (std::uint32_t i = 0; i < n; ++i) order.push((start + i) % n);
  }

  bool dram_only = kind.is_table &&
                   (pt_policy == PtPolicy::BindAll ||
                    (pt_policy == PtPolicy::BindHigh &&
                     kind.level != PtLevel::L4));
  if (!dram_only) return order;

  CandidateList filtered;
  for (NodeId n : order)
    if (nodes_[n].tier() == Tier::Dram) filtered.push(n);
  return filtered;
}

std::optional<AllocOutcome> Topology::alloc_page(
    const CandidateList& candidates, std::uint64_t frames) {
  for (NodeId id : candidates) {
    NumaNode& n = nodes_[id];
    if (!n.can_provide(frames)) continue;
    bool slow = n.free_pages() < n.low_watermark();
    std::uint64_t base = n.take(frames);
    if (base == n.capacity_pages()) continue;  // fragmented, no fresh range
    Pfn pfn = make_pfn(id, base);
    if (frames > 1) block_sizes_[pfn] = static_cast<std::uint32_t>(frames);
    return AllocOutcome{pfn, id, slow ? AllocPath::Slow : AllocPath::Fast,
                        slow ? slow_lat_ : fast_lat_};
  }
  return std::nullopt;
}

void Topology::free_page(Pfn pfn) {
  check_pfn(pfn);
  NodeId id = pfn_node(pfn);
  std::uint64_t base = pfn_index(pfn);
  if (!nodes_[id].allocated_[base])
    throw InvalidOperation("free of frame not allocated");
  std::uint32_t frames = 1;
  if (auto it = block_sizes_.find(pfn); it != block_sizes_.end()) {
    frames = it->second;
    block_sizes_.erase(it);
  }
  nodes_[id].give_back(base, frames);
}

NodeId Topology::node_of(Pfn pfn) const {
  check_pfn(pfn);
  return pfn_node(pfn);
}

bool Topology::is_allocated(Pfn pfn) const {
  if (pfn == kNullPfn) return false;
  std::uint64_t raw = pfn >> kPfnNodeShift;
  if (raw == 0 || raw > nodes_.size()) return false;
  std::uint64_t idx = pfn_index(pfn);
  const NumaNode& n = nodes_[pfn_node(pfn)];
  return idx < n.capacity_pages() && n.allocated_[idx];
}

void Topology::check_pfn(Pfn pfn) const {
  if (!is_allocated(pfn))
    throw InvalidOperation("frame is not a live allocation");
}

bool Topology::any_dram_above_low_watermark() const {
  for (const auto& n : nodes_)
    if (n.tier() == Tier::Dram && n.free_pages() > n.low_watermark())
      return true;
  return false;
}

std::vector<NodeId> Topology::dram_nodes() const {
  std::vector<NodeId> out;
  for (const auto& n : nodes_)
    if (n.tier() == Tier::Dram) out.push_back(n.id());
  return out;
}

std::vector<NodeId> Topology::nvmm_nodes() const {
  std::vector<NodeId> out;
  for (const auto& n : nodes_)
    if (n.tier() == Tier::Nvmm) out.push_back(n.id());
  return out;
}

std::vector<NodeId> Topology::tier_by_distance(NodeId from, Tier tier) const {
  std::vector<NodeId> out;
  for (const auto& n : nodes_)
    if (n.tier() == tier) out.push_back(n.id());
  std::sort(out.begin(), out.end(), [&](NodeId a, NodeId b) {
    if (distance_[from][a] != distance_[from][b])
      return distance_[from][a] < distance_[from][b];
    return a < b;
  });
  return out;
}

NodeId Topology::local_node_of_cpu(CpuId cpu) const {
  if (cpu >= cpu_to_node_.size())
    throw InvalidOperation("cpu id out of range");
  return cpu_to_node_[cpu];
}

}  // namespace tierpt
