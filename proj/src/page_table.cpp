#include "tierpt/page_table.hpp"

#include <algorithm>

namespace tierpt {

VaIndices decompose(VirtAddr va) {
  if (va >> kVaBits)
    throw InvalidOperation("non-canonical virtual address");
  VaIndices ix;
  ix.i1 = static_cast<std::uint32_t>(va >> 39 & (kEntriesPerPage - 1));
  ix.i2 = static_cast<std::uint32_t>(va >> 30 & (kEntriesPerPage - 1));
  ix.i3 = static_cast<std::uint32_t>(va >> 21 & (kEntriesPerPage - 1));
  ix.i4 = static_cast<std::uint32_t>(va >> 12 & (kEntriesPerPage - 1));
  ix.offset = static_cast<std::uint32_t>(va & (kPageSize - 1));
  return ix;
}

VirtAddr compose(std::uint32_t i1, std::uint32_t i2, std::uint32_t i3,
                 std::uint32_t i4, std::uint32_t offset) {
  if (i1 >= kEntriesPerPage || i2 >= kEntriesPerPage ||
      i3 >= kEntriesPerPage || i4 >= kEntriesPerPage || offset >= kPageSize)
    throw InvalidOperation("compose: component out of range");
  return static_cast<VirtAddr>(i1) << 39 | static_cast<VirtAddr>(i2) << 30 |
         static_cast<VirtAddr>(i3) << 21 | static_cast<VirtAddr>(i4) << 12 |
         offset;
}

void ReverseMap::insert(Pfn frame, ProcessId pid, VirtAddr va) {
  auto [it, fresh] = map_.try_emplace(frame, Mapping{pid, va});
  if (!fresh) throw InvalidOperation("reverse map: frame already present");
  (void)it;
}

void ReverseMap::erase(Pfn frame) {
  if (map_.erase(frame) == 0)
    throw InvalidOperation("reverse map: frame not present");
}

std::optional<ReverseMap::Mapping> ReverseMap::find(Pfn frame) const {
  auto it = map_.find(frame);
  if (it == map_.end()) return std::nullopt;
  return it->second;
}

std::vector<Pfn> ReverseMap::sorted_frames() const {
  std::vector<Pfn> out;
  out.reserve(map_.size());
  for (const auto& [pfn, m] : map_) out.push_back(pfn);
  std::sort(out.begin(), out.end());
  return out;
}

static std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) {
  return (a + b - 1) / b;
}

PtSizeEstimate pt_size_estimate(std::uint64_t footprint_bytes,
                                PageSizeMode mode) {
  PtSizeEstimate e{1, 0, 0, 0};
  if (mode == PageSizeMode::Base4K) {
    std::uint64_t data_pages = ceil_div(footprint_bytes, kPageSize);
    e.l4_pages = ceil_div(data_pages, kEntriesPerPage);
    e.l3_pages = ceil_div(e.l4_pages, kEntriesPerPage);
    e.l2_pages = ceil_div(e.l3_pages, kEntriesPerPage);
  } else {
    std::uint64_t regions = ceil_div(footprint_bytes, kHugePageSize);
    e.l4_pages = 0;
    e.l3_pages = ceil_div(regions, kEntriesPerPage);
    e.l2_pages = ceil_div(e.l3_pages, kEntriesPerPage);
  }
  return e;
}

PageTable::PageTable(ProcessId pid, PageSizeMode mode, DataPolicy data_policy,
                     PtPolicy pt_policy, Topology& topo, ReverseMap& rmap,
                     NodeId root_local_node)
    : pid_(pid),
      mode_(mode),
      data_policy_(data_policy),
      pt_policy_(pt_policy),
      topo_(topo),
      rmap_(rmap) {
  auto cands = topo_.select_node(PageKind::table(PtLevel::L1), data_policy_,
                                 pt_policy_, root_local_node, cursor_);
  auto out = topo_.alloc_page(cands);
  if (!out) throw SimError("out of memory allocating page table root");
  root_ = out->pfn;
  pages_.emplace(root_, PtPage{root_, PtLevel::L1, out->node, {}, 0, 0});
}

PageTable::~PageTable() {
  if (alive()) teardown();
}

PageTable::DescendHit PageTable::descend(VirtAddr va) const {
  VaIndices ix = decompose(va);
  DescendHit hit;
  auto* self = const_cast<PageTable*>(this);
  PtPage* cur = self->page(root_);
  hit.chain[0] = cur;
  hit.depth = 1;
  const std::uint32_t idx[3] = {ix.i1, ix.i2, ix.i3};
  for (int d = 0; d < leaf_depth() - 1; ++d) {
    Pfn next = cur->entries[idx[d]];
    if (next == kNullPfn) return hit;
    cur = self->page(next);
    hit.chain[hit.depth++] = cur;
  }
  return hit;
}

MapResult PageTable::map(VirtAddr va, NodeId local_node) {
  if (!alive()) throw InvalidOperation("map on torn-down page table");
  VaIndices ix = decompose(va);
  const std::uint32_t idx[3] = {ix.i1, ix.i2, ix.i3};
  MapOutcome out;
  PtPage* cur = page(root_);
  for (int d = 1; d < leaf_depth(); ++d) {
    Pfn next = cur->entries[idx[d - 1]];
    if (next == kNullPfn) {
      auto level = static_cast<PtLevel>(d + 1);
      auto cands = topo_.select_node(PageKind::table(level), data_policy_,
                                     pt_policy_, local_node, cursor_);
      auto alloc = topo_.alloc_page(cands);
      if (!alloc) return {std::nullopt, MapError{true, level}};
      pages_.emplace(alloc->pfn,
                     PtPage{alloc->pfn, level, alloc->node, {}, 0, 0});
      cur->entries[idx[d - 1]] = alloc->pfn;
      cur->present_count++;
      out.new_tables[out.new_table_count++] = {level, alloc->node};
      out.alloc_latency += alloc->latency;
      out.slow_path |= alloc->path == AllocPath::Slow;
      next = alloc->pfn;
    }
    cur = page(next);
  }

  std::uint32_t slot = leaf_index(ix);
  if (cur->entries[slot] != kNullPfn)
    throw InvalidOperation("map: address already mapped");
  std::uint64_t frames = mode_ == PageSizeMode::Base4K ? 1 : kFramesPerHugePage;
  auto cands = topo_.select_node(PageKind::data(), data_policy_, pt_policy_,
                                 local_node, cursor_);
  auto alloc = topo_.alloc_page(cands, frames);
  if (!alloc) return {std::nullopt, MapError{false, PtLevel::L4}};
  cur->entries[slot] = alloc->pfn;
  cur->present_count++;
  if (topo_.node(alloc->node).tier() == Tier::Dram) cur->dram_child_count++;
  out.alloc_latency += alloc->latency;
  out.slow_path |= alloc->path == AllocPath::Slow;
  out.data_pfn = alloc->pfn;
  VirtAddr page_va =
      va & ~((mode_ == PageSizeMode::Base4K ? kPageSize : kHugePageSize) - 1);
  rmap_.insert(alloc->pfn, pid_, page_va);
  mapped_data_pages_++;
  return {out, {}};
}

Pfn PageTable::unmap(VirtAddr va) {
  DescendHit hit = descend(va);
  VaIndices ix = decompose(va);
  if (hit.depth < leaf_depth())
    throw InvalidOperation("unmap: address not mapped");
  PtPage* leaf = hit.chain[hit.depth - 1];
  std::uint32_t slot = leaf_index(ix);
  Pfn data = leaf->entries[slot];
  if (data == kNullPfn) throw InvalidOperation("unmap: address not mapped");
  if (topo_.tier_of(data) == Tier::Dram) leaf->dram_child_count--;
  leaf->entries[slot] = kNullPfn;
  leaf->present_count--;
  rmap_.erase(data);
  topo_.free_page(data);
  mapped_data_pages_--;
  return data;
}

std::optional<WalkResult> PageTable::try_walk(VirtAddr va) const {
  DescendHit hit = descend(va);
  if (hit.depth < leaf_depth()) return std::nullopt;
  VaIndices ix = decompose(va);
  const PtPage* leaf = hit.chain[hit.depth - 1];
  Pfn data = leaf->entries[leaf_index(ix)];
  if (data == kNullPfn) return std::nullopt;
  WalkResult r;
  r.data_pfn = data;
  r.offset = mode_ == PageSizeMode::Base4K ? ix.offset
                                           : (ix.i4 << kPageShift | ix.offset);
  for (int d = 0; d < hit.depth; ++d) {
    const PtPage* p = hit.chain[d];
    r.touched[r.touched_count++] = {p->level, p->node, p->pfn};
  }
  return r;
}

WalkResult PageTable::walk_sw(VirtAddr va) const {
  auto r = try_walk(va);
  if (!r) throw InvalidOperation("walk: address not mapped");
  return *r;
}

PageTable::LeafRef PageTable::pt_entries_of(Pfn data_pfn) {
  auto m = rmap_.find(data_pfn);
  if (!m || m->pid != pid_)
    throw InvalidOperation("pt_entries_of: frame not mapped by this process");
  VaIndices ix = decompose(m->va);
  DescendHit hit = descend(m->va);
  if (hit.depth < leaf_depth())
    throw InvalidOperation("pt_entries_of: stale reverse mapping");
  PtPage* leaf = hit.chain[hit.depth - 1];
  PtPage* parent = hit.chain[hit.depth - 2];
  std::uint32_t slot = leaf_index(ix);
  if (leaf->entries[slot] != data_pfn)
    throw InvalidOperation("pt_entries_of: stale reverse mapping");
  std::uint32_t parent_slot = mode_ == PageSizeMode::Base4K ? ix.i3 : ix.i2;
  return {leaf, parent, slot, parent_slot, m->va};
}

Pfn PageTable::lock_target_for(VirtAddr va) const {
  DescendHit hit = descend(va);
  if (hit.depth >= leaf_depth()) return hit.chain[leaf_depth() - 1]->pfn;
  // A fault here would insert a fresh L4 into an existing L3, which leaf
  // migration locks as the parent. Intermediate levels above that are never
  // locked, so a missing L3 (or any huge-mapping ancestor) cannot conflict.
  if (mode_ == PageSizeMode::Base4K && hit.depth == 3)
    return hit.chain[2]->pfn;
  return kNullPfn;
}

PtPage* PageTable::page(Pfn table_pfn) {
  auto it = pages_.find(table_pfn);
  return it == pages_.end() ? nullptr : &it->second;
}

const PtPage* PageTable::page(Pfn table_pfn) const {
  auto it = pages_.find(table_pfn);
  return it == pages_.end() ? nullptr : &it->second;
}

PtDistribution PageTable::distribution() const {
  PtDistribution dist;
  for (const auto& [pfn, p] : pages_)
    dist[{static_cast<int>(p.level), p.node}]++;
  return dist;
}

std::pair<std::uint64_t, std::uint64_t> PageTable::data_tier_counts() const {
  std::uint64_t dram = 0, nvmm = 0;
  for (const auto& [pfn, p] : pages_) {
    if (static_cast<int>(p.level) != leaf_depth()) continue;
    for (Pfn data : p.entries) {
      if (data == kNullPfn) continue;
      (topo_.tier_of(data) == Tier::Dram ? dram : nvmm)++;
    }
  }
  return {dram, nvmm};
}

std::vector<Pfn> PageTable::table_pfns(std::optional<PtLevel> level) const {
  std::vector<Pfn> out;
  for (const auto& [pfn, p] : pages_)
    if (!level || p.level == *level) out.push_back(pfn);
  std::sort(out.begin(), out.end());
  return out;
}

PtPage* PageTable::replace_leaf_table(Pfn old_pfn, Pfn parent_pfn,
                                      std::uint32_t parent_index, Pfn new_pfn,
                                      NodeId new_node) {
  PtPage* old_page = page(old_pfn);
  PtPage* parent = page(parent_pfn);
  if (!old_page || !parent || parent->entries[parent_index] != old_pfn)
    throw InvalidOperation("replace_leaf_table: inconsistent arguments");
  PtPage copy = *old_page;
  copy.pfn = new_pfn;
  copy.node = new_node;
  pages_.erase(old_pfn);
  auto [it, fresh] = pages_.emplace(new_pfn, copy);
  if (!fresh) throw InvalidOperation("replace_leaf_table: frame in use");
  parent->entries[parent_index] = new_pfn;
  topo_.free_page(old_pfn);
  return &it->second;
}

void PageTable::rebind_data(VirtAddr va, Pfn old_pfn, Pfn new_pfn) {
  DescendHit hit = descend(va);
  VaIndices ix = decompose(va);
  if (hit.depth < leaf_depth())
    throw InvalidOperation("rebind_data: address not mapped");
  PtPage* leaf = hit.chain[hit.depth - 1];
  std::uint32_t slot = leaf_index(ix);
  if (leaf->entries[slot] != old_pfn)
    throw InvalidOperation("rebind_data: entry does not match old frame");
  if (topo_.tier_of(old_pfn) == Tier::Dram) leaf->dram_child_count--;
  leaf->entries[slot] = new_pfn;
  if (topo_.tier_of(new_pfn) == Tier::Dram) leaf->dram_child_count++;
  rmap_.erase(old_pfn);
  rmap_.insert(new_pfn, pid_, va);
}

void PageTable::teardown() {
  if (!alive()) throw InvalidOperation("teardown: already torn down");
  // Freed in sorted order so the allocator free lists end up in a state
  // that does not depend on hash iteration order.
  std::vector<Pfn> tables = table_pfns();
  for (Pfn pfn : tables) {
    PtPage& p = *page(pfn);
    if (static_cast<int>(p.level) != leaf_depth()) continue;
    for (Pfn data : p.entries) {
      if (data == kNullPfn) continue;
      rmap_.erase(data);
      topo_.free_page(data);
    }
  }
  for (Pfn pfn : tables) topo_.free_page(pfn);
  pages_.clear();
  mapped_data_pages_ = 0;
  root_ = kNullPfn;
}

}  // namespace tierpt
