#include "tierpt/mmu.hpp"

#include <cmath>

namespace tierpt {

Mmu::Mmu(const MmuConfig& cfg)
    : cfg_(cfg),
      tlb_(cfg.tlb_entries),
      pwc_(cfg.pwc_enabled ? cfg.pwc_entries : 0) {}

std::uint64_t Mmu::pwc_key(PtLevel level, ProcessId pid, VirtAddr va) {
  int shift;
  switch (level) {
    case PtLevel::L1: shift = 39; break;
    case PtLevel::L2: shift = 30; break;
    default: shift = 21; break;
  }
  return static_cast<std::uint64_t>(level) << 56 |
         static_cast<std::uint64_t>(pid) << 40 | va >> shift;
}

std::optional<AccessOutcome> Mmu::access(const PageTable& pt,
                                         const Topology& topo, VirtAddr va,
                                         bool is_write) {
  AccessOutcome out;
  int page_shift =
      pt.mode() == PageSizeMode::Base4K ? kPageShift : kHugePageShift;
  std::uint64_t vpn = static_cast<std::uint64_t>(pt.pid() + 1) << 40 |
                      va >> page_shift;

  auto latency_of = [&](Pfn frame, bool write) {
    const NumaNode& n = topo.node(pfn_node(frame));
    return write ? n.write_latency() : n.read_latency();
  };

  if (auto cached = tlb_.lookup(vpn)) {
    out.tlb_hit = true;
    out.data_pfn = *cached;
    out.data_cycles = latency_of(*cached, is_write);
    out.stall_cycles = out.data_cycles;
    return out;
  }

  auto walk = pt.try_walk(va);
  if (!walk) return std::nullopt;

  // Deepest cached prefix decides where the hardware walk starts. The leaf
  // level itself is never cached; its job is done by the TLB.
  int leaf = static_cast<int>(walk->touched_count);  // 4 or 3
  int start = 0;                                     // index into touched
  for (int lvl = leaf - 1; lvl >= 1; --lvl) {
    if (pwc_.lookup(pwc_key(static_cast<PtLevel>(lvl), pt.pid(), va))) {
      start = lvl;
      break;
    }
  }
  for (int d = start; d < leaf; ++d) {
    const LevelTouch& t = walk->touched[d];
    out.walk_cycles += topo.node(t.node).read_latency();
    out.walk_levels[out.walk_level_count++] = t;
  }
  for (int d = 0; d + 1 < leaf; ++d)
    pwc_.insert(pwc_key(walk->touched[d].level, pt.pid(), va),
                walk->touched[d + 1].frame);
  tlb_.insert(vpn, walk->data_pfn);

  out.data_pfn = walk->data_pfn;
  out.data_cycles = latency_of(walk->data_pfn, is_write);
  out.stall_cycles =
      out.data_cycles +
      static_cast<Cycles>(std::ceil(static_cast<double>(out.walk_cycles) *
                                    cfg_.stall_fraction));
  return out;
}

void Mmu::flush() {
  tlb_.flush();
  pwc_.flush();
}

double mpki(std::uint64_t misses, std::uint64_t instructions) {
  if (instructions == 0)
    throw InvalidOperation("mpki: zero instruction count");
  return 1000.0 * static_cast<double>(misses) /
         static_cast<double>(instructions);
}

}  // namespace tierpt
