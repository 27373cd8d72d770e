#pragma once

#include <cstdint>
#include <list>
#include <optional>
#include <unordered_map>

#include "tierpt/page_table.hpp"
#include "tierpt/topology.hpp"
#include "tierpt/types.hpp"

namespace tierpt {

struct MmuConfig {
  std::uint32_t tlb_entries = 1536;
  std::uint32_t pwc_entries = 64;
  bool pwc_enabled = true;
  // Share of the raw walk latency charged as pipeline stall.
  double stall_fraction = 1.0;
};

// Fully associative LRU map, the shape both the TLB and the walk cache use.
template <typename K, typename V>
class LruCache {
 public:
  explicit LruCache(std::size_t capacity) : capacity_(capacity) {}

  std::optional<V> lookup(const K& key) {
    auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    order_.splice(order_.begin(), order_, it->second);
    return it->second->second;
  }

  void insert(const K& key, const V& value) {
    if (capacity_ == 0) return;
    auto it = index_.find(key);
    if (it != index_.end()) {
      it->second->second = value;
      order_.splice(order_.begin(), order_, it->second);
      return;
    }
    if (order_.size() == capacity_) {
      index_.erase(order_.back().first);
      order_.pop_back();
    }
    order_.emplace_front(key, value);
    index_[key] = order_.begin();
  }

  void flush() {
    order_.clear();
    index_.clear();
  }

  std::size_t size() const { return order_.size(); }
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::list<std::pair<K, V>> order_;
  std::unordered_map<K, typename std::list<std::pair<K, V>>::iterator> index_;
};

struct AccessOutcome {
  bool tlb_hit = false;
  Pfn data_pfn = kNullPfn;
  Cycles walk_cycles = 0;      // reads of non-cached table levels
  Cycles data_cycles = 0;      // the access itself
  Cycles stall_cycles = 0;     // data + rounded-up walk share
  // Levels actually read on a miss (cache-skipped ones excluded).
  std::array<LevelTouch, 4> walk_levels{};
  std::uint32_t walk_level_count = 0;
};

// One per simulated CPU. Translation caches only; cycle counters live with
// the process accounting.
class Mmu {
 public:
  explicit Mmu(const MmuConfig& cfg);

  // Translates and costs one access. Returns nullopt when the address is not
  // mapped; the caches are left untouched in that case.
  std::optional<AccessOutcome> access(const PageTable& pt,
                                      const Topology& topo, VirtAddr va,
                                      bool is_write);

  void flush();  // drops TLB and walk cache contents
  std::size_t tlb_size() const { return tlb_.size(); }
  std::size_t pwc_size() const { return pwc_.size(); }

 private:
  static std::uint64_t pwc_key(PtLevel level, ProcessId pid, VirtAddr va);

  MmuConfig cfg_;
  // Keys carry the pid so that two processes time-sharing a CPU cannot
  // alias each other's translations.
  LruCache<std::uint64_t, Pfn> tlb_;   // (pid, vpn) -> data frame
  LruCache<std::uint64_t, Pfn> pwc_;   // (pid, level, va prefix) -> table frame
};

// Misses per kilo-instruction.
double mpki(std::uint64_t misses, std::uint64_t instructions);

}  // namespace tierpt
