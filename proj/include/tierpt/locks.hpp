#pragma once

#include <algorithm>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "tierpt/types.hpp"

namespace tierpt {

using AgentId = std::int32_t;
inline constexpr AgentId kNoAgent = -1;

// Per-frame try-locks with waiter lists, keyed by table page pfn. Purely a
// bookkeeping structure: blocking and waking is the scheduler's job.
class LockTable {
 public:
  bool try_lock(Pfn pfn, AgentId agent) {
    auto [it, fresh] = table_.try_emplace(pfn, Entry{agent, {}});
    return fresh;
  }

  // Releases the lock and hands back everyone who was waiting on it.
  std::vector<AgentId> unlock(Pfn pfn, AgentId agent) {
    auto it = table_.find(pfn);
    if (it == table_.end() || it->second.holder != agent)
      throw InvalidOperation("unlock of lock not held by this agent");
    std::vector<AgentId> woken = std::move(it->second.waiters);
    table_.erase(it);
    return woken;
  }

  void wait_on(Pfn pfn, AgentId agent) {
    auto it = table_.find(pfn);
    if (it == table_.end())
      throw InvalidOperation("wait on unlocked frame");
    it->second.waiters.push_back(agent);
  }

  bool is_locked(Pfn pfn) const { return table_.count(pfn) != 0; }

  bool held_by(Pfn pfn, AgentId agent) const {
    auto it = table_.find(pfn);
    return it != table_.end() && it->second.holder == agent;
  }

  std::size_t locked_count() const { return table_.size(); }

  std::vector<Pfn> locked_pfns() const {
    std::vector<Pfn> out;
    out.reserve(table_.size());
    for (const auto& [pfn, e] : table_) out.push_back(pfn);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  struct Entry {
    AgentId holder;
    std::vector<AgentId> waiters;
  };
  std::unordered_map<Pfn, Entry> table_;
};

}  // namespace tierpt
