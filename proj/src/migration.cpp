#include "tierpt/migration.hpp"

#include <algorithm>

namespace tierpt {

const char* to_string(DataOutcome o) {
  switch (o) {
    case DataOutcome::Success: return "success";
    case DataOutcome::NotMapped: return "not_mapped";
    case DataOutcome::AlreadyThere: return "already_there";
    case DataOutcome::OutOfMemory: return "out_of_memory";
    case DataOutcome::Busy: return "busy";
  }
  return "?";
}

const char* to_string(L4Outcome o) {
  switch (o) {
    case L4Outcome::Success: return "success";
    case L4Outcome::AlreadyInDestination: return "already_in_destination";
    case L4Outcome::SameTierSkip: return "same_tier_skip";
    case L4Outcome::DramGuardSkip: return "dram_guard_skip";
    case L4Outcome::TrylockSkip: return "trylock_skip";
    case L4Outcome::NoMemSkip: return "nomem_skip";
  }
  return "?";
}

void MigrationEnv::unlock(Pfn pfn, AgentId agent) {
  auto woken = locks.unlock(pfn, agent);
  if (wake && !woken.empty()) wake(std::move(woken));
}

MigrationTask MigrationTask::data_task(Pfn frame, NodeId dest, AgentId agent) {
  MigrationTask t;
  t.phase_ = Phase::DataAcquire;
  t.frame_ = frame;
  t.dest_ = dest;
  t.agent_ = agent;
  return t;
}

MigrationTask MigrationTask::leaf_task(Pfn mapped_child_frame, AgentId agent) {
  MigrationTask t;
  t.phase_ = Phase::LeafAcquire;
  t.frame_ = mapped_child_frame;
  t.agent_ = agent;
  t.leaf_only_ = true;
  return t;
}

MigrationTask::StepResult MigrationTask::finish_data(DataOutcome o) {
  data_outcome_ = o;
  phase_ = Phase::Finished;
  return StepResult::Done;
}

bool MigrationTask::still_mapped(const MigrationEnv& env) const {
  auto m = env.rmap.find(frame_);
  return m && m->pid == pid_ && m->va == va_;
}

// The owner died mid-flight (OOM kill tears tables down without waiting on
// page locks). Drop the staged frame, release the lock and end the task.
MigrationTask::StepResult MigrationTask::abort_data(MigrationEnv& env) {
  if (staged_ != kNullPfn) {
    env.topo.free_page(staged_);
    staged_ = kNullPfn;
  }
  env.unlock(leaf_pfn_, agent_);
  env.stats.data_skipped_unmapped++;
  return finish_data(DataOutcome::NotMapped);
}

MigrationTask::StepResult MigrationTask::abort_leaf(MigrationEnv& env) {
  if (staged_ != kNullPfn) {
    env.topo.free_page(staged_);
    staged_ = kNullPfn;
  }
  if (l4_locked_) {
    env.unlock(leaf_pfn_, agent_);
    l4_locked_ = false;
  }
  if (l3_locked_) {
    env.unlock(parent_pfn_, agent_);
    l3_locked_ = false;
  }
  env.stats.l4_aborted++;
  phase_ = Phase::Finished;
  return StepResult::Done;
}

MigrationTask::StepResult MigrationTask::finish_leaf(MigrationEnv& env,
                                                     L4Outcome o) {
  switch (o) {
    case L4Outcome::Success: env.stats.l4_success++; break;
    case L4Outcome::AlreadyInDestination:
      env.stats.l4_already_in_destination++;
      break;
    case L4Outcome::SameTierSkip: env.stats.l4_same_tier_skip++; break;
    case L4Outcome::DramGuardSkip: env.stats.l4_dram_guard_skip++; break;
    case L4Outcome::TrylockSkip: env.stats.l4_trylock_skip++; break;
    case L4Outcome::NoMemSkip: env.stats.l4_nomem_skip++; break;
  }
  leaf_outcome_ = o;
  phase_ = Phase::Finished;
  return StepResult::Done;
}

MigrationTask::StepResult MigrationTask::step(MigrationEnv& env) {
  switch (phase_) {
    case Phase::DataAcquire: {
      auto m = env.rmap.find(frame_);
      if (!m) {
        env.stats.data_skipped_unmapped++;
        return finish_data(DataOutcome::NotMapped);
      }
      PageTable* pt = env.pt_of(m->pid);
      if (!pt || !pt->alive()) {
        env.stats.data_skipped_unmapped++;
        return finish_data(DataOutcome::NotMapped);
      }
      if (env.topo.node_of(frame_) == dest_) {
        env.stats.data_already_at_dest++;
        return finish_data(DataOutcome::AlreadyThere);
      }
      auto ref = pt->pt_entries_of(frame_);
      if (!env.locks.try_lock(ref.leaf->pfn, agent_)) {
        env.stats.data_busy++;
        return finish_data(DataOutcome::Busy);
      }
      pid_ = m->pid;
      va_ = ref.va;
      leaf_pfn_ = ref.leaf->pfn;
      parent_pfn_ = ref.parent->pfn;
      parent_index_ = ref.parent_index;
      frames_ = pt->mode() == PageSizeMode::Base4K ? 1 : kFramesPerHugePage;
      phase_ = Phase::DataAlloc;
      return StepResult::Running;
    }

    case Phase::DataAlloc: {
      CandidateList c;
      c.push(dest_);
      auto out = env.topo.alloc_page(c, frames_);
      if (!out) {
        env.unlock(leaf_pfn_, agent_);
        env.stats.data_oom++;
        return finish_data(DataOutcome::OutOfMemory);
      }
      staged_ = out->pfn;
      staged_node_ = out->node;
      phase_ = Phase::DataCopy;
      return StepResult::Running;
    }

    case Phase::DataCopy: {
      if (!still_mapped(env)) return abort_data(env);
      const NumaNode& src = env.topo.node(env.topo.node_of(frame_));
      const NumaNode& dst = env.topo.node(staged_node_);
      env.charge_stall(pid_,
                       frames_ * (src.read_latency() + dst.write_latency()));
      phase_ = Phase::DataCommit;
      return StepResult::Running;
    }

    case Phase::DataCommit: {
      if (!still_mapped(env)) return abort_data(env);
      // One indivisible step: no translation may observe the old frame once
      // it is gone, and the flush is global, so everything happens together.
      bool was_dram = env.topo.tier_of(frame_) == Tier::Dram;
      bool now_dram =
          env.topo.node(staged_node_).tier() == Tier::Dram;
      env.flush_all_mmus();
      PageTable* pt = env.pt_of(pid_);
      pt->rebind_data(va_, frame_, staged_);
      env.topo.free_page(frame_);
      frame_ = staged_;
      staged_ = kNullPfn;
      env.stats.data_migrations++;
      if (!was_dram && now_dram) env.stats.promotions++;
      if (was_dram && !now_dram) env.stats.demotions++;
      phase_ = Phase::DataUnlock;
      return StepResult::Running;
    }

    case Phase::DataUnlock: {
      env.unlock(leaf_pfn_, agent_);
      data_outcome_ = DataOutcome::Success;
      PageTable* pt = env.pt_of(pid_);
      if (env.pte_migration_enabled && pt &&
          pt->mode() == PageSizeMode::Base4K) {
        phase_ = Phase::LeafAcquire;
        return StepResult::Running;
      }
      phase_ = Phase::Finished;
      return StepResult::Done;
    }

    case Phase::LeafAcquire: {
      if (leaf_only_) env.stats.l4_drain_invocations++;
      // The data-side lock is gone, so the world may have moved on; resolve
      // everything afresh and walk the skip ladder in order.
      auto m = env.rmap.find(frame_);
      PageTable* pt = m ? env.pt_of(m->pid) : nullptr;
      if (!pt || !pt->alive()) {
        env.stats.l4_aborted++;
        phase_ = Phase::Finished;
        return StepResult::Done;
      }
      auto ref = pt->pt_entries_of(frame_);
      pid_ = m->pid;
      va_ = ref.va;
      leaf_pfn_ = ref.leaf->pfn;
      parent_pfn_ = ref.parent->pfn;
      parent_index_ = ref.parent_index;
      dest_ = env.topo.node_of(frame_);
      NodeId leaf_node = ref.leaf->node;
      Tier dest_tier = env.topo.node(dest_).tier();
      if (leaf_node == dest_)
        return finish_leaf(env, L4Outcome::AlreadyInDestination);
      if (env.topo.node(leaf_node).tier() == dest_tier)
        return finish_leaf(env, L4Outcome::SameTierSkip);
      if (dest_tier == Tier::Nvmm && ref.leaf->dram_child_count > 0)
        return finish_leaf(env, L4Outcome::DramGuardSkip);
      if (env.require_l3_lock) {
        if (!env.locks.try_lock(parent_pfn_, agent_))
          return finish_leaf(env, L4Outcome::TrylockSkip);
        l3_locked_ = true;
      }
      if (!env.locks.try_lock(leaf_pfn_, agent_)) {
        if (l3_locked_) {
          env.unlock(parent_pfn_, agent_);
          l3_locked_ = false;
        }
        return finish_leaf(env, L4Outcome::TrylockSkip);
      }
      l4_locked_ = true;
      phase_ = Phase::LeafAlloc;
      return StepResult::Running;
    }

    case Phase::LeafAlloc: {
      PageTable* pt = env.pt_of(pid_);
      if (!pt) return abort_leaf(env);
      bool allowed = !(pt->pt_policy() == PtPolicy::BindAll &&
                       env.topo.node(dest_).tier() != Tier::Dram);
      std::optional<AllocOutcome> out;
      if (allowed) {
        CandidateList c;
        c.push(dest_);
        out = env.topo.alloc_page(c);
      }
      if (!out) {
        env.unlock(leaf_pfn_, agent_);
        l4_locked_ = false;
        if (l3_locked_) {
          env.unlock(parent_pfn_, agent_);
          l3_locked_ = false;
        }
        return finish_leaf(env, L4Outcome::NoMemSkip);
      }
      staged_ = out->pfn;
      staged_node_ = out->node;
      phase_ = Phase::LeafCommit;
      return StepResult::Running;
    }

    case Phase::LeafCommit: {
      PageTable* pt = env.pt_of(pid_);
      if (!pt || !pt->page(leaf_pfn_)) return abort_leaf(env);
      const NumaNode& src = env.topo.node(env.topo.node_of(leaf_pfn_));
      const NumaNode& dst = env.topo.node(staged_node_);
      env.charge_stall(pid_, src.read_latency() + dst.write_latency());
      env.flush_all_mmus();
      pt->replace_leaf_table(leaf_pfn_, parent_pfn_, parent_index_, staged_,
                             staged_node_);
      env.unlock(leaf_pfn_, agent_);  // token still keyed by the old frame
      l4_locked_ = false;
      if (l3_locked_) {
        env.unlock(parent_pfn_, agent_);
        l3_locked_ = false;
      }
      staged_ = kNullPfn;
      return finish_leaf(env, L4Outcome::Success);
    }

    case Phase::Finished:
      throw InvalidOperation("step on finished migration task");
  }
  throw InvalidOperation("unreachable");
}

void run_to_completion(MigrationTask& task, MigrationEnv& env) {
  while (task.step(env) == MigrationTask::StepResult::Running) {
  }
}

std::vector<MovePageResult> move_pages(MigrationEnv& env, ProcessId pid,
                                       std::span<const VirtAddr> vas,
                                       NodeId dest, AgentId agent) {
  std::vector<MovePageResult> results;
  results.reserve(vas.size());
  for (VirtAddr va : vas) {
    PageTable* pt = env.pt_of(pid);
    if (!pt || !pt->alive()) {
      results.push_back({va, DataOutcome::NotMapped, {}});
      continue;
    }
    auto walk = pt->try_walk(va);
    if (!walk) {
      results.push_back({va, DataOutcome::NotMapped, {}});
      continue;
    }
    auto task = MigrationTask::data_task(walk->data_pfn, dest, agent);
    run_to_completion(task, env);
    results.push_back({va, *task.data_outcome(), task.leaf_outcome()});
  }
  return results;
}

HotnessTracker::HotnessTracker(std::uint32_t cpu_count,
                               const HotnessConfig& cfg)
    : cfg_(cfg), cpu_count_(cpu_count) {}

void HotnessTracker::record_access(Pfn frame, CpuId cpu) {
  FrameCounts& c = counts_[frame];
  if (c.per_cpu.empty()) c.per_cpu.resize(cpu_count_, 0);
  c.total++;
  c.per_cpu.at(cpu)++;
}

void HotnessTracker::epoch_reset() { counts_.clear(); }

std::uint64_t HotnessTracker::count_of(Pfn frame) const {
  auto it = counts_.find(frame);
  return it == counts_.end() ? 0 : it->second.total;
}

std::vector<HotnessTracker::Hint> HotnessTracker::promotion_hints(
    const Topology& topo, const ReverseMap& rmap) const {
  if (!topo.any_dram_above_low_watermark()) return {};
  struct Cand {
    std::uint64_t count;
    Pfn frame;
    NodeId dest;
  };
  std::vector<Cand> cands;
  for (const auto& [frame, c] : counts_) {
    if (c.total < cfg_.hot_threshold) continue;
    if (!rmap.find(frame)) continue;
    if (topo.tier_of(frame) != Tier::Nvmm) continue;
    CpuId top = 0;
    for (CpuId cpu = 1; cpu < c.per_cpu.size(); ++cpu)
      if (c.per_cpu[cpu] > c.per_cpu[top]) top = cpu;
    cands.push_back({c.total, frame, topo.local_node_of_cpu(top)});
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.frame < b.frame;
  });
  if (cands.size() > cfg_.promotion_budget)
    cands.resize(cfg_.promotion_budget);
  std::vector<Hint> hints;
  hints.reserve(cands.size());
  for (const Cand& c : cands) hints.push_back({c.frame, c.dest});
  return hints;
}

std::vector<Pfn> HotnessTracker::cold_dram_frames(
    const Topology& topo, const ReverseMap& rmap,
    std::uint64_t max_frames) const {
  struct Cand {
    std::uint64_t count;
    Pfn frame;
  };
  std::vector<Cand> cands;
  for (Pfn frame : rmap.sorted_frames())
    if (topo.tier_of(frame) == Tier::Dram)
      cands.push_back({count_of(frame), frame});
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.count != b.count) return a.count < b.count;
    return a.frame < b.frame;
  });
  if (cands.size() > max_frames) cands.resize(max_frames);
  std::vector<Pfn> out;
  out.reserve(cands.size());
  for (const Cand& c : cands) out.push_back(c.frame);
  return out;
}

std::uint64_t demote_cold_pages(MigrationEnv& env, const HotnessTracker* hot,
                                std::uint64_t max_pages, AgentId agent) {
  std::vector<Pfn> victims;
  if (hot) {
    victims = hot->cold_dram_frames(env.topo, env.rmap, max_pages);
  } else {
    for (Pfn frame : env.rmap.sorted_frames()) {
      if (env.topo.tier_of(frame) != Tier::Dram) continue;
      victims.push_back(frame);
      if (victims.size() == max_pages) break;
    }
  }
  std::uint64_t demoted = 0;
  for (Pfn v : victims) {
    auto m = env.rmap.find(v);
    if (!m) continue;
    PageTable* pt = env.pt_of(m->pid);
    if (!pt || !pt->alive()) continue;
    std::uint64_t frames =
        pt->mode() == PageSizeMode::Base4K ? 1 : kFramesPerHugePage;
    NodeId vnode = env.topo.node_of(v);
    NodeId dest = 0;
    bool found = false;
    for (NodeId n : env.topo.tier_by_distance(vnode, Tier::Nvmm)) {
      if (env.topo.node(n).can_provide(frames)) {
        dest = n;
        found = true;
        break;
      }
    }
    if (!found) break;  // every NVMM node is full: demotion cannot help
    auto task = MigrationTask::data_task(v, dest, agent);
    run_to_completion(task, env);
    if (task.data_outcome() == DataOutcome::Success) demoted++;
  }
  return demoted;
}

}  // namespace tierpt
