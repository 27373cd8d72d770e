// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
// the exit code is nonzero if any of them fail. Module-level criteria build
// their world by hand, the rest drive full Simulation runs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <iomanip>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tierpt/config.hpp"
#include "tierpt/engine.hpp"
#include "tierpt/migration.hpp"
#include "tierpt/mmu.hpp"
#include "tierpt/page_table.hpp"
#include "tierpt/report.hpp"
#include "tierpt/topology.hpp"
#include "tierpt/types.hpp"
#include "tierpt/workloads.hpp"

using namespace tierpt;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

template <typename... Args>
std::string cat(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

std::string pct(double fraction) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << fraction * 100.0 << '%';
  return os.str();
}

TopologyConfig desk_machine() {
  TopologyConfig tc;
  tc.nodes = default_nodes();
  return tc;
}

// Half a desk machine: 128 MiB of DRAM, 512 MiB of NVMM. Crowding scenarios
// reach their interesting phase in a few tens of thousands of operations.
TopologyConfig small_machine() {
  TopologyConfig tc;
  tc.nodes = {{0, Tier::Dram, 16384, 100, 100, 4},
              {1, Tier::Dram, 16384, 100, 100, 4},
              {2, Tier::Nvmm, 65536, 300, 300, 0},
              {3, Tier::Nvmm, 65536, 300, 300, 0}};
  return tc;
}

// 1. A dense terabyte needs exactly 2 GiB of leaf tables (4 KiB per 2 MiB),
// close to the ~1.9 GiB commonly reported for real machines of that size,
// and the upper levels stay negligible even at twice the footprint.
Outcome size_arithmetic() {
  auto one = pt_size_estimate(1ull << 40, PageSizeMode::Base4K);
  std::uint64_t leaf_bytes = one.l4_pages * kPageSize;
  double reported = 1.9 * static_cast<double>(1ull << 30);
  double off = std::abs(static_cast<double>(leaf_bytes) - reported) / reported;

  auto two = pt_size_estimate(2ull << 40, PageSizeMode::Base4K);
  double upper_share = static_cast<double>(two.upper_pages()) /
                       static_cast<double>(two.total_pages());

  bool ok = leaf_bytes == (2ull << 30) && off <= 0.10 && upper_share < 0.002;
  return {ok, cat("1 TiB leaf tables = ", leaf_bytes, " B (", pct(off),
                  " from 1.9 GiB); 2 TiB upper-level share = ",
                  pct(upper_share))};
}

// 2. Interleaved placement spreads table pages evenly across the tiers, so
// about half the paging structure ends up on NVMM while DRAM sits half empty.
Outcome interleave_split() {
  TopologyConfig tc;
  tc.nodes = {{0, Tier::Dram, 2097152, 100, 100, 4},
              {1, Tier::Dram, 2097152, 100, 100, 4},
              {2, Tier::Nvmm, 4194304, 300, 300, 0},
              {3, Tier::Nvmm, 4194304, 300, 300, 0}};
  Topology topo(tc);
  ReverseMap rmap;
  PageTable pt(0, PageSizeMode::Base4K, DataPolicy::Interleave,
               PtPolicy::FollowData, topo, rmap, 0);

  const std::uint64_t pages = 10240 * kEntriesPerPage;  // 20 GiB
  for (std::uint64_t p = 0; p < pages; ++p) {
    auto r = pt.map(p << kPageShift, 0);
    if (!r.ok) return {false, cat("map failed at page ", p)};
  }

  std::uint64_t dram_tables = 0, nvmm_tables = 0, leaves = 0;
  for (const auto& [key, count] : pt.distribution()) {
    (topo.node(key.second).tier() == Tier::Dram ? dram_tables : nvmm_tables) +=
        count;
    if (key.first == 4) leaves += count;
  }
  double share = static_cast<double>(nvmm_tables) /
                 static_cast<double>(dram_tables + nvmm_tables);
  std::uint64_t dram_free =
      std::min(topo.node(0).free_pages(), topo.node(1).free_pages());

  bool ok = leaves >= 10000 && share >= 0.48 && share <= 0.52 && dram_free > 0;
  return {ok, cat(leaves, " leaf tables, ", pct(share),
                  " of table pages on NVMM, min DRAM node free = ", dram_free,
                  " pages")};
}

// 3. With the upper levels bound to DRAM no walk can cost more than three
// DRAM reads plus one NVMM read; letting tables follow spilled data pushes a
// visible share of walks past that bound.
Outcome walk_bound() {
  const Cycles bound = 3 * 100 + 300;

  RunConfig cfg;
  cfg.seed = 3;
  cfg.scenario = ScenarioKind::Startup;
  cfg.topo = desk_machine();
  cfg.pt_policy = PtPolicy::BindHigh;
  cfg.workload.footprint_mib = 1536;  // three times the DRAM capacity
  cfg.mmu.pwc_enabled = false;
  cfg.autonuma.enabled = false;
  Report r = Simulation(cfg).run();
  const auto& acct = r.processes[0].acct;
  if (acct.max_walk_cycles > bound || acct.tlb_misses < 100000)
    return {false, cat("BindHigh max walk ", acct.max_walk_cycles, " over ",
                       acct.tlb_misses, " walks, bound ", bound)};

  // Same spill by hand with FollowData, counting individual walks. The
  // footprint crosses a 1 GiB boundary well after DRAM runs dry, so the
  // second L3 page and everything below it land on NVMM.
  TopologyConfig tc = desk_machine();
  Topology topo(tc);
  ReverseMap rmap;
  PageTable pt(0, PageSizeMode::Base4K, DataPolicy::FirstTouch,
               PtPolicy::FollowData, topo, rmap, 0);
  const std::uint64_t pages = (1536ull << 20) >> kPageShift;
  for (std::uint64_t p = 0; p < pages; ++p) {
    auto m = pt.map(p << kPageShift, 0);
    if (!m.ok) return {false, cat("FollowData map failed at page ", p)};
  }
  MmuConfig mc;
  mc.pwc_enabled = false;
  Mmu mmu(mc);
  std::uint64_t over = 0;
  Cycles follow_max = 0;
  for (std::uint64_t p = 0; p < pages; ++p) {
    auto out = mmu.access(pt, topo, p << kPageShift, false);
    if (!out) return {false, cat("walk failed at page ", p)};
    follow_max = std::max(follow_max, out->walk_cycles);
    if (out->walk_cycles > bound) over++;
  }
  double frac = static_cast<double>(over) / static_cast<double>(pages);

  bool ok = frac >= 0.01;
  return {ok, cat("BindHigh max walk ", acct.max_walk_cycles, " <= ", bound,
                  "; FollowData: ", pct(frac), " of ", pages,
                  " walks exceed it (max ", follow_max, ")")};
}

// 4. Populating past the DRAM capacity leaves a step in the walk-latency
// series: windows after the spill average at least 1.5x the windows before.
Outcome spill_inflection() {
  RunConfig cfg;
  cfg.seed = 4;
  cfg.scenario = ScenarioKind::Startup;
  cfg.topo = desk_machine();
  cfg.pt_policy = PtPolicy::FollowData;
  cfg.workload.footprint_mib = 1536;
  cfg.mmu.pwc_enabled = false;
  cfg.autonuma.enabled = false;
  Report r = Simulation(cfg).run();

  Cycles spill = 0;
  bool seen = false;
  for (const auto& e : r.events)
    if (e.kind == EventKind::DramSpill && e.pid == 0) {
      spill = e.cycle;
      seen = true;
      break;
    }
  if (!seen) return {false, "no DRAM spill event"};

  // Weighted means over windows fully before vs fully after the spill; the
  // straddling window is dropped.
  double pre_sum = 0, post_sum = 0;
  std::uint64_t pre_n = 0, post_n = 0;
  const auto& s = r.walk_series;
  for (std::size_t i = 0; i < s.size(); ++i) {
    Cycles end = i + 1 < s.size() ? s[i + 1].window_start_cycle : ~0ull;
    if (end <= spill) {
      pre_sum += s[i].mean_walk_cycles * s[i].tlb_miss_count;
      pre_n += s[i].tlb_miss_count;
    } else if (s[i].window_start_cycle >= spill) {
      post_sum += s[i].mean_walk_cycles * s[i].tlb_miss_count;
      post_n += s[i].tlb_miss_count;
    }
  }
  if (pre_n == 0 || post_n == 0)
    return {false, cat("degenerate split: ", pre_n, " misses before, ", post_n,
                       " after")};
  double pre = pre_sum / pre_n;
  double post = post_sum / post_n;

  bool ok = post > pre && post >= 1.5 * pre;
  return {ok, cat("mean walk ", pre, " cycles before the spill, ", post,
                  " after (", s.size(), " windows)")};
}

// 5. Binding all four levels to DRAM turns DRAM exhaustion into an OOM kill
// even though NVMM still has room; leaving the leaf level free survives the
// identical run.
Outcome bindall_pathology() {
  RunConfig base;
  base.seed = 5;
  base.scenario = ScenarioKind::FullSystem;
  base.topo = desk_machine();
  base.workload.footprint_mib = 600;  // DRAM holds 512 MiB
  base.workload.op_count = 2000;
  base.autonuma.enabled = false;  // no demotion: DRAM genuinely runs out

  RunConfig all = base;
  all.pt_policy = PtPolicy::BindAll;
  Report ra = Simulation(all).run();
  std::uint64_t nvmm_free = 0;
  for (const auto& o : ra.occupancy_at_oom)
    if (o.tier == Tier::Nvmm) nvmm_free += o.free_pages;
  bool killed = ra.benchmark_oom_killed && nvmm_free > 0;

  RunConfig high = base;
  high.pt_policy = PtPolicy::BindHigh;
  Report rh = Simulation(high).run();
  bool survived = !rh.benchmark_oom_killed && rh.processes[0].ran_to_completion;

  bool ok = killed && survived;
  return {ok, cat("BindAll killed with ", nvmm_free,
                  " NVMM pages still free; BindHigh run ",
                  survived ? "completed" : "did not complete")};
}

// 6. Promoting all 512 data pages under one leaf moves the leaf exactly once;
// the other 511 migrations find it already in place.
Outcome batch_counter_taxonomy() {
  TopologyConfig tc = desk_machine();
  Topology topo(tc);
  ReverseMap rmap;
  LockTable locks;
  MigrationStats stats;
  PageTable pt(0, PageSizeMode::Base4K, DataPolicy::FirstTouch,
               PtPolicy::FollowData, topo, rmap, 2);  // everything on NVMM

  std::vector<VirtAddr> vas;
  for (std::uint64_t i = 0; i < kEntriesPerPage; ++i) {
    VirtAddr va = i << kPageShift;
    auto r = pt.map(va, 2);
    if (!r.ok) return {false, cat("map failed at page ", i)};
    vas.push_back(va);
  }

  MigrationEnv env{topo,
                   rmap,
                   locks,
                   stats,
                   [&](ProcessId pid) -> PageTable* {
                     return pid == 0 ? &pt : nullptr;
                   },
                   [] {},
                   [](ProcessId, Cycles) {},
                   nullptr,
                   true,
                   true};
  auto results = move_pages(env, 0, vas, 0, 50);

  std::uint64_t moved = 0;
  for (const auto& res : results)
    if (res.data == DataOutcome::Success) moved++;

  bool ok = moved == 512 && stats.promotions == 512 && stats.l4_success == 1 &&
            stats.l4_already_in_destination == 511 &&
            stats.l4_invocations() == 512 && locks.locked_count() == 0;
  return {ok, cat(moved, " pages promoted, l4_success = ", stats.l4_success,
                  ", l4_already_in_destination = ",
                  stats.l4_already_in_destination)};
}

// 7. After any multi-tenant run settles, every leaf table that still points
// at a DRAM data page is itself on DRAM.
Outcome residency_invariant() {
  std::uint64_t leaf_moves = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    RunConfig cfg;
    cfg.seed = seed;
    cfg.scenario = ScenarioKind::MultiTenant;
    cfg.topo = small_machine();
    cfg.workload.footprint_mib = 8;
    cfg.workload.op_count = 2000;
    cfg.multi_tenant.filler_cpu = 4;
    Report r = Simulation(cfg).run();
    if (r.l4_residency_violations != 0)
      return {false, cat("seed ", seed, ": ", r.l4_residency_violations,
                         " leaves with DRAM children left on NVMM")};
    leaf_moves += r.migration.l4_success;
  }
  bool ok = leaf_moves > 0;  // the invariant must not hold vacuously
  return {ok, cat("100 seeds, zero violations, ", leaf_moves,
                  " leaf migrations along the way")};
}

// 8. Randomly interleaved faults, unmaps and migrations never desynchronize
// the tree: translations always agree with an independently tracked mapping
// set, walks never touch a freed frame, and every world tears down clean.
Outcome interleaving_consistency() {
  TopologyConfig tc;
  tc.nodes = {{0, Tier::Dram, 128, 100, 100, 4},
              {1, Tier::Dram, 128, 100, 100, 4},
              {2, Tier::Nvmm, 2048, 300, 300, 0},
              {3, Tier::Nvmm, 2048, 300, 300, 0}};
  const int kSchedules = 10000;
  const int kSteps = 140;
  const std::uint64_t kVas = 72;  // three leaf groups x 24 slots per process

  std::uint64_t divergences = 0, dead_reads = 0, structural = 0;
  std::uint64_t tasks_done = 0, moves = 0, maps = 0;
  std::string first_bad;

  for (int sched = 0; sched < kSchedules; ++sched) {
    std::mt19937_64 rng(sched + 1);
    Topology topo(tc);
    ReverseMap rmap;
    LockTable locks;
    MigrationStats stats;
    PageTable pt0(0, PageSizeMode::Base4K, DataPolicy::FirstTouch,
                  PtPolicy::FollowData, topo, rmap, 0);
    PageTable pt1(1, PageSizeMode::Base4K, DataPolicy::FirstTouch,
                  PtPolicy::BindHigh, topo, rmap, 1);
    PageTable* pts[2] = {&pt0, &pt1};
    MigrationEnv env{topo,
                     rmap,
                     locks,
                     stats,
                     [&](ProcessId pid) -> PageTable* {
                       return pid < 2 ? pts[pid] : nullptr;
                     },
                     [] {},
                     [](ProcessId, Cycles) {},
                     nullptr,
                     true,
                     true};

    auto va_of = [](std::uint64_t k) {
      return compose(0, 0, static_cast<std::uint32_t>(k / 24),
                     static_cast<std::uint32_t>(k % 24));
    };
    std::set<std::pair<ProcessId, VirtAddr>> shadow;
    std::vector<MigrationTask> active;
    AgentId next_agent = 100;

    auto verify = [&](ProcessId pid, VirtAddr va) {
      auto w = pts[pid]->try_walk(va);
      bool mapped = shadow.count({pid, va}) != 0;
      if (w.has_value() != mapped) {
        divergences++;
        return;
      }
      if (!w) return;
      for (std::uint32_t i = 0; i < w->touched_count; ++i)
        if (!topo.is_allocated(w->touched[i].frame)) dead_reads++;
      if (!topo.is_allocated(w->data_pfn)) {
        dead_reads++;
        return;
      }
      auto m = rmap.find(w->data_pfn);
      if (!m || m->pid != pid || m->va != va) divergences++;
    };

    for (int s = 0; s < kSteps; ++s) {
      std::uint64_t roll = rng() % 100;
      ProcessId pid = static_cast<ProcessId>(rng() % 2);
      VirtAddr va = va_of(rng() % kVas);
      if (roll < 30) {
        // Fault. Like the engine, a fault backs off while the leaf that
        // would change is locked by a migration.
        if (!shadow.count({pid, va})) {
          Pfn target = pts[pid]->lock_target_for(va);
          if (target == kNullPfn || !locks.is_locked(target)) {
            auto r = pts[pid]->map(va, pid == 0 ? 0u : 1u);
            if (r.ok) {
              shadow.insert({pid, va});
              maps++;
            }
          }
        }
      } else if (roll < 45) {
        // Unmap, lock-blind the way process teardown is.
        if (shadow.count({pid, va})) {
          pts[pid]->unmap(va);
          shadow.erase({pid, va});
        }
      } else if (roll < 70) {
        // Launch a migration against the current frame; by the time it runs
        // the mapping may be gone or replaced.
        if (shadow.count({pid, va})) {
          auto w = pts[pid]->try_walk(va);
          if (!w) {
            divergences++;
          } else if (rng() % 5 == 0) {
            active.push_back(MigrationTask::leaf_task(w->data_pfn, next_agent++));
          } else {
            NodeId dest = static_cast<NodeId>(rng() % 4);
            active.push_back(
                MigrationTask::data_task(w->data_pfn, dest, next_agent++));
          }
        }
      } else if (roll < 92 && !active.empty()) {
        std::size_t i = rng() % active.size();
        if (active[i].step(env) == MigrationTask::StepResult::Done) {
          if (active[i].data_outcome() == DataOutcome::Success) moves++;
          active.erase(active.begin() + i);
          tasks_done++;
        }
      } else {
        verify(pid, va);
      }
      if (divergences + dead_reads) break;
    }

    for (auto& t : active) {
      int guard = 0;
      while (!t.done() && guard++ < 32) t.step(env);
      if (!t.done()) structural++;
      tasks_done++;
    }
    active.clear();

    if (locks.locked_count() != 0) structural++;
    for (ProcessId pid = 0; pid < 2; ++pid)
      for (std::uint64_t k = 0; k < kVas; ++k) verify(pid, va_of(k));
    if (stats.data_migrations < stats.promotions + stats.demotions)
      structural++;

    pt0.teardown();
    pt1.teardown();
    for (const auto& n : topo.nodes())
      if (n.free_pages() != n.capacity_pages()) structural++;
    if (rmap.size() != 0) structural++;

    if (divergences + dead_reads + structural) {
      first_bad = cat(" (first at schedule ", sched, ")");
      break;
    }
  }

  bool ok = divergences == 0 && dead_reads == 0 && structural == 0;
  return {ok, cat(kSchedules, " schedules: ", maps, " maps, ", tasks_done,
                  " migration tasks, ", moves, " committed moves; ",
                  divergences, " divergences, ", dead_reads,
                  " freed-frame reads, ", structural, " structural failures",
                  first_bad)};
}

// 9. Crowded-tenant comparison. Binding the upper levels plus leaf migration
// must beat the follow-the-data baseline outright, and leaf migration alone
// must cut walk cycles by at least 10% against the same setup without it.
Outcome directional_benefit() {
  auto cell = [](PtPolicy pol, bool mig) {
    RunConfig cfg;
    cfg.seed = 9;
    cfg.scenario = ScenarioKind::MultiTenant;
    cfg.topo = small_machine();
    cfg.pt_policy = pol;
    cfg.pte_migration = mig;
    cfg.workload.footprint_mib = 16;
    // Long enough that the steady phase amortizes the one-time cost of
    // reclaiming DRAM for the bound upper levels during the crowded start.
    cfg.workload.op_count = 100000;
    cfg.multi_tenant.filler_cpu = 4;
    // Background demotion trickles DRAM free faster than the throttled
    // filler can consume it, which quietly undoes the crowding this
    // comparison is about. Promotion and fault-path reclaim stay on.
    cfg.demotion_enabled = false;
    Report r = Simulation(cfg).run();
    const auto& a = r.processes[0].acct;
    return std::tuple{a.walk_cycles, a.total_cycles(1),
                      r.migration.l4_success};
  };

  auto [walk_full, total_full, leaf_moves] = cell(PtPolicy::BindHigh, true);
  auto [walk_base, total_base, lb] = cell(PtPolicy::FollowData, false);
  auto [walk_off, total_off, lo] = cell(PtPolicy::BindHigh, false);
  (void)lb;
  (void)lo;
  (void)total_off;

  double cut = 1.0 - static_cast<double>(walk_full) /
                         static_cast<double>(walk_off);
  bool ok = walk_full < walk_base && total_full < total_base && cut >= 0.10 &&
            leaf_moves > 0;
  return {ok, cat("walk cycles ", walk_full, " vs baseline ", walk_base,
                  ", total ", total_full, " vs ", total_base,
                  "; migration cuts walk cycles by ", pct(cut), " (",
                  leaf_moves, " leaf moves)")};
}

// 10. Huge-page runs walk a three-level tree and never invoke the leaf
// migration machinery even with it switched on.
Outcome huge_page_behaviour() {
  RunConfig cfg;
  cfg.seed = 10;
  cfg.scenario = ScenarioKind::Thp;
  cfg.topo = small_machine();
  cfg.workload.footprint_mib = 160;  // 80 huge pages vs 64 DRAM blocks
  cfg.workload.op_count = 20000;
  Report r = Simulation(cfg).run();

  const auto& m = r.migration;
  bool zeros = m.l4_invocations() == 0 && m.l4_drain_invocations == 0;
  bool no_leaf_level = true;
  for (const auto& [key, n] : r.final_pt_distribution) {
    (void)n;
    if (key.first == 4) no_leaf_level = false;
  }
  bool walked = r.total.tlb_misses > 0 && r.total.max_walk_cycles <= 3 * 300 &&
                r.total.max_walk_cycles >= 3 * 100;
  bool moved = m.data_migrations > 0;

  TopologyConfig tc = desk_machine();
  Topology topo(tc);
  ReverseMap rmap;
  PageTable pt(0, PageSizeMode::Thp2M, DataPolicy::FirstTouch,
               PtPolicy::BindHigh, topo, rmap, 0);
  MmuConfig mc;
  mc.pwc_enabled = false;
  Mmu mmu(mc);
  bool three_levels = true;
  for (std::uint64_t k = 0; k < 8; ++k) {
    VirtAddr va = k << kHugePageShift;
    if (!pt.map(va, 0).ok) return {false, cat("huge map failed at ", k)};
    auto out = mmu.access(pt, topo, va, false);
    if (!out || out->walk_level_count != 3) three_levels = false;
  }

  bool ok = zeros && no_leaf_level && walked && moved && three_levels;
  return {ok, cat("max walk ", r.total.max_walk_cycles, " over ",
                  r.total.tlb_misses, " misses, ", m.data_migrations,
                  " huge-page moves, leaf-migration invocations = ",
                  m.l4_invocations(), ", levels per walk = 3")};
}

// 11. The same configuration and seed reproduce the summary byte for byte;
// a different seed does not.
Outcome determinism() {
  RunConfig cfg;
  cfg.seed = 11;
  cfg.scenario = ScenarioKind::MultiTenant;
  cfg.topo = small_machine();
  cfg.workload.footprint_mib = 16;
  cfg.workload.op_count = 20000;
  cfg.multi_tenant.filler_cpu = 4;

  std::string a = report_to_json(Simulation(cfg).run()).dump(2);
  std::string b = report_to_json(Simulation(cfg).run()).dump(2);
  RunConfig other = cfg;
  other.seed = 12;
  std::string c = report_to_json(Simulation(other).run()).dump(2);

  bool ok = a == b && a != c;
  return {ok, cat("two identical runs agree on all ", a.size(),
                  " bytes; seed change produces ",
                  a == c ? "the same" : "different", " output")};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> criteria = {
      {"page table size arithmetic", size_arithmetic},
      {"interleaved tables split across tiers", interleave_split},
      {"bound upper levels cap the walk cost", walk_bound},
      {"walk latency steps up at the DRAM spill", spill_inflection},
      {"BindAll dies with NVMM to spare, BindHigh survives", bindall_pathology},
      {"one leaf migration per 512-page batch", batch_counter_taxonomy},
      {"DRAM-backed leaves end up on DRAM", residency_invariant},
      {"translation survives interleaved migration", interleaving_consistency},
      {"bound tables plus migration beat the baseline", directional_benefit},
      {"huge pages walk three levels, leaf migration idle", huge_page_behaviour},
      {"equal seeds reproduce byte-identical reports", determinism},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].fn();
    } catch (const std::exception& e) {
      o = {false, cat("exception: ", e.what())};
    }
    if (!o.ok) failed++;
    std::printf("%2zu/%zu  %s  %s: %s\n", i + 1, criteria.size(),
                o.ok ? "PASS" : "FAIL", criteria[i].name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu of %zu acceptance criteria passed\n",
              criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
