#include "tierpt/engine.hpp"

#include <algorithm>
#include <deque>

namespace tierpt {

void CycleAccounting::add(const CycleAccounting& o) {
  instructions += o.instructions;
  memory_accesses += o.memory_accesses;
  dram_data_accesses += o.dram_data_accesses;
  tlb_misses += o.tlb_misses;
  faults += o.faults;
  slow_path_allocs += o.slow_path_allocs;
  lock_block_episodes += o.lock_block_episodes;
  stall_cycles += o.stall_cycles;
  walk_cycles += o.walk_cycles;
  data_cycles += o.data_cycles;
  alloc_cycles += o.alloc_cycles;
  lock_wait_cycles += o.lock_wait_cycles;
  migration_copy_cycles += o.migration_copy_cycles;
  max_walk_cycles = std::max(max_walk_cycles, o.max_walk_cycles);
}

const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::ProcessStart: return "process_start";
    case EventKind::ProcessExit: return "process_exit";
    case EventKind::OomKill: return "oom_kill";
    case EventKind::DramSpill: return "dram_spill";
  }
  return "?";
}

namespace {

// One process executing its access stream, one op attempt per step. An op
// can take several steps: a fault first maps the page (possibly after
// blocking on a migration lock or running reclaim), then retries.
class WorkloadAgent : public Agent {
 public:
  WorkloadAgent(ProcessId pid, WorkloadSpec spec, PageSizeMode mode,
                std::uint64_t seed, std::uint32_t compute_gap,
                std::optional<ProcessId> gate, bool teardown_on_exit)
      : pid_(pid),
        gate_(gate),
        teardown_on_exit_(teardown_on_exit),
        compute_gap_(compute_gap),
        stream_(std::in_place, spec, mode, seed) {}

  WorkloadAgent(ProcessId pid, std::vector<TraceRecord> trace,
                std::uint32_t compute_gap)
      : pid_(pid),
        teardown_on_exit_(false),
        compute_gap_(compute_gap),
        trace_(std::move(trace)),
        trace_driven_(true) {}

  bool ready(Simulation& sim) override {
    if (!gate_) return true;
    const ProcessCtx& g = sim.process(*gate_);
    return g.populate_done || g.oom_killed;
  }

  void step(Simulation& sim) override;

 private:
  std::optional<Op> next_op(Simulation& sim);
  void handle_alloc_failure(Simulation& sim, const MapError& err);
  void try_exit(Simulation& sim);

  ProcessId pid_;
  std::optional<ProcessId> gate_;
  bool teardown_on_exit_;
  std::uint32_t compute_gap_;
  std::optional<AccessStream> stream_;
  std::vector<TraceRecord> trace_;
  std::size_t trace_pos_ = 0;
  bool trace_driven_ = false;

  std::optional<Op> pending_;
  CpuId op_cpu_ = 0;  // trace records may hop between CPUs
  bool fault_counted_ = false;
  bool spilled_ = false;
  std::uint32_t block_episodes_ = 0;
  std::uint32_t reclaim_rounds_ = 0;
  bool started_ = false;
  bool exiting_ = false;
};

std::optional<Op> WorkloadAgent::next_op(Simulation& sim) {
  if (!trace_driven_) return stream_->next();
  if (trace_pos_ >= trace_.size()) return std::nullopt;
  const TraceRecord& r = trace_[trace_pos_++];
  if (r.cpu >= sim.topo().total_cpus())
    throw SimError("trace references cpu beyond the topology");
  op_cpu_ = r.cpu;
  return Op{r.va, r.is_write, false};
}

void WorkloadAgent::step(Simulation& sim) {
  ProcessCtx& p = sim.process(pid_);
  if (!started_) {
    started_ = true;
    op_cpu_ = p.cpu;
    if (trace_driven_) p.populate_done = true;  // traces have no such phase
    sim.record_event(EventKind::ProcessStart, pid_, p.name);
  }
  if (p.oom_killed) {
    finished = true;
    return;
  }
  if (exiting_) {
    try_exit(sim);
    return;
  }

  if (!pending_) {
    pending_ = next_op(sim);
    if (!pending_) {
      p.running_done = true;
      if (!p.populate_done) {
        p.populate_done = true;
        sim.take_snapshot("post_populate", pid_);
      }
      exiting_ = true;
      try_exit(sim);
      return;
    }
    fault_counted_ = false;
    reclaim_rounds_ = 0;
    block_episodes_ = 0;
    if (!trace_driven_) op_cpu_ = p.cpu;
  }

  const Op& op = *pending_;
  auto out = sim.mmu_of_cpu(op_cpu_).access(*p.pt, sim.topo(), op.va,
                                            op.is_write);
  if (!out) {
    if (!fault_counted_) {
      p.acct.faults++;
      fault_counted_ = true;
    }
    Pfn token = p.pt->lock_target_for(op.va);
    if (token != kNullPfn && sim.locks().is_locked(token)) {
      block_episodes_++;
      p.acct.lock_block_episodes++;
      sim.block_agent(id, token);
      return;
    }
    NodeId local = sim.topo().local_node_of_cpu(op_cpu_);
    MapResult res = p.pt->map(op.va, local);
    if (!res.ok) {
      handle_alloc_failure(sim, res.err);
      return;
    }
    p.acct.alloc_cycles += res.ok->alloc_latency;
    p.acct.stall_cycles += res.ok->alloc_latency;
    if (res.ok->slow_path) p.acct.slow_path_allocs++;
    if (!spilled_ && p.pt->data_policy() == DataPolicy::FirstTouch &&
        sim.topo().tier_of(res.ok->data_pfn) == Tier::Nvmm) {
      spilled_ = true;
      sim.record_event(EventKind::DramSpill, pid_,
                       "first data allocation landed on nvmm");
    }
    return;  // translation retries on the next step
  }

  sim.account_access(p, *out, op.populate ? 0 : compute_gap_);
  if (block_episodes_ > 0) {
    Cycles wait =
        block_episodes_ * sim.cfg().engine.lock_wait_cycles;
    p.acct.stall_cycles += wait;
    p.acct.lock_wait_cycles += wait;
    block_episodes_ = 0;
  }
  if (sim.cfg().autonuma.enabled)
    sim.tracker().record_access(out->data_pfn, op_cpu_);
  bool was_populate = op.populate;
  pending_.reset();
  if (was_populate && stream_->populate_done() && !p.populate_done) {
    p.populate_done = true;
    sim.take_snapshot("post_populate", pid_);
  }
}

void WorkloadAgent::handle_alloc_failure(Simulation& sim,
                                         const MapError& err) {
  ProcessCtx& p = sim.process(pid_);
  // Upper-level pressure under the partial bind is relieved by demoting a
  // little cold data out of DRAM; everything else means the allocator has
  // already looked everywhere the policy allows, so the process dies.
  bool upper_bind_high = err.table_alloc_failed &&
                         p.pt->pt_policy() == PtPolicy::BindHigh &&
                         err.level != PtLevel::L4;
  if (upper_bind_high && sim.cfg().reclaim_enabled && reclaim_rounds_ < 8) {
    reclaim_rounds_++;
    MigrationEnv env = sim.migration_env();
    const HotnessTracker* hot =
        sim.cfg().autonuma.enabled ? &sim.tracker() : nullptr;
    std::uint64_t n =
        demote_cold_pages(env, hot, sim.cfg().reclaim_batch, id);
    sim.stats().reclaim_demotions += n;
    if (n > 0) return;  // the map retries next step
  }
  sim.kill_process(pid_, true);
  finished = true;
}

void WorkloadAgent::try_exit(Simulation& sim) {
  ProcessCtx& p = sim.process(pid_);
  if (!teardown_on_exit_) {
    sim.record_event(EventKind::ProcessExit, pid_, "tables kept");
    finished = true;
    return;
  }
  // Let in-flight migrations that hold locks on our tables finish first.
  for (Pfn pfn : sim.locks().locked_pfns()) {
    if (p.pt->page(pfn) != nullptr) {
      sim.block_agent(id, pfn);
      return;
    }
  }
  sim.take_snapshot("at_exit", pid_);
  sim.record_event(EventKind::ProcessExit, pid_, "tables torn down");
  p.pt->teardown();
  sim.flush_all_mmus();
  finished = true;
}

// The balancing daemon: at every epoch boundary it turns hot NVMM frames
// into promotion work, relieves DRAM pressure by demoting cold frames, and
// then executes the queued migrations one phase at a time.
class NumaBalanceAgent : public Agent {
 public:
  explicit NumaBalanceAgent(const HotnessConfig& cfg)
      : epoch_cycles_(cfg.epoch_cycles), next_epoch_(cfg.epoch_cycles) {}

  bool ready(Simulation& sim) override {
    if (current_ || !queue_.empty()) return true;
    rearm(sim.now());
    return sim.now() >= next_epoch_ || sim.all_workloads_done();
  }

  void step(Simulation& sim) override {
    MigrationEnv env = sim.migration_env();
    if (!current_ && !queue_.empty()) {
      current_.emplace(queue_.front());
      queue_.pop_front();
    }
    if (current_) {
      if (current_->step(env) == MigrationTask::StepResult::Done)
        current_.reset();
      return;
    }
    if (sim.all_workloads_done()) {
      finished = true;
      return;
    }
    run_epoch(sim, env);
  }

 private:
  // The clock jumps backward when the process that was defining it exits;
  // pull the next boundary in so balancing keeps pace with the survivors.
  void rearm(Cycles now) {
    if (now + epoch_cycles_ < next_epoch_) next_epoch_ = now + epoch_cycles_;
  }

  void run_epoch(Simulation& sim, MigrationEnv& env) {
    auto hints =
        sim.tracker().promotion_hints(sim.topo(), sim.rmap());
    for (const auto& h : hints)
      queue_.push_back(MigrationTask::data_task(h.frame, h.dest, id));
    if (sim.cfg().demotion_enabled) {
      bool pressured = false;
      for (const auto& n : sim.topo().nodes())
        if (n.tier() == Tier::Dram && n.free_pages() < n.low_watermark())
          pressured = true;
      if (pressured)
        demote_cold_pages(env, &sim.tracker(), sim.cfg().reclaim_batch, id);
    }
    sim.tracker().epoch_reset();
    Cycles now = sim.now();
    while (next_epoch_ <= now) next_epoch_ += epoch_cycles_;
  }

  Cycles epoch_cycles_;
  Cycles next_epoch_;
  std::deque<MigrationTask> queue_;
  std::optional<MigrationTask> current_;
};

}  // namespace

Simulation::Simulation(RunConfig cfg) : cfg_(std::move(cfg)) {
  resolve_config(cfg_);
  topo_ = std::make_unique<Topology>(cfg_.topo);
  tracker_ = std::make_unique<HotnessTracker>(topo_->total_cpus(),
                                              cfg_.autonuma);
  mmus_.reserve(topo_->total_cpus());
  for (std::uint32_t c = 0; c < topo_->total_cpus(); ++c)
    mmus_.emplace_back(cfg_.mmu);
  sched_rng_.seed(cfg_.seed);
  build_agents();
}

ProcessId Simulation::spawn_process(std::string name, CpuId cpu) {
  auto pid = static_cast<ProcessId>(processes_.size());
  auto ctx = std::make_unique<ProcessCtx>();
  ctx->pid = pid;
  ctx->name = std::move(name);
  ctx->cpu = cpu;
  // The filler models an ordinary tenant: first-touch data, tables follow.
  bool is_filler = ctx->name == "filler";
  ctx->pt = std::make_unique<PageTable>(
      pid, is_filler ? PageSizeMode::Base4K : cfg_.page_mode(),
      is_filler ? DataPolicy::FirstTouch : cfg_.data_policy,
      is_filler ? PtPolicy::FollowData : cfg_.pt_policy, *topo_, rmap_,
      topo_->local_node_of_cpu(cpu));
  processes_.push_back(std::move(ctx));
  return pid;
}

void Simulation::build_agents() {
  const WorkloadConfig& w = cfg_.workload;
  WorkloadSpec bench_spec;
  bench_spec.footprint_bytes = w.footprint_mib << 20;
  bench_spec.populate = w.populate;
  bench_spec.access = {w.dist,   w.theta,    w.scramble,
                       w.read_ratio, w.op_count, w.compute_gap};

  ProcessId bench = spawn_process("bench", w.cpu);
  std::unique_ptr<WorkloadAgent> bench_agent;
  if (!w.trace_file.empty()) {
    bench_agent = std::make_unique<WorkloadAgent>(
        bench, load_trace(w.trace_file), w.compute_gap);
  } else {
    std::optional<ProcessId> gate;
    if (cfg_.scenario == ScenarioKind::MultiTenant) gate = 1;
    bench_agent = std::make_unique<WorkloadAgent>(
        bench, bench_spec, cfg_.page_mode(),
        cfg_.seed ^ 0x9e3779b97f4a7c15ull, w.compute_gap, gate,
        /*teardown_on_exit=*/false);
  }
  bench_agent->id = static_cast<AgentId>(agents_.size());
  workload_agents_.push_back(bench_agent->id);
  agents_.push_back(std::move(bench_agent));

  if (cfg_.scenario == ScenarioKind::MultiTenant) {
    const MultiTenantConfig& mt = cfg_.multi_tenant;
    ProcessId filler = spawn_process("filler", mt.filler_cpu);
    WorkloadSpec filler_spec;
    filler_spec.footprint_bytes = mt.filler_mib << 20;
    filler_spec.populate = true;
    filler_spec.access = {Distribution::Uniform, 0.99, false, 1.0,
                          mt.filler_dwell_ops, 0};
    auto agent = std::make_unique<WorkloadAgent>(
        filler, filler_spec, PageSizeMode::Base4K,
        cfg_.seed ^ 0xc2b2ae3d27d4eb4full, 0, std::nullopt,
        /*teardown_on_exit=*/true);
    agent->id = static_cast<AgentId>(agents_.size());
    workload_agents_.push_back(agent->id);
    agents_.push_back(std::move(agent));
  }

  if (cfg_.autonuma.enabled) {
    auto agent = std::make_unique<NumaBalanceAgent>(cfg_.autonuma);
    agent->id = static_cast<AgentId>(agents_.size());
    agents_.push_back(std::move(agent));
  }
}

// Processes that are done stop defining the clock: a filler that burned tens
// of millions of cycles in the allocator slow path would otherwise freeze
// epoch bookkeeping for everyone who outlives it.
Cycles Simulation::now() const {
  Cycles live = 0, all = 0;
  bool any_live = false;
  for (const auto& p : processes_) {
    Cycles t = p->acct.total_cycles(cfg_.engine.cpi_base);
    all = std::max(all, t);
    if (!p->running_done && !p->oom_killed) {
      live = std::max(live, t);
      any_live = true;
    }
  }
  return any_live ? live : all;
}

void Simulation::flush_all_mmus() {
  for (Mmu& m : mmus_) m.flush();
}

void Simulation::charge_stall(ProcessId pid, Cycles cycles) {
  if (pid >= processes_.size()) return;
  ProcessCtx& p = *processes_[pid];
  p.acct.stall_cycles += cycles;
  p.acct.migration_copy_cycles += cycles;
}

MigrationEnv Simulation::migration_env() {
  return MigrationEnv{
      *topo_,
      rmap_,
      locks_,
      stats_,
      [this](ProcessId pid) -> PageTable* {
        if (pid >= processes_.size()) return nullptr;
        PageTable* pt = processes_[pid]->pt.get();
        return pt && pt->alive() ? pt : nullptr;
      },
      [this] { flush_all_mmus(); },
      [this](ProcessId pid, Cycles c) { charge_stall(pid, c); },
      [this](std::vector<AgentId>&& ids) { wake_agents(std::move(ids)); },
      cfg_.pte_migration,
      cfg_.require_l3_lock,
  };
}

void Simulation::record_event(EventKind kind, ProcessId pid,
                              std::string detail) {
  events_.push_back(Event{kind, pid, now(), std::move(detail)});
}

void Simulation::take_snapshot(const std::string& label, ProcessId pid) {
  ProcessCtx& p = *processes_.at(pid);
  if (!p.pt->alive()) return;
  PtSnapshot s;
  s.label = label;
  s.pid = pid;
  s.dist = p.pt->distribution();
  int leaf_level = p.pt->mode() == PageSizeMode::Base4K ? 4 : 3;
  for (const auto& [key, count] : s.dist) {
    auto [level, node] = key;
    bool dram = topo_->node(node).tier() == Tier::Dram;
    if (level == leaf_level && p.pt->mode() == PageSizeMode::Base4K) {
      s.l4_total += count;
      if (dram) s.l4_dram += count;
    } else {
      s.upper_total += count;
      if (dram) s.upper_dram += count;
    }
  }
  auto [dram, nvmm] = p.pt->data_tier_counts();
  s.data_dram = dram;
  s.data_nvmm = nvmm;
  snapshots_.push_back(std::move(s));
}

void Simulation::account_access(ProcessCtx& p, const AccessOutcome& out,
                                std::uint32_t compute_gap) {
  p.acct.instructions += 1 + compute_gap;
  p.acct.memory_accesses++;
  if (topo_->tier_of(out.data_pfn) == Tier::Dram)
    p.acct.dram_data_accesses++;
  p.acct.data_cycles += out.data_cycles;
  p.acct.stall_cycles += out.stall_cycles;
  if (!out.tlb_hit) {
    p.acct.tlb_misses++;
    p.acct.walk_cycles += out.walk_cycles;
    p.acct.max_walk_cycles =
        std::max(p.acct.max_walk_cycles, out.walk_cycles);
    p.window_misses++;
    p.window_walk_cycles += out.walk_cycles;
  }
  p.window_accesses++;
  if (p.pid == 0 && p.window_accesses >= cfg_.engine.sample_window)
    flush_window(p);
}

void Simulation::flush_window(ProcessCtx& p) {
  if (p.window_misses > 0)
    walk_series_.push_back(
        {p.window_start_cycle,
         static_cast<double>(p.window_walk_cycles) /
             static_cast<double>(p.window_misses),
         p.window_misses});
  p.window_accesses = 0;
  p.window_misses = 0;
  p.window_walk_cycles = 0;
  p.window_start_cycle = p.acct.total_cycles(cfg_.engine.cpi_base);
}

void Simulation::kill_process(ProcessId pid, bool oom) {
  ProcessCtx& p = *processes_.at(pid);
  if (oom) {
    std::uint64_t free_dram = 0, free_nvmm = 0;
    for (const auto& n : topo_->nodes())
      (n.tier() == Tier::Dram ? free_dram : free_nvmm) += n.free_pages();
    record_event(EventKind::OomKill, pid,
                 "free_dram_pages=" + std::to_string(free_dram) +
                     " free_nvmm_pages=" + std::to_string(free_nvmm));
    if (occupancy_at_oom_.empty())
      for (const auto& n : topo_->nodes())
        occupancy_at_oom_.push_back(
            {n.id(), n.tier(), n.capacity_pages(), n.free_pages()});
    p.oom_killed = true;
  }
  if (p.pt->alive()) p.pt->teardown();
  flush_all_mmus();
}

bool Simulation::all_workloads_done() const {
  for (AgentId aid : workload_agents_)
    if (!agents_[aid]->finished) return false;
  return true;
}

void Simulation::wake_agents(std::vector<AgentId>&& ids) {
  for (AgentId aid : ids) agents_.at(aid)->blocked = false;
}

void Simulation::block_agent(AgentId aid, Pfn token) {
  locks_.wait_on(token, aid);
  agents_.at(aid)->blocked = true;
}

std::uint64_t Simulation::count_l4_residency_violations() const {
  std::uint64_t violations = 0;
  for (const auto& p : processes_) {
    if (!p->pt->alive() || p->pt->mode() != PageSizeMode::Base4K) continue;
    for (Pfn pfn : p->pt->table_pfns(PtLevel::L4)) {
      const PtPage* page = p->pt->page(pfn);
      if (page->dram_child_count > 0 &&
          topo_->node(page->node).tier() == Tier::Nvmm)
        violations++;
    }
  }
  return violations;
}

void Simulation::drain_leaf_residency() {
  MigrationEnv env = migration_env();
  AgentId drain_agent = static_cast<AgentId>(agents_.size()) + 100;
  for (auto& p : processes_) {
    if (!p->pt->alive() || p->pt->mode() != PageSizeMode::Base4K) continue;
    for (Pfn pfn : p->pt->table_pfns(PtLevel::L4)) {
      const PtPage* page = p->pt->page(pfn);
      if (!page || page->dram_child_count == 0 ||
          topo_->node(page->node).tier() != Tier::Nvmm)
        continue;
      Pfn child = kNullPfn;
      for (Pfn entry : page->entries) {
        if (entry != kNullPfn && topo_->tier_of(entry) == Tier::Dram) {
          child = entry;
          break;
        }
      }
      if (child == kNullPfn) continue;
      MigrationTask task = MigrationTask::leaf_task(child, drain_agent);
      run_to_completion(task, env);
    }
  }
}

void Simulation::scheduler_loop() {
  std::vector<AgentId> ready_ids;
  while (true) {
    ready_ids.clear();
    bool all_finished = true;
    for (const auto& a : agents_) {
      if (a->finished) continue;
      all_finished = false;
      if (!a->blocked && a->ready(*this)) ready_ids.push_back(a->id);
    }
    if (ready_ids.empty()) {
      if (all_finished) return;
      throw SimError("scheduler stalled with unfinished agents");
    }
    AgentId pick = ready_ids[bounded(sched_rng_, ready_ids.size())];
    agents_[pick]->step(*this);
  }
}

Report Simulation::run() {
  if (ran_) throw InvalidOperation("simulation already ran");
  ran_ = true;
  scheduler_loop();
  if (cfg_.drain_at_quiescence && cfg_.pte_migration && !cfg_.thp)
    drain_leaf_residency();
  flush_window(*processes_[0]);
  for (auto& p : processes_)
    if (p->pt->alive()) take_snapshot("final", p->pid);
  return make_report();
}

Report Simulation::make_report() {
  Report r;
  r.scenario = to_string(cfg_.scenario);
  r.seed = cfg_.seed;
  for (const auto& p : processes_) {
    ProcessReport pr;
    pr.pid = p->pid;
    pr.name = p->name;
    pr.cpu = p->cpu;
    pr.acct = p->acct;
    pr.oom_killed = p->oom_killed;
    pr.ran_to_completion = p->running_done;
    if (p->acct.instructions > 0)
      pr.mpki = mpki(p->acct.tlb_misses, p->acct.instructions);
    r.processes.push_back(std::move(pr));
    r.total.add(p->acct);
  }
  r.migration = stats_;
  r.events = events_;
  r.walk_series = walk_series_;
  r.snapshots = snapshots_;
  for (const auto& p : processes_) {
    if (!p->pt->alive()) continue;
    for (const auto& [key, count] : p->pt->distribution())
      r.final_pt_distribution[key] += count;
  }
  for (const auto& n : topo_->nodes())
    r.occupancy.push_back(
        {n.id(), n.tier(), n.capacity_pages(), n.free_pages()});
  r.occupancy_at_oom = occupancy_at_oom_;
  r.l4_residency_violations = count_l4_residency_violations();
  r.benchmark_oom_killed = processes_[0]->oom_killed;
  return r;
}

}  // namespace tierpt
