#include "tierpt/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace tierpt {

std::vector<NodeConfig> default_nodes() {
  auto mib = [](std::uint64_t m) { return m * (1024 * 1024 / kPageSize); };
  return {
      {0, Tier::Dram, mib(256), 100, 100, 4},
      {1, Tier::Dram, mib(256), 100, 100, 4},
      {2, Tier::Nvmm, mib(1024), 300, 300, 0},
      {3, Tier::Nvmm, mib(1024), 300, 300, 0},
  };
}

namespace {

struct Parser {
  std::string section;
  std::size_t lineno = 0;
  RunConfig cfg;
  bool saw_nodes = false;
  std::vector<std::vector<std::uint32_t>> distance_rows;

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("config line " + std::to_string(lineno) + ": " + what);
  }

  std::uint64_t u64(const std::string& v) const {
    std::uint64_t out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
      fail("expected unsigned integer, got '" + v + "'");
    return out;
  }

  double f64(const std::string& v) const {
    double out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
      fail("expected number, got '" + v + "'");
    return out;
  }

  bool boolean(const std::string& v) const {
    if (v == "true") return true;
    if (v == "false") return false;
    fail("expected true or false, got '" + v + "'");
  }

  void key(const std::string& k, const std::string& v) {
    auto& c = cfg;
    if (section == "run") {
      if (k == "seed") c.seed = u64(v);
      else if (k == "scenario") c.scenario = scenario(v);
      else if (k == "output_dir") c.output_dir = v;
      else fail("unknown key '" + k + "' in [run]");
    } else if (section == "topology") {
      if (k == "fast_path_latency") c.topo.fast_path_latency = u64(v);
      else if (k == "slow_path_latency") c.topo.slow_path_latency = u64(v);
      else if (k == "low_watermark_pct") c.topo.low_watermark_pct = f64(v);
      else if (k == "min_watermark_pct") c.topo.min_watermark_pct = f64(v);
      else fail("unknown key '" + k + "' in [topology]");
    } else if (section == "topology.node") {
      if (c.topo.nodes.empty()) fail("key outside a [topology.node] block");
      NodeConfig& n = c.topo.nodes.back();
      if (k == "id") n.id = static_cast<NodeId>(u64(v));
      else if (k == "tier") n.tier = tier(v);
      else if (k == "capacity_mib")
        n.capacity_pages = u64(v) * (1024 * 1024 / kPageSize);
      else if (k == "read_latency") n.read_latency = u64(v);
      else if (k == "write_latency") n.write_latency = u64(v);
      else if (k == "cpus") n.cpu_count = static_cast<std::uint32_t>(u64(v));
      else fail("unknown key '" + k + "' in [topology.node]");
    } else if (section == "topology.distance") {
      if (k == "row") distance_rows.push_back(row(v));
      else fail("unknown key '" + k + "' in [topology.distance]");
    } else if (section == "mmu") {
      if (k == "tlb_entries")
        c.mmu.tlb_entries = static_cast<std::uint32_t>(u64(v));
      else if (k == "pwc_entries")
        c.mmu.pwc_entries = static_cast<std::uint32_t>(u64(v));
      else if (k == "pwc_enabled") c.mmu.pwc_enabled = boolean(v);
      else if (k == "stall_fraction") c.mmu.stall_fraction = f64(v);
      else fail("unknown key '" + k + "' in [mmu]");
    } else if (section == "policy") {
      if (k == "data_policy") c.data_policy = data_policy(v);
      else if (k == "pt_policy") c.pt_policy = pt_policy(v);
      else if (k == "thp") c.thp = boolean(v);
      else fail("unknown key '" + k + "' in [policy]");
    } else if (section == "autonuma") {
      if (k == "enabled") c.autonuma.enabled = boolean(v);
      else if (k == "epoch_cycles") c.autonuma.epoch_cycles = u64(v);
      else if (k == "hot_threshold")
        c.autonuma.hot_threshold = static_cast<std::uint32_t>(u64(v));
      else if (k == "promotion_budget")
        c.autonuma.promotion_budget = static_cast<std::uint32_t>(u64(v));
      else fail("unknown key '" + k + "' in [autonuma]");
    } else if (section == "pte_migration") {
      if (k == "enabled") c.pte_migration = boolean(v);
      else if (k == "drain_at_quiescence")
        c.drain_at_quiescence = boolean(v);
      else if (k == "require_l3_lock") c.require_l3_lock = boolean(v);
      else fail("unknown key '" + k + "' in [pte_migration]");
    } else if (section == "demotion") {
      if (k == "enabled") c.demotion_enabled = boolean(v);
      else fail("unknown key '" + k + "' in [demotion]");
    } else if (section == "reclaim") {
      if (k == "enabled") c.reclaim_enabled = boolean(v);
      else if (k == "batch")
        c.reclaim_batch = static_cast<std::uint32_t>(u64(v));
      else fail("unknown key '" + k + "' in [reclaim]");
    } else if (section == "engine") {
      if (k == "cpi_base")
        c.engine.cpi_base = static_cast<std::uint32_t>(u64(v));
      else if (k == "lock_wait_cycles") c.engine.lock_wait_cycles = u64(v);
      else if (k == "sample_window") c.engine.sample_window = u64(v);
      else fail("unknown key '" + k + "' in [engine]");
    } else if (section == "workload") {
      if (k == "footprint_mib") c.workload.footprint_mib = u64(v);
      else if (k == "populate") c.workload.populate = boolean(v);
      else if (k == "distribution") c.workload.dist = dist(v);
      else if (k == "theta") c.workload.theta = f64(v);
      else if (k == "scramble") c.workload.scramble = boolean(v);
      else if (k == "read_ratio") c.workload.read_ratio = f64(v);
      else if (k == "op_count") c.workload.op_count = u64(v);
      else if (k == "compute_gap")
        c.workload.compute_gap = static_cast<std::uint32_t>(u64(v));
      else if (k == "trace_file") c.workload.trace_file = v;
      else if (k == "cpu") c.workload.cpu = static_cast<CpuId>(u64(v));
      else fail("unknown key '" + k + "' in [workload]");
    } else if (section == "multi_tenant") {
      if (k == "filler_mib") c.multi_tenant.filler_mib = u64(v);
      else if (k == "filler_dwell_ops")
        c.multi_tenant.filler_dwell_ops = u64(v);
      else if (k == "filler_cpu")
        c.multi_tenant.filler_cpu = static_cast<CpuId>(u64(v));
      else fail("unknown key '" + k + "' in [multi_tenant]");
    } else {
      fail("key before any section");
    }
  }

  void open_section(const std::string& name) {
    static const char* known[] = {
        "run",          "topology", "topology.node", "topology.distance",
        "mmu",          "policy",   "autonuma",      "pte_migration",
        "demotion",     "reclaim",  "engine",        "workload",
        "multi_tenant",
    };
    bool ok = false;
    for (const char* s : known) ok |= name == s;
    if (!ok) fail("unknown section [" + name + "]");
    section = name;
    if (name == "topology.node") {
      if (!saw_nodes) {
        cfg.topo.nodes.clear();  // user nodes replace the default machine
        saw_nodes = true;
      }
      cfg.topo.nodes.push_back(NodeConfig{});
      cfg.topo.nodes.back().id =
          static_cast<NodeId>(cfg.topo.nodes.size() - 1);
    }
  }

  std::vector<std::uint32_t> row(const std::string& v) const {
    std::istringstream ss(v);
    std::vector<std::uint32_t> out;
    std::uint32_t x;
    while (ss >> x) out.push_back(x);
    if (!ss.eof()) fail("bad distance row '" + v + "'");
    return out;
  }

  ScenarioKind scenario(const std::string& v) const {
    if (v == "full_system") return ScenarioKind::FullSystem;
    if (v == "multi_tenant") return ScenarioKind::MultiTenant;
    if (v == "interleaved") return ScenarioKind::Interleaved;
    if (v == "startup") return ScenarioKind::Startup;
    if (v == "thp") return ScenarioKind::Thp;
    fail("unknown scenario '" + v + "'");
  }
  Tier tier(const std::string& v) const {
    if (v == "dram") return Tier::Dram;
    if (v == "nvmm") return Tier::Nvmm;
    fail("unknown tier '" + v + "'");
  }
  DataPolicy data_policy(const std::string& v) const {
    if (v == "first_touch") return DataPolicy::FirstTouch;
    if (v == "interleave") return DataPolicy::Interleave;
    fail("unknown data policy '" + v + "'");
  }
  PtPolicy pt_policy(const std::string& v) const {
    if (v == "follow_data") return PtPolicy::FollowData;
    if (v == "bind_all") return PtPolicy::BindAll;
    if (v == "bind_high") return PtPolicy::BindHigh;
    fail("unknown pt policy '" + v + "'");
  }
  Distribution dist(const std::string& v) const {
    if (v == "zipfian") return Distribution::Zipfian;
    if (v == "uniform") return Distribution::Uniform;
    fail("unknown distribution '" + v + "'");
  }
};

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string fmt(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  Parser p;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    p.lineno++;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') p.fail("malformed section header");
      p.open_section(trim(t.substr(1, t.size() - 2)));
      continue;
    }
    std::size_t eq = t.find('=');
    if (eq == std::string::npos) p.fail("expected key = value");
    std::string k = trim(t.substr(0, eq));
    std::string v = trim(t.substr(eq + 1));
    if (k.empty()) p.fail("empty key");
    p.key(k, v);
  }
  if (!p.distance_rows.empty()) p.cfg.topo.distance = p.distance_rows;
  return p.cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string emit_config(const RunConfig& cfg) {
  std::ostringstream o;
  o << "[run]\n";
  o << "seed = " << cfg.seed << "\n";
  o << "scenario = " << to_string(cfg.scenario) << "\n";
  o << "output_dir = " << cfg.output_dir << "\n";
  o << "\n[topology]\n";
  o << "fast_path_latency = " << cfg.topo.fast_path_latency << "\n";
  o << "slow_path_latency = " << cfg.topo.slow_path_latency << "\n";
  o << "low_watermark_pct = " << fmt(cfg.topo.low_watermark_pct) << "\n";
  o << "min_watermark_pct = " << fmt(cfg.topo.min_watermark_pct) << "\n";
  for (const NodeConfig& n : cfg.topo.nodes) {
    o << "\n[topology.node]\n";
    o << "id = " << n.id << "\n";
    o << "tier = " << to_string(n.tier) << "\n";
    o << "capacity_mib = " << n.capacity_pages * kPageSize / (1024 * 1024)
      << "\n";
    o << "read_latency = " << n.read_latency << "\n";
    o << "write_latency = " << n.write_latency << "\n";
    o << "cpus = " << n.cpu_count << "\n";
  }
  const auto& dist = cfg.topo.distance.empty()
                         ? default_distance_matrix(cfg.topo.nodes)
                         : cfg.topo.distance;
  o << "\n[topology.distance]\n";
  for (const auto& row : dist) {
    o << "row =";
    for (std::uint32_t d : row) o << " " << d;
    o << "\n";
  }
  o << "\n[mmu]\n";
  o << "tlb_entries = " << cfg.mmu.tlb_entries << "\n";
  o << "pwc_entries = " << cfg.mmu.pwc_entries << "\n";
  o << "pwc_enabled = " << (cfg.mmu.pwc_enabled ? "true" : "false") << "\n";
  o << "stall_fraction = " << fmt(cfg.mmu.stall_fraction) << "\n";
  o << "\n[policy]\n";
  o << "data_policy = " << to_string(cfg.data_policy) << "\n";
  o << "pt_policy = " << to_string(cfg.pt_policy) << "\n";
  o << "thp = " << (cfg.thp ? "true" : "false") << "\n";
  o << "\n[autonuma]\n";
  o << "enabled = " << (cfg.autonuma.enabled ? "true" : "false") << "\n";
  o << "epoch_cycles = " << cfg.autonuma.epoch_cycles << "\n";
  o << "hot_threshold = " << cfg.autonuma.hot_threshold << "\n";
  o << "promotion_budget = " << cfg.autonuma.promotion_budget << "\n";
  o << "\n[pte_migration]\n";
  o << "enabled = " << (cfg.pte_migration ? "true" : "false") << "\n";
  o << "drain_at_quiescence = "
    << (cfg.drain_at_quiescence ? "true" : "false") << "\n";
  o << "require_l3_lock = " << (cfg.require_l3_lock ? "true" : "false")
    << "\n";
  o << "\n[demotion]\n";
  o << "enabled = " << (cfg.demotion_enabled ? "true" : "false") << "\n";
  o << "\n[reclaim]\n";
  o << "enabled = " << (cfg.reclaim_enabled ? "true" : "false") << "\n";
  o << "batch = " << cfg.reclaim_batch << "\n";
  o << "\n[engine]\n";
  o << "cpi_base = " << cfg.engine.cpi_base << "\n";
  o << "lock_wait_cycles = " << cfg.engine.lock_wait_cycles << "\n";
  o << "sample_window = " << cfg.engine.sample_window << "\n";
  o << "\n[workload]\n";
  o << "footprint_mib = " << cfg.workload.footprint_mib << "\n";
  o << "populate = " << (cfg.workload.populate ? "true" : "false") << "\n";
  o << "distribution = "
    << (cfg.workload.dist == Distribution::Zipfian ? "zipfian" : "uniform")
    << "\n";
  o << "theta = " << fmt(cfg.workload.theta) << "\n";
  o << "scramble = " << (cfg.workload.scramble ? "true" : "false") << "\n";
  o << "read_ratio = " << fmt(cfg.workload.read_ratio) << "\n";
  o << "op_count = " << cfg.workload.op_count << "\n";
  o << "compute_gap = " << cfg.workload.compute_gap << "\n";
  o << "trace_file = " << cfg.workload.trace_file << "\n";
  o << "cpu = " << cfg.workload.cpu << "\n";
  o << "\n[multi_tenant]\n";
  o << "filler_mib = " << cfg.multi_tenant.filler_mib << "\n";
  o << "filler_dwell_ops = " << cfg.multi_tenant.filler_dwell_ops << "\n";
  o << "filler_cpu = " << cfg.multi_tenant.filler_cpu << "\n";
  return o.str();
}

void resolve_config(RunConfig& cfg) {
  if (cfg.topo.nodes.empty()) cfg.topo.nodes = default_nodes();

  switch (cfg.scenario) {
    case ScenarioKind::Interleaved:
      cfg.data_policy = DataPolicy::Interleave;
      cfg.autonuma.enabled = false;
      break;
    case ScenarioKind::Startup:
      cfg.workload.populate = true;
      cfg.workload.op_count = 0;
      break;
    case ScenarioKind::Thp:
      cfg.thp = true;
      break;
    default:
      break;
  }

  Topology topo(cfg.topo);  // validates nodes and the distance matrix

  if (cfg.workload.footprint_mib == 0)
    throw ConfigError("workload footprint must be at least 1 MiB");
  if (cfg.workload.cpu >= topo.total_cpus())
    throw ConfigError("workload cpu out of range");
  if (cfg.workload.read_ratio < 0.0 || cfg.workload.read_ratio > 1.0)
    throw ConfigError("read_ratio must lie in [0, 1]");
  if (cfg.workload.op_count > 0 &&
      cfg.workload.dist == Distribution::Zipfian &&
      (cfg.workload.theta <= 0.0 || cfg.workload.theta >= 1.0))
    throw ConfigError("zipfian theta must lie in (0, 1)");
  if (cfg.engine.sample_window == 0)
    throw ConfigError("sample_window must be positive");
  if (cfg.reclaim_batch == 0) throw ConfigError("reclaim batch must be > 0");
  if (cfg.topo.low_watermark_pct < cfg.topo.min_watermark_pct)
    throw ConfigError("low watermark below min watermark");

  if (cfg.scenario == ScenarioKind::MultiTenant) {
    if (cfg.multi_tenant.filler_cpu >= topo.total_cpus())
      throw ConfigError("filler cpu out of range");
    std::uint64_t dram_pages = 0, need = 0;
    for (const auto& n : topo.nodes())
      if (n.tier() == Tier::Dram) {
        dram_pages += n.capacity_pages();
        need += n.capacity_pages() - n.low_watermark();
      }
    if (cfg.multi_tenant.filler_mib == 0)
      cfg.multi_tenant.filler_mib =
          (dram_pages * kPageSize + (1024 * 1024 - 1)) / (1024 * 1024);
    std::uint64_t filler_pages =
        cfg.multi_tenant.filler_mib * (1024 * 1024 / kPageSize);
    if (filler_pages < need)
      throw ConfigError(
          "multi_tenant filler too small to push DRAM below its low "
          "watermark");
    if (cfg.multi_tenant.filler_dwell_ops == 0)
      cfg.multi_tenant.filler_dwell_ops =
          std::max<std::uint64_t>(1, cfg.workload.op_count / 4);
  }
}

}  // namespace tierpt
