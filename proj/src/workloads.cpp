#include "tierpt/workloads.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace tierpt {

double zeta(std::uint64_t n, double theta) {
  double sum = 0.0;
  for (std::uint64_t i = 1; i <= n; ++i)
    sum += 1.0 / std::pow(static_cast<double>(i), theta);
  return sum;
}

ZipfianGenerator::ZipfianGenerator(std::uint64_t n, double theta)
    : n_(n), theta_(theta) {
  if (n == 0) throw InvalidOperation("zipfian over empty range");
  if (theta <= 0.0 || theta >= 1.0)
    throw InvalidOperation("zipfian theta must be in (0, 1)");
  zetan_ = zeta(n, theta);
  alpha_ = 1.0 / (1.0 - theta);
  eta_ = (1.0 - std::pow(2.0 / static_cast<double>(n), 1.0 - theta)) /
         (1.0 - zeta(2, theta) / zetan_);
}

std::uint64_t ZipfianGenerator::next(std::mt19937_64& rng) {
  double u = uniform01(rng);
  double uz = u * zetan_;
  if (uz < 1.0) return 0;
  if (uz < 1.0 + std::pow(0.5, theta_)) return 1;
  auto rank = static_cast<std::uint64_t>(
      static_cast<double>(n_) * std::pow(eta_ * u - eta_ + 1.0, alpha_));
  return rank >= n_ ? n_ - 1 : rank;
}

std::uint64_t fnv1a64(std::uint64_t x) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (int i = 0; i < 8; ++i) {
    h ^= x >> i * 8 & 0xff;
    h *= 0x100000001b3ull;
  }
  return h;
}

AccessStream::AccessStream(const WorkloadSpec& spec, PageSizeMode mode,
                           std::uint64_t seed)
    : spec_(spec),
      page_shift_(mode == PageSizeMode::Base4K ? kPageShift : kHugePageShift),
      rng_(seed) {
  std::uint64_t page_size = 1ull << page_shift_;
  pages_ = (spec.footprint_bytes + page_size - 1) / page_size;
  if (pages_ == 0) throw InvalidOperation("workload with empty footprint");
  if (spec.base_va % page_size != 0)
    throw InvalidOperation("workload base address not page aligned");
  populate_total_ = spec.populate ? pages_ : 0;
  if (spec.access.op_count > 0 && spec.access.dist == Distribution::Zipfian)
    zipf_.emplace(pages_, spec.access.theta);
}

VirtAddr AccessStream::va_of_page(std::uint64_t page) const {
  return spec_.base_va + (page << page_shift_);
}

std::optional<Op> AccessStream::next() {
  if (populate_emitted_ < populate_total_) {
    Op op{va_of_page(populate_emitted_), true, true};
    populate_emitted_++;
    emitted_++;
    return op;
  }
  if (access_emitted_ >= spec_.access.op_count) return std::nullopt;
  std::uint64_t page;
  if (spec_.access.dist == Distribution::Zipfian) {
    std::uint64_t rank = zipf_->next(rng_);
    page = spec_.access.scramble ? fnv1a64(rank) % pages_ : rank;
  } else {
    page = bounded(rng_, pages_);
  }
  bool write = uniform01(rng_) >= spec_.access.read_ratio;
  // Touch a non-zero offset so offset handling stays honest downstream.
  VirtAddr va = va_of_page(page) | (page << 3 & (kPageSize - 1));
  access_emitted_++;
  emitted_++;
  return Op{va, write, false};
}

std::vector<TraceRecord> load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SimError("cannot open trace file: " + path);
  std::vector<TraceRecord> recs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string kind, va_s;
    CpuId cpu;
    if (!(ls >> kind >> va_s >> cpu) || (kind != "R" && kind != "W"))
      throw SimError("trace parse error at line " + std::to_string(lineno));
    VirtAddr va = 0;
    try {
      va = std::stoull(va_s, nullptr, 16);
    } catch (const std::exception&) {
      throw SimError("trace parse error at line " + std::to_string(lineno));
    }
    recs.push_back({va, kind == "W", cpu});
  }
  return recs;
}

void save_trace(const std::string& path, std::span<const TraceRecord> recs) {
  std::ofstream out(path);
  if (!out) throw SimError("cannot open trace file for writing: " + path);
  char buf[64];
  for (const TraceRecord& r : recs) {
    std::snprintf(buf, sizeof buf, "%c %llx %u\n", r.is_write ? 'W' : 'R',
                  static_cast<unsigned long long>(r.va), r.cpu);
    out << buf;
  }
}

const char* to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::FullSystem: return "full_system";
    case ScenarioKind::MultiTenant: return "multi_tenant";
    case ScenarioKind::Interleaved: return "interleaved";
    case ScenarioKind::Startup: return "startup";
    case ScenarioKind::Thp: return "thp";
  }
  return "?";
}

}  // namespace tierpt
