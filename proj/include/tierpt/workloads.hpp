#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tierpt/types.hpp"

namespace tierpt {

enum class Distribution : std::uint8_t { Zipfian, Uniform };

// Bounded draw from the raw engine output. Deliberately plain modulo:
// std::uniform_int_distribution is not pinned across standard library
// implementations, and reproducibility trumps the tiny modulo bias here.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  return rng() % n;
}

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Power-law ranks in [0, n) via the rejection-free method of Gray et al.,
// as popularized by YCSB. theta must lie in (0, 1).
class ZipfianGenerator {
 public:
  ZipfianGenerator(std::uint64_t n, double theta);

  std::uint64_t next(std::mt19937_64& rng);
  std::uint64_t n() const { return n_; }

 private:
  std::uint64_t n_;
  double theta_;
  double zetan_;
  double alpha_;
  double eta_;
};

double zeta(std::uint64_t n, double theta);

// FNV-1a, used to scatter zipfian ranks across the address space so that
// popular pages are not all neighbours.
std::uint64_t fnv1a64(std::uint64_t x);

struct AccessPhase {
  Distribution dist = Distribution::Zipfian;
  double theta = 0.99;
  bool scramble = true;  // hash ranks onto pages instead of rank order
  double read_ratio = 1.0;
  std::uint64_t op_count = 0;
  std::uint32_t compute_gap = 0;  // non-memory instructions between ops
};

struct WorkloadSpec {
  std::uint64_t footprint_bytes = 0;
  VirtAddr base_va = 0;
  bool populate = true;  // touch every page once, in order, before the phase
  AccessPhase access;
};

struct Op {
  VirtAddr va;
  bool is_write;
  bool populate;  // part of the sequential first-touch sweep
};

// Deterministic op source for one process: optional populate sweep followed
// by the sampled access phase. Each stream owns its RNG.
class AccessStream {
 public:
  AccessStream(const WorkloadSpec& spec, PageSizeMode mode,
               std::uint64_t seed);

  std::optional<Op> next();
  bool populate_done() const { return populate_emitted_ == populate_total_; }
  std::uint64_t pages() const { return pages_; }
  std::uint64_t emitted() const { return emitted_; }

 private:
  VirtAddr va_of_page(std::uint64_t page) const;

  WorkloadSpec spec_;
  std::uint64_t page_shift_;
  std::uint64_t pages_;
  std::uint64_t populate_total_;
  std::uint64_t populate_emitted_ = 0;
  std::uint64_t access_emitted_ = 0;
  std::uint64_t emitted_ = 0;
  std::mt19937_64 rng_;
  std::optional<ZipfianGenerator> zipf_;
};

struct TraceRecord {
  VirtAddr va;
  bool is_write;
  CpuId cpu;
};

// Text traces, one record per line: R|W <hex va> <cpu>.
std::vector<TraceRecord> load_trace(const std::string& path);
void save_trace(const std::string& path, std::span<const TraceRecord> recs);

enum class ScenarioKind : std::uint8_t {
  FullSystem,   // one benchmark over the whole machine
  MultiTenant,  // a DRAM-hogging filler starts first, then the benchmark
  Interleaved,  // benchmark with interleaved placement, promotion off
  Startup,      // populate only; measures fault-time placement
  Thp,          // benchmark with 2 MiB mappings
};

const char* to_string(ScenarioKind k);

}  // namespace tierpt
