#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tierpt {

// A frame number packs the owning node into the high bits so that tier and
// latency lookups never need a hash table on the access fast path.
using Pfn = std::uint64_t;
using NodeId = std::uint32_t;
using ProcessId = std::uint32_t;
using CpuId = std::uint32_t;
using Cycles = std::uint64_t;
using VirtAddr = std::uint64_t;

inline constexpr Pfn kNullPfn = 0;
inline constexpr int kPfnNodeShift = 40;

inline constexpr std::uint64_t kPageShift = 12;
inline constexpr std::uint64_t kPageSize = 1ull << kPageShift;
inline constexpr std::uint64_t kIndexBits = 9;
inline constexpr std::uint64_t kEntriesPerPage = 1ull << kIndexBits;
inline constexpr std::uint64_t kVaBits = 48;
inline constexpr std::uint64_t kHugePageShift = 21;
inline constexpr std::uint64_t kHugePageSize = 1ull << kHugePageShift;
inline constexpr std::uint64_t kFramesPerHugePage = kHugePageSize / kPageSize;

enum class Tier : std::uint8_t { Dram, Nvmm };

enum class DataPolicy : std::uint8_t { FirstTouch, Interleave };

// FollowData places every table page like a data page. BindAll pins all four
// levels to DRAM. BindHigh pins only L1..L3 and lets the leaf level follow.
enum class PtPolicy : std::uint8_t { FollowData, BindAll, BindHigh };

enum class PtLevel : std::uint8_t { L1 = 1, L2 = 2, L3 = 3, L4 = 4 };

enum class PageSizeMode : std::uint8_t { Base4K, Thp2M };

constexpr int level_index(PtLevel l) { return static_cast<int>(l) - 1; }

inline Pfn make_pfn(NodeId node, std::uint64_t frame_index) {
  return (static_cast<std::uint64_t>(node) + 1) << kPfnNodeShift | frame_index;
}
inline NodeId pfn_node(Pfn pfn) {
  return static_cast<NodeId>((pfn >> kPfnNodeShift) - 1);
}
inline std::uint64_t pfn_index(Pfn pfn) {
  return pfn & ((1ull << kPfnNodeShift) - 1);
}

// What a page is for, from the allocator's point of view. Placement policies
// only care about the distinction table-vs-data and, for tables, the level.
struct PageKind {
  bool is_table = false;
  PtLevel level = PtLevel::L4;

  static PageKind data() { return {}; }
  static PageKind table(PtLevel l) { return {true, l}; }
};

struct SimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Misuse of the model (double free, walking an unmapped address, ...). These
// indicate a bug in the caller, not a simulated condition.
struct InvalidOperation : SimError {
  using SimError::SimError;
};

struct ConfigError : SimError {
  using SimError::SimError;
};

const char* to_string(Tier t);
const char* to_string(DataPolicy p);
const char* to_string(PtPolicy p);
const char* to_string(PtLevel l);
const char* to_string(PageSizeMode m);

}  // namespace tierpt
