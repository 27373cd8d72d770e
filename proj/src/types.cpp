#include "tierpt/types.hpp"

namespace tierpt {

const char* to_string(Tier t) {
  return t == Tier::Dram ? "dram" : "nvmm";
}

const char* to_string(DataPolicy p) {
  return p == DataPolicy::FirstTouch ? "first_touch" : "interleave";
}

const char* to_string(PtPolicy p) {
  switch (p) {
    case PtPolicy::FollowData: return "follow_data";
    case PtPolicy::BindAll: return "bind_all";
    case PtPolicy::BindHigh: return "bind_high";
  }
  return "?";
}

const char* to_string(PtLevel l) {
  switch (l) {
    case PtLevel::L1: return "L1";
    case PtLevel::L2: return "L2";
    case PtLevel::L3: return "L3";
    case PtLevel::L4: return "L4";
  }
  return "?";
}

const char* to_string(PageSizeMode m) {
  return m == PageSizeMode::Base4K ? "base4k" : "thp2m";
}

}  // namespace tierpt
