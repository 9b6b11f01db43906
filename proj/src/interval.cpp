#include "cplp/interval.hpp"

#include <algorithm>

namespace cplp {

void merge_intervals(std::vector<Interval>& intervals) {
  std::erase_if(intervals, [](const Interval& i) { return i.empty(); });
  if (intervals.size() < 2) {
    return;
  }
  std::sort(intervals.begin(), intervals.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo || (a.lo == b.lo && a.hi < b.hi); });
  std::size_t out = 0;
  for (std::size_t i = 1; i < intervals.size(); ++i) {
    if (intervals[i].lo <= intervals[out].hi) {
      intervals[out].hi = std::max(intervals[out].hi, intervals[i].hi);
    } else {
      intervals[++out] = intervals[i];
    }
  }
  intervals.resize(out + 1);
}

std::vector<Interval> complement(std::span<const Interval> merged_unsafe, Time from) {
  std::vector<Interval> safe;
  Time cursor = from;
  for (const auto& u : merged_unsafe) {
    if (u.hi <= cursor) {
      continue;
    }
    if (u.lo > cursor) {
      safe.push_back({cursor, u.lo});
    }
    cursor = u.hi;
    if (cursor == kInf) {
      return safe;
    }
  }
  safe.push_back({cursor, kInf});
  return safe;
}

bool earliest_free(std::span<const Interval> merged_unsafe, Interval window, Time& out) {
  Time t = window.lo;
  auto it = std::upper_bound(merged_unsafe.begin(), merged_unsafe.end(), t,
                             [](Time value, const Interval& i) { return value < i.hi; });
  // `it` is the first interval whose hi > t.
  for (; it != merged_unsafe.end(); ++it) {
    if (it->lo > t) {
      break;
    }
    t = it->hi;
  }
  if (t > window.hi || t == kInf) {
    return false;
  }
  out = t;
  return true;
}

}  // namespace cplp
