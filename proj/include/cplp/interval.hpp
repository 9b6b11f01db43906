#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace cplp {

using Time = double;
using VertexId = std::int32_t;
using EdgeId = std::int32_t;
using SegmentId = std::int32_t;
using AgentId = std::int32_t;

inline constexpr Time kInf = std::numeric_limits<Time>::infinity();

/// Absolute tolerance used for every time comparison.
inline constexpr Time kTimeEps = 1e-9;

/// Outward padding applied to every stored unsafe interval.
inline constexpr Time kPad = 1e-6;

/// Half-open interval [lo, hi). `hi` may be kInf.
struct Interval {
  Time lo = 0.0;
  Time hi = 0.0;

  [[nodiscard]] bool empty() const { return !(lo < hi); }
  [[nodiscard]] bool contains(Time t) const { return lo <= t && t < hi; }
  [[nodiscard]] Time length() const { return hi - lo; }

  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Sorts and merges overlapping or touching intervals in place. Empty
/// intervals are dropped.
void merge_intervals(std::vector<Interval>& intervals);

/// Complement of a merged unsafe list, restricted to [from, kInf).
/// Safe intervals are reported as closed windows [lo, hi]; the last one may
/// extend to kInf.
std::vector<Interval> complement(std::span<const Interval> merged_unsafe, Time from = 0.0);

/// Smallest t >= window.lo with t outside every interval of `merged_unsafe`
/// and t <= window.hi, if any. Intervals are half-open, so `hi` itself is a
/// legal answer.
bool earliest_free(std::span<const Interval> merged_unsafe, Interval window, Time& out);

}  // namespace cplp
