#pragma once

#include <span>
#include <vector>

#include "cplp/plan.hpp"
#include "cplp/roadmap.hpp"

namespace cplp {

/// A time window during which two agents' disks overlap.
struct Collision {
  AgentId agent1;
  AgentId agent2;
  Time begin;
  Time end;
  double min_distance;
};

/// Exact continuous check of a plan set, each plan followed by its implicit
/// terminal wait. Positions are piecewise linear in time, so per pair of
/// concurrent pieces the squared distance is a convex quadratic minimized in
/// closed form. Distance exactly 2r is not a collision. Each agent is
/// present from its plan's start_time onward.
std::vector<Collision> validate(const Roadmap& roadmap, std::span<const Plan> plans);

}  // namespace cplp
