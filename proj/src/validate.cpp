#include "cplp/validate.hpp"

#include <algorithm>
#include <cmath>

namespace cplp {

namespace {

// Linear motion p(t) = origin + velocity * (t - t0) on [t0, t1].
struct Piece {
  Time t0;
  Time t1;
  Point origin;
  Point velocity;
};

std::vector<Piece> pieces_of(const Roadmap& roadmap, const Plan& plan) {
  std::vector<Piece> out;
  for (const auto& a : plan.actions()) {
    if (a.is_move()) {
      const Edge& e = roadmap.edge(a.edge);
      const Point from = roadmap.position(e.from);
      const Point to = roadmap.position(e.to);
      out.push_back({a.start, a.end, from, (1.0 / (a.end - a.start)) * (to - from)});
    } else {
      out.push_back({a.start, a.end, roadmap.position(a.vertex), {}});
    }
  }
  out.push_back({plan.end_time(), kInf, roadmap.position(plan.end_vertex()), {}});
  return out;
}

// Relative displacement at time lo is p, changing by v per unit time.
void check_pair(const Piece& a, const Piece& b, double limit2, AgentId ia, AgentId ib, std::vector<Collision>& out) {
  const Time lo = std::max(a.t0, b.t0);
  const Time hi = std::min(a.t1, b.t1);
  if (lo > hi) {
    return;
  }
  const Point pa = a.origin + (lo - a.t0) * a.velocity;
  const Point pb = b.origin + (lo - b.t0) * b.velocity;
  const Point p = pa - pb;
  const Point v = a.velocity - b.velocity;
  const double span = hi - lo;  // may be kInf for two terminal waits
  double argmin = 0.0;
  const double d2 = min_quadratic_distance2(p, v, 0.0, span, &argmin);
  if (!(d2 < limit2)) {
    return;
  }
  // Window where |p + v s|^2 < limit2, clipped to [0, span].
  Time begin = 0.0;
  Time end = span;
  const double qa = norm2(v);
  if (qa > 0.0) {
    const double qb = 2.0 * dot(p, v);
    const double qc = norm2(p) - limit2;
    const double disc = std::sqrt(std::max(0.0, qb * qb - 4.0 * qa * qc));
    begin = std::max(0.0, (-qb - disc) / (2.0 * qa));
    end = std::min(span, (-qb + disc) / (2.0 * qa));
  }
  Collision c{std::min(ia, ib), std::max(ia, ib), lo + begin, lo + end, std::sqrt(d2)};
  if (!out.empty()) {
    Collision& last = out.back();
    if (last.agent1 == c.agent1 && last.agent2 == c.agent2 && c.begin <= last.end + kTimeEps) {
      last.end = std::max(last.end, c.end);
      last.min_distance = std::min(last.min_distance, c.min_distance);
      return;
    }
  }
  out.push_back(c);
}

}  // namespace

std::vector<Collision> validate(const Roadmap& roadmap, std::span<const Plan> plans) {
  // A tiny relative tolerance keeps exact tangency (distance 2r) legal
  // despite rounding in the squared-distance evaluation.
  const double limit = 2.0 * roadmap.agent_radius();
  const double limit2 = limit * limit * (1.0 - 1e-12);

  std::vector<std::vector<Piece>> all;
  all.reserve(plans.size());
  for (const auto& plan : plans) {
    all.push_back(pieces_of(roadmap, plan));
  }

  std::vector<Collision> out;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    for (std::size_t j = i + 1; j < plans.size(); ++j) {
      const auto& a = all[i];
      const auto& b = all[j];
      std::size_t x = 0;
      std::size_t y = 0;
      while (x < a.size() && y < b.size()) {
        check_pair(a[x], b[y], limit2, plans[i].agent(), plans[j].agent(), out);
        if (a[x].t1 < b[y].t1) {
          ++x;
        } else if (b[y].t1 < a[x].t1) {
          ++y;
        } else {
          ++x;
          ++y;
        }
      }
    }
  }
  return out;
}

}  // namespace cplp
