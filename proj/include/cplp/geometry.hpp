#pragma once

#include <cmath>

namespace cplp {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
  friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
  friend Point operator*(double k, Point a) { return {k * a.x, k * a.y}; }
  friend bool operator==(const Point&, const Point&) = default;
};

inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double norm2(Point a) { return dot(a, a); }
inline double norm(Point a) { return std::sqrt(norm2(a)); }
inline double distance(Point a, Point b) { return norm(a - b); }

/// Euclidean distance from p to the closed segment ab.
double point_segment_distance(Point p, Point a, Point b);

/// Minimum distance between closed segments ab and cd.
double segment_segment_distance(Point a, Point b, Point c, Point d);

/// Minimum of the convex quadratic q(t) = |p + v t|^2 over t in [lo, hi].
/// Returns the minimizing t through `argmin` when non-null.
double min_quadratic_distance2(Point p, Point v, double lo, double hi, double* argmin = nullptr);

}  // namespace cplp
