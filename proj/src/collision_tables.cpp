#include "cplp/collision_tables.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>
#include <unordered_map>

namespace cplp {

OffsetIntervalList unsafe_tau_edge_vertex(Point a, Point b, Point v, double radius, double speed) {
  const double len = distance(a, b);
  if (len == 0.0) {
    return {};
  }
  const Point u = (1.0 / len) * (b - a);
  const Point w = a - v;
  const double wu = dot(w, u);
  const double disc = wu * wu - norm2(w) + 4.0 * radius * radius;
  if (disc <= 0.0) {
    return {};
  }
  const double root = std::sqrt(disc);
  // Positions along the segment (arc length) where the distance equals 2r.
  const double s_lo = std::max(-wu - root, 0.0);
  const double s_hi = std::min(-wu + root, len);
  if (!(s_lo < s_hi)) {
    return {};
  }
  return {{s_lo / speed, s_hi / speed}};
}

namespace {

// Squared distance between two agents that started their traversals at 0
// and delta, minimized over the common active window.
struct EdgePairGeometry {
  Point offset;  // a1 - a2
  Point rel;     // s (u1 - u2)
  Point lag;     // s u2
  double d1;
  double d2;

  [[nodiscard]] double min_gap2(double delta) const {
    const double lo = std::max(0.0, delta);
    const double hi = std::min(d1, delta + d2);
    if (lo > hi) {
      return kInf;
    }
    const Point p = offset + delta * lag;
    return min_quadratic_distance2(p, rel, lo, hi);
  }
};

}  // namespace

OffsetIntervalList unsafe_delta_edge_edge(Point a1, Point b1, Point a2, Point b2, double radius, double speed) {
  const double len1 = distance(a1, b1);
  const double len2 = distance(a2, b2);
  if (len1 == 0.0 || len2 == 0.0) {
    return {};
  }
  const double threshold = 4.0 * radius * radius;
  const Point u1 = (1.0 / len1) * (b1 - a1);
  const Point u2 = (1.0 / len2) * (b2 - a2);
  const EdgePairGeometry g{a1 - a2, speed * (u1 - u2), speed * u2, len1 / speed, len2 / speed};

  // The gap function is convex in delta (partial minimum of a jointly convex
  // quadratic over a convex polygon), so the unsafe set is one interval.
  double lo = -g.d2;
  double hi = g.d1;
  constexpr double kGolden = 0.6180339887498949;
  double x1 = hi - kGolden * (hi - lo);
  double x2 = lo + kGolden * (hi - lo);
  double f1 = g.min_gap2(x1);
  double f2 = g.min_gap2(x2);
  for (int i = 0; i < 200 && hi - lo > 1e-13; ++i) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kGolden * (hi - lo);
      f1 = g.min_gap2(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kGolden * (hi - lo);
      f2 = g.min_gap2(x2);
    }
  }
  double best = f1 <= f2 ? x1 : x2;
  double best_val = std::min(f1, f2);
  for (double probe : {-g.d2, g.d1}) {
    if (const double v = g.min_gap2(probe); v < best_val) {
      best_val = v;
      best = probe;
    }
  }
  if (!(best_val < threshold)) {
    return {};
  }

  auto boundary = [&](double inside, double outside) {
    if (g.min_gap2(outside) < threshold) {
      return outside;
    }
    for (int i = 0; i < 200 && std::abs(outside - inside) > 1e-13; ++i) {
      const double mid = 0.5 * (inside + outside);
      (g.min_gap2(mid) < threshold ? inside : outside) = mid;
    }
    return 0.5 * (inside + outside);
  };
  const double left = boundary(best, -g.d2);
  const double right = boundary(best, g.d1);
  if (!(left < right)) {
    // Collision only at an isolated offset; keep a degenerate-but-nonempty
    // interval so padding still covers it.
    return {{left, left}};
  }
  return {{left, right}};
}

namespace {

Interval pad(Interval i) { return {i.lo - kPad, i.hi + kPad}; }

Interval reversed_tau(Interval tau, double duration) { return {duration - tau.hi, duration - tau.lo}; }

struct Candidates {
  std::vector<std::pair<VertexId, VertexId>> vertex_vertex;
  std::vector<std::pair<SegmentId, VertexId>> segment_vertex;
  std::vector<std::pair<SegmentId, SegmentId>> segment_segment;
};

Candidates enumerate_candidates(const Roadmap& roadmap) {
  const double r = roadmap.agent_radius();
  double total = 0.0;
  for (const auto& [a, b] : roadmap.segments()) {
    total += distance(roadmap.position(a), roadmap.position(b));
  }
  const double mean = roadmap.num_segments() > 0 ? total / static_cast<double>(roadmap.num_segments()) : 0.0;
  const double cell = std::max(4.0 * r, mean);

  std::unordered_map<std::uint64_t, std::vector<std::int32_t>> grid;
  auto key = [](std::int64_t ix, std::int64_t iy) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(ix)) << 32) |
           static_cast<std::uint32_t>(iy);
  };
  std::vector<std::uint64_t> scratch;
  auto cover_box = [&](Point c, double half) {
    const auto x0 = static_cast<std::int64_t>(std::floor((c.x - half) / cell));
    const auto x1 = static_cast<std::int64_t>(std::floor((c.x + half) / cell));
    const auto y0 = static_cast<std::int64_t>(std::floor((c.y - half) / cell));
    const auto y1 = static_cast<std::int64_t>(std::floor((c.y + half) / cell));
    for (auto ix = x0; ix <= x1; ++ix) {
      for (auto iy = y0; iy <= y1; ++iy) {
        scratch.push_back(key(ix, iy));
      }
    }
  };
  auto register_object = [&](std::int32_t id) {
    std::sort(scratch.begin(), scratch.end());
    scratch.erase(std::unique(scratch.begin(), scratch.end()), scratch.end());
    for (auto k : scratch) {
      grid[k].push_back(id);
    }
    scratch.clear();
  };

  const auto nv = static_cast<std::int32_t>(roadmap.num_vertices());
  for (VertexId v = 0; v < nv; ++v) {
    cover_box(roadmap.position(v), r);
    register_object(v);
  }
  const double step = 0.5 * cell;
  for (std::size_t k = 0; k < roadmap.num_segments(); ++k) {
    const auto [a, b] = roadmap.segments()[k];
    const Point pa = roadmap.position(a);
    const Point pb = roadmap.position(b);
    const int samples = static_cast<int>(std::ceil(distance(pa, pb) / step));
    for (int i = 0; i <= samples; ++i) {
      const double t = samples == 0 ? 0.0 : static_cast<double>(i) / samples;
      cover_box(pa + t * (pb - pa), 0.5 * step + r);
    }
    register_object(nv + static_cast<std::int32_t>(k));
  }

  std::vector<std::uint64_t> pairs;
  for (auto& [cell_key, ids] : grid) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (std::size_t j = i + 1; j < ids.size(); ++j) {
        const auto lo = static_cast<std::uint32_t>(std::min(ids[i], ids[j]));
        const auto hi = static_cast<std::uint32_t>(std::max(ids[i], ids[j]));
        pairs.push_back((static_cast<std::uint64_t>(lo) << 32) | hi);
      }
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  Candidates out;
  for (auto p : pairs) {
    const auto lo = static_cast<std::int32_t>(p >> 32);
    const auto hi = static_cast<std::int32_t>(p & 0xffffffffULL);
    if (hi < nv) {
      out.vertex_vertex.emplace_back(lo, hi);
    } else if (lo < nv) {
      out.segment_vertex.emplace_back(hi - nv, lo);
    } else {
      out.segment_segment.emplace_back(lo - nv, hi - nv);
    }
  }
  for (std::size_t k = 0; k < roadmap.num_segments(); ++k) {
    out.segment_segment.emplace_back(static_cast<SegmentId>(k), static_cast<SegmentId>(k));
  }
  std::sort(out.segment_segment.begin(), out.segment_segment.end());
  return out;
}

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      fn(i);
    }
    return;
  }
  std::vector<std::jthread> workers;
  for (unsigned w = 0; w < threads; ++w) {
    workers.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += threads) {
        fn(i);
      }
    });
  }
}

struct DirectedPairResult {
  EdgeId e1;
  EdgeId e2;
  Interval delta;
};

}  // namespace

ConflictTables precompute(const Roadmap& roadmap, unsigned threads) {
  const double r = roadmap.agent_radius();
  const double s = roadmap.agent_speed();
  const auto cand = enumerate_candidates(roadmap);

  ConflictTables t;
  t.edge_vertex_.resize(roadmap.num_edges());
  t.vertex_edge_.resize(roadmap.num_vertices());
  t.edge_edge_.resize(roadmap.num_edges());
  t.vertex_vertex_.resize(roadmap.num_vertices());

  for (const auto& [u, v] : cand.vertex_vertex) {
    if (distance(roadmap.position(u), roadmap.position(v)) < 2.0 * r) {
      t.vertex_vertex_[static_cast<std::size_t>(u)].push_back(v);
      t.vertex_vertex_[static_cast<std::size_t>(v)].push_back(u);
    }
  }

  // Every segment is also a candidate against its own endpoints.
  std::vector<std::pair<SegmentId, VertexId>> seg_vertex = cand.segment_vertex;
  for (std::size_t k = 0; k < roadmap.num_segments(); ++k) {
    seg_vertex.emplace_back(static_cast<SegmentId>(k), roadmap.segments()[k].first);
    seg_vertex.emplace_back(static_cast<SegmentId>(k), roadmap.segments()[k].second);
  }
  std::sort(seg_vertex.begin(), seg_vertex.end());
  seg_vertex.erase(std::unique(seg_vertex.begin(), seg_vertex.end()), seg_vertex.end());

  std::vector<OffsetIntervalList> tau_results(seg_vertex.size());
  parallel_for(seg_vertex.size(), threads, [&](std::size_t i) {
    const auto [seg, v] = seg_vertex[i];
    const auto [a, b] = roadmap.segments()[static_cast<std::size_t>(seg)];
    const Point pa = roadmap.position(a);
    const Point pb = roadmap.position(b);
    const Point pv = roadmap.position(v);
    if (point_segment_distance(pv, pa, pb) < 2.0 * r) {
      tau_results[i] = unsafe_tau_edge_vertex(pa, pb, pv, r, s);
    }
  });
  for (std::size_t i = 0; i < seg_vertex.size(); ++i) {
    if (tau_results[i].empty()) {
      continue;
    }
    const auto [seg, v] = seg_vertex[i];
    const EdgeId fwd = 2 * seg;
    const EdgeId rev = 2 * seg + 1;
    const Interval tau = tau_results[i].front();
    const Interval tau_rev = reversed_tau(tau, roadmap.edge(fwd).duration);
    t.edge_vertex_[static_cast<std::size_t>(fwd)].push_back({v, pad(tau)});
    t.edge_vertex_[static_cast<std::size_t>(rev)].push_back({v, pad(tau_rev)});
    t.vertex_edge_[static_cast<std::size_t>(v)].push_back({fwd, pad(tau)});
    t.vertex_edge_[static_cast<std::size_t>(v)].push_back({rev, pad(tau_rev)});
  }

  std::vector<std::vector<DirectedPairResult>> ee_results(cand.segment_segment.size());
  parallel_for(cand.segment_segment.size(), threads, [&](std::size_t i) {
    const auto [k1, k2] = cand.segment_segment[i];
    const auto [a1, b1] = roadmap.segments()[static_cast<std::size_t>(k1)];
    const auto [a2, b2] = roadmap.segments()[static_cast<std::size_t>(k2)];
    if (k1 != k2 && segment_segment_distance(roadmap.position(a1), roadmap.position(b1), roadmap.position(a2),
                                             roadmap.position(b2)) >= 2.0 * r) {
      return;
    }
    for (EdgeId e1 : {2 * k1, 2 * k1 + 1}) {
      for (EdgeId e2 : {2 * k2, 2 * k2 + 1}) {
        if (k1 == k2 && e2 < e1) {
          continue;
        }
        const Edge& x = roadmap.edge(e1);
        const Edge& y = roadmap.edge(e2);
        auto delta = unsafe_delta_edge_edge(roadmap.position(x.from), roadmap.position(x.to),
                                            roadmap.position(y.from), roadmap.position(y.to), r, s);
        if (!delta.empty()) {
          ee_results[i].push_back({e1, e2, delta.front()});
        }
      }
    }
  });
  for (const auto& results : ee_results) {
    for (const auto& [e1, e2, delta] : results) {
      t.edge_edge_[static_cast<std::size_t>(e1)].push_back({e2, pad(delta)});
      if (e1 != e2) {
        t.edge_edge_[static_cast<std::size_t>(e2)].push_back({e1, pad({-delta.hi, -delta.lo})});
      }
    }
  }

  for (auto& list : t.edge_vertex_) {
    std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) { return a.vertex < b.vertex; });
  }
  for (auto& list : t.vertex_edge_) {
    std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) { return a.edge < b.edge; });
  }
  for (auto& list : t.edge_edge_) {
    std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) { return a.other < b.other; });
  }
  for (auto& list : t.vertex_vertex_) {
    std::sort(list.begin(), list.end());
  }
  return t;
}

std::optional<Interval> ConflictTables::edge_edge(EdgeId e1, EdgeId e2) const {
  const auto& list = edge_edge_[idx(e1)];
  auto it = std::lower_bound(list.begin(), list.end(), e2,
                             [](const OffsetWindow& w, EdgeId e) { return w.other < e; });
  if (it != list.end() && it->other == e2) {
    return it->delta;
  }
  return std::nullopt;
}

std::optional<Interval> ConflictTables::edge_vertex(EdgeId e, VertexId v) const {
  const auto& list = edge_vertex_[idx(e)];
  auto it = std::lower_bound(list.begin(), list.end(), v,
                             [](const VertexWindow& w, VertexId x) { return w.vertex < x; });
  if (it != list.end() && it->vertex == v) {
    return it->tau;
  }
  return std::nullopt;
}

bool ConflictTables::vertex_vertex(VertexId u, VertexId v) const {
  if (u == v) {
    return true;
  }
  const auto& list = vertex_vertex_[idx(u)];
  return std::binary_search(list.begin(), list.end(), v);
}

std::size_t ConflictTables::num_edge_edge_entries() const {
  std::size_t n = 0;
  for (const auto& l : edge_edge_) {
    n += l.size();
  }
  return n;
}

std::size_t ConflictTables::num_edge_vertex_entries() const {
  std::size_t n = 0;
  for (const auto& l : edge_vertex_) {
    n += l.size();
  }
  return n;
}

std::size_t ConflictTables::num_vertex_vertex_entries() const {
  std::size_t n = 0;
  for (const auto& l : vertex_vertex_) {
    n += l.size();
  }
  return n;
}

namespace {

constexpr char kMagic[8] = {'C', 'P', 'L', 'P', 'T', 'B', 'L', '\0'};
constexpr std::uint32_t kCacheVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
bool read_pod(std::istream& in, T& value) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&value), sizeof(T)));
}

template <typename T>
void write_lists(std::ostream& out, const std::vector<std::vector<T>>& lists) {
  write_pod(out, static_cast<std::uint64_t>(lists.size()));
  for (const auto& l : lists) {
    write_pod(out, static_cast<std::uint64_t>(l.size()));
    out.write(reinterpret_cast<const char*>(l.data()), static_cast<std::streamsize>(l.size() * sizeof(T)));
  }
}

template <typename T>
bool read_lists(std::istream& in, std::vector<std::vector<T>>& lists, std::size_t expected) {
  std::uint64_t n = 0;
  if (!read_pod(in, n) || n != expected) {
    return false;
  }
  lists.assign(n, {});
  for (auto& l : lists) {
    std::uint64_t m = 0;
    if (!read_pod(in, m) || m > (1ULL << 32)) {
      return false;
    }
    l.resize(m);
    if (!in.read(reinterpret_cast<char*>(l.data()), static_cast<std::streamsize>(m * sizeof(T)))) {
      return false;
    }
  }
  return true;
}

}  // namespace

void save_tables(const std::filesystem::path& path, const Roadmap& roadmap, const ConflictTables& tables) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot write table cache " + path.string());
  }
  out.write(kMagic, sizeof kMagic);
  write_pod(out, kCacheVersion);
  write_pod(out, roadmap.content_hash());
  write_lists(out, tables.edge_vertex_);
  write_lists(out, tables.vertex_edge_);
  write_lists(out, tables.edge_edge_);
  write_lists(out, tables.vertex_vertex_);
}

std::optional<ConflictTables> load_tables(const std::filesystem::path& path, const Roadmap& roadmap) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    return std::nullopt;
  }
  char magic[sizeof kMagic];
  std::uint32_t version = 0;
  std::uint64_t hash = 0;
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0 || !read_pod(in, version) ||
      version != kCacheVersion || !read_pod(in, hash) || hash != roadmap.content_hash()) {
    return std::nullopt;
  }
  ConflictTables t;
  if (!read_lists(in, t.edge_vertex_, roadmap.num_edges()) || !read_lists(in, t.vertex_edge_, roadmap.num_vertices()) ||
      !read_lists(in, t.edge_edge_, roadmap.num_edges()) || !read_lists(in, t.vertex_vertex_, roadmap.num_vertices())) {
    return std::nullopt;
  }
  return t;
}

}  // namespace cplp
