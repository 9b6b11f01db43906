#include "cplp/roadmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <queue>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace cplp {

Roadmap::Roadmap(std::vector<Point> vertices, std::vector<std::pair<VertexId, VertexId>> segments,
                 double agent_radius, double agent_speed)
    : vertices_(std::move(vertices)), segments_(std::move(segments)), radius_(agent_radius), speed_(agent_speed) {
  if (!(radius_ > 0.0) || !std::isfinite(radius_)) {
    throw std::invalid_argument("agent_radius must be positive and finite");
  }
  if (!(speed_ > 0.0) || !std::isfinite(speed_)) {
    throw std::invalid_argument("agent_speed must be positive and finite");
  }
  if (vertices_.empty()) {
    throw std::invalid_argument("roadmap has no vertices");
  }
  for (const auto& p : vertices_) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw std::invalid_argument("vertex coordinates must be finite");
    }
  }

  const auto n = static_cast<VertexId>(vertices_.size());
  std::set<std::pair<VertexId, VertexId>> seen;
  out_.resize(vertices_.size());
  in_.resize(vertices_.size());
  edges_.reserve(2 * segments_.size());
  for (std::size_t k = 0; k < segments_.size(); ++k) {
    const auto [a, b] = segments_[k];
    if (a < 0 || b < 0 || a >= n || b >= n) {
      throw std::invalid_argument("edge references an unknown vertex");
    }
    if (a == b) {
      throw std::invalid_argument("self-loop edge");
    }
    if (!seen.insert({std::min(a, b), std::max(a, b)}).second) {
      throw std::invalid_argument("duplicate edge");
    }
    const double len = distance(position(a), position(b));
    if (!(len > 0.0)) {
      throw std::invalid_argument("edge between coincident vertices");
    }
    max_segment_length_ = std::max(max_segment_length_, len);
    const auto seg = static_cast<SegmentId>(k);
    edges_.push_back({a, b, seg, len / speed_});
    edges_.push_back({b, a, seg, len / speed_});
  }
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    out_[static_cast<std::size_t>(edges_[e].from)].push_back(static_cast<EdgeId>(e));
    in_[static_cast<std::size_t>(edges_[e].to)].push_back(static_cast<EdgeId>(e));
  }

  // Connectivity: every segment is traversable both ways, so one BFS suffices.
  std::vector<char> reached(vertices_.size(), 0);
  std::vector<VertexId> stack{0};
  reached[0] = 1;
  std::size_t count = 1;
  while (!stack.empty()) {
    const VertexId v = stack.back();
    stack.pop_back();
    for (EdgeId e : out_edges(v)) {
      const auto w = static_cast<std::size_t>(edge(e).to);
      if (!reached[w]) {
        reached[w] = 1;
        ++count;
        stack.push_back(edge(e).to);
      }
    }
  }
  if (count != vertices_.size()) {
    throw std::invalid_argument("roadmap is not connected");
  }
}

EdgeId Roadmap::find_edge(VertexId u, VertexId v) const {
  for (EdgeId e : out_edges(u)) {
    if (edge(e).to == v) {
      return e;
    }
  }
  return -1;
}

std::shared_ptr<const DistanceField> Roadmap::shortest_time_field(VertexId target) const {
  {
    std::lock_guard lock(cache_.mutex);
    if (auto it = cache_.entries.find(target); it != cache_.entries.end()) {
      cache_.order.splice(cache_.order.begin(), cache_.order, it->second.second);
      return it->second.first;
    }
  }
  auto field = std::make_shared<const DistanceField>(compute_distance_field(*this, target));
  std::lock_guard lock(cache_.mutex);
  if (auto it = cache_.entries.find(target); it != cache_.entries.end()) {
    return it->second.first;
  }
  cache_.order.push_front(target);
  cache_.entries.emplace(target, std::make_pair(field, cache_.order.begin()));
  while (cache_.entries.size() > vertices_.size()) {
    cache_.entries.erase(cache_.order.back());
    cache_.order.pop_back();
  }
  return field;
}

std::uint64_t Roadmap::content_hash() const {
  // FNV-1a over the raw bytes of every defining quantity.
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  const std::uint64_t nv = vertices_.size();
  const std::uint64_t ns = segments_.size();
  mix(&nv, sizeof nv);
  mix(&ns, sizeof ns);
  for (const auto& p : vertices_) {
    mix(&p.x, sizeof p.x);
    mix(&p.y, sizeof p.y);
  }
  for (const auto& [a, b] : segments_) {
    mix(&a, sizeof a);
    mix(&b, sizeof b);
  }
  mix(&radius_, sizeof radius_);
  mix(&speed_, sizeof speed_);
  return h;
}

DistanceField compute_distance_field(const Roadmap& roadmap, VertexId target) {
  std::vector<Time> dist(roadmap.num_vertices(), kInf);
  using Entry = std::pair<Time, VertexId>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  dist[static_cast<std::size_t>(target)] = 0.0;
  open.push({0.0, target});
  while (!open.empty()) {
    const auto [d, v] = open.top();
    open.pop();
    if (d > dist[static_cast<std::size_t>(v)]) {
      continue;
    }
    for (EdgeId e : roadmap.in_edges(v)) {
      const Edge& edge = roadmap.edge(e);
      const Time nd = d + edge.duration;
      auto& slot = dist[static_cast<std::size_t>(edge.from)];
      if (nd < slot) {
        slot = nd;
        open.push({nd, edge.from});
      }
    }
  }
  return DistanceField(target, std::move(dist));
}

namespace {

double finite_number(const nlohmann::json& j, const char* what) {
  if (!j.is_number()) {
    throw std::invalid_argument(std::string(what) + " must be a number");
  }
  const double v = j.get<double>();
  if (!std::isfinite(v)) {
    throw std::invalid_argument(std::string(what) + " must be finite");
  }
  return v;
}

}  // namespace

std::unique_ptr<Roadmap> roadmap_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("vertices") || !doc.contains("edges") ||
      !doc.contains("agent_radius") || !doc.contains("agent_speed")) {
    throw std::invalid_argument("roadmap document needs vertices, edges, agent_radius, agent_speed");
  }
  std::vector<Point> vertices;
  for (const auto& p : doc.at("vertices")) {
    if (!p.is_array() || p.size() != 2) {
      throw std::invalid_argument("vertex must be [x, y]");
    }
    vertices.push_back({finite_number(p[0], "vertex x"), finite_number(p[1], "vertex y")});
  }
  std::vector<std::pair<VertexId, VertexId>> segments;
  for (const auto& e : doc.at("edges")) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer()) {
      throw std::invalid_argument("edge must be [i, j] with integer ids");
    }
    segments.emplace_back(e[0].get<VertexId>(), e[1].get<VertexId>());
  }
  return std::make_unique<Roadmap>(std::move(vertices), std::move(segments),
                                   finite_number(doc.at("agent_radius"), "agent_radius"),
                                   finite_number(doc.at("agent_speed"), "agent_speed"));
}

nlohmann::json roadmap_to_json(const Roadmap& roadmap) {
  nlohmann::json doc;
  auto& vs = doc["vertices"] = nlohmann::json::array();
  for (const auto& p : roadmap.vertices()) {
    vs.push_back({p.x, p.y});
  }
  auto& es = doc["edges"] = nlohmann::json::array();
  for (const auto& [a, b] : roadmap.segments()) {
    es.push_back({a, b});
  }
  doc["agent_radius"] = roadmap.agent_radius();
  doc["agent_speed"] = roadmap.agent_speed();
  return doc;
}

}  // namespace cplp
