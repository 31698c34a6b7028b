#pragma once

#include <algorithm>
#include <functional>
#include <span>
#include <random>
#include <vector>

#include "getad/gradcheck.hpp"
#include "getad/params.hpp"
#include "getad/road_graph.hpp"
#include "getad/synth_world.hpp"

namespace testing {

// Segment with the given id running from node a to node b.
inline getad::SegmentRecord seg(getad::SegmentId id, getad::NodeId a, getad::NodeId b,
                                int cls = 0) {
  getad::SegmentRecord s;
  s.id = id;
  s.tail_node = a;
  s.head_node = b;
  s.road_class = cls;
  return s;
}

// One-way chain 1 -> 2 -> ... -> n.
inline getad::RoadNetwork path_network(std::size_t n) {
  std::vector<getad::SegmentRecord> segs;
  for (std::size_t i = 0; i < n; ++i)
    segs.push_back(seg(static_cast<getad::SegmentId>(i + 1), static_cast<getad::NodeId>(i),
                       static_cast<getad::NodeId>(i + 1)));
  return getad::RoadNetwork(std::move(segs), {"residential"});
}

inline getad::RoadNetwork grid(std::size_t w, std::size_t h, std::uint64_t seed = 1) {
  getad::GridSpec spec;
  spec.width = w;
  spec.height = h;
  spec.seed = seed;
  return getad::grid_network(spec);
}

// Random walk of up to len segments following successors.
inline std::vector<getad::SegIndex> random_walk(const getad::RoadNetwork& net, std::size_t len,
                                                std::mt19937_64& rng) {
  std::vector<getad::SegIndex> out;
  std::uniform_int_distribution<std::size_t> pick(0, net.size() - 1);
  out.push_back(static_cast<getad::SegIndex>(pick(rng)));
  while (out.size() < len) {
    auto s = net.successors(out.back());
    if (s.empty()) break;
    std::uniform_int_distribution<std::size_t> k(0, s.size() - 1);
    out.push_back(s[k(rng)]);
  }
  return out;
}

// Unit-weight Dijkstra with a binary heap, independent of the BFS code.
inline std::vector<std::uint32_t> dijkstra(const getad::RoadNetwork& net, getad::SegIndex src) {
  const std::uint32_t inf = ~0u;
  std::vector<std::uint32_t> d(net.size(), inf);
  using Item = std::pair<std::uint32_t, getad::SegIndex>;
  const auto edges = net.edges();
  std::vector<Item> heap{{0, src}};
  d[src] = 0;
  auto cmp = [](const Item& a, const Item& b) { return a.first > b.first; };
  while (!heap.empty()) {
    std::pop_heap(heap.begin(), heap.end(), cmp);
    auto [du, u] = heap.back();
    heap.pop_back();
    if (du > d[u]) continue;
    for (auto e : edges)
      if (e.first == u && du + 1 < d[e.second]) {
        d[e.second] = du + 1;
        heap.push_back({du + 1, e.second});
        std::push_heap(heap.begin(), heap.end(), cmp);
      }
  }
  return d;
}

inline getad::Tensor64 randn(std::size_t r, std::size_t c, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  getad::Tensor64 t(r, c);
  for (auto& v : t.values()) v = n(rng);
  return t;
}

using Body = std::function<getad::ad::Var(getad::Binder&, std::span<const getad::ad::Var>)>;

// Gradcheck over extra inputs plus every parameter of ps.
inline getad::GradcheckReport check_params(const getad::ParamSet& ps,
                                           std::vector<getad::Tensor64> extra, const Body& body,
                                           double eps = 1e-3, double tol = 1e-4) {
  const std::size_t n_extra = extra.size();
  for (const auto& [name, t] : ps.entries()) extra.push_back(t.cast<double>());
  getad::Composite f = [&](getad::ad::Graph& g, std::span<const getad::ad::Var> in) {
    getad::Binder bind(g, ps);
    std::size_t k = n_extra;
    for (const auto& [name, t] : ps.entries()) bind.use(name, in[k++]);
    return body(bind, in.first(n_extra));
  };
  return getad::gradcheck(f, std::move(extra), eps, tol);
}

}  // namespace testing
