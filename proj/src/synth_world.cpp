#include "getad/synth_world.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace getad {

void GridSpec::validate() const {
  if (width < 3 || height < 3) throw std::invalid_argument("grid: width and height must be >= 3");
  if (!(route_noise >= 0.0 && route_noise < 0.5))
    throw std::invalid_argument("grid: route_noise must be in [0, 0.5)");
}

RoadNetwork grid_network(const GridSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> jitter(80.0, 160.0);
  const std::vector<std::string> classes{"residential", "primary"};

  auto node = [&](std::size_t x, std::size_t y) { return static_cast<NodeId>(y * spec.width + x); };
  std::vector<SegmentRecord> segs;
  SegmentId next_id = 1;
  auto street = [&](NodeId a, NodeId b, int cls) {
    const double len = std::round(jitter(rng) * 10.0) / 10.0;
    const int lanes = cls == 1 ? 2 : 1;
    const double speed = cls == 1 ? 50.0 : 30.0;
    segs.push_back({next_id++, len, cls, lanes, speed, a, b});
    segs.push_back({next_id++, len, cls, lanes, speed, b, a});
  };
  for (std::size_t y = 0; y < spec.height; ++y)
    for (std::size_t x = 0; x + 1 < spec.width; ++x) street(node(x, y), node(x + 1, y), int(y % 2));
  for (std::size_t x = 0; x < spec.width; ++x)
    for (std::size_t y = 0; y + 1 < spec.height; ++y) street(node(x, y), node(x, y + 1), int(x % 2));
  return RoadNetwork(std::move(segs), classes);
}

std::optional<std::vector<SegIndex>> second_shortest_path(const RoadNetwork& net, SegIndex src,
                                                          SegIndex dst) {
  auto best = shortest_path(net, src, dst);
  if (!best || best->size() < 2) return std::nullopt;
  std::optional<std::vector<SegIndex>> alt;
  for (std::size_t i = 0; i + 1 < best->size(); ++i) {
    auto p = shortest_path(net, src, dst, {}, std::make_pair((*best)[i], (*best)[i + 1]));
    if (p && (!alt || p->size() < alt->size())) alt = std::move(p);
  }
  return alt;
}

std::vector<AgentPlan> plan_agents(const RoadNetwork& net, const GridSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<SegIndex> pick(0, static_cast<SegIndex>(net.size() - 1));
  const std::size_t min_hops = std::max<std::size_t>(4, (spec.width + spec.height) / 2);
  std::vector<AgentPlan> out;
  for (std::size_t a = 0; a < spec.n_agents; ++a) {
    AgentPlan plan{"agent" + std::to_string(a), 0, 0};
    for (;;) {
      plan.home = pick(rng);
      plan.work = pick(rng);
      if (plan.home == plan.work) continue;
      auto there = shortest_path(net, plan.home, plan.work);
      auto back = shortest_path(net, plan.work, plan.home);
      if (there && back && there->size() >= min_hops && back->size() >= min_hops) break;
    }
    out.push_back(plan);
  }
  return out;
}

std::vector<Trajectory> generate_trajectories(const RoadNetwork& net, const GridSpec& spec) {
  const auto agents = plan_agents(net, spec);
  std::mt19937_64 rng(spec.seed ^ 0xc2b2ae3d27d4eb4fULL);
  std::bernoulli_distribution noisy(spec.route_noise);

  auto to_ids = [&](const std::vector<SegIndex>& path) {
    std::vector<SegmentId> ids;
    for (SegIndex i : path) ids.push_back(net.segment(i).id);
    return ids;
  };

  std::vector<Trajectory> out;
  for (const auto& plan : agents) {
    const std::pair<SegIndex, SegIndex> od[2] = {{plan.home, plan.work}, {plan.work, plan.home}};
    std::vector<SegmentId> main[2], alt[2];
    for (int k = 0; k < 2; ++k) {
      main[k] = to_ids(*shortest_path(net, od[k].first, od[k].second));
      auto second = second_shortest_path(net, od[k].first, od[k].second);
      alt[k] = second ? to_ids(*second) : main[k];
    }
    for (std::size_t t = 0; t < spec.trips_per_agent; ++t) {
      const int k = static_cast<int>(t % 2);
      Trajectory traj;
      traj.id = plan.agent + "-t" + std::to_string(t);
      traj.agent = plan.agent;
      traj.segments = noisy(rng) ? alt[k] : main[k];
      out.push_back(std::move(traj));
    }
  }
  return out;
}

}  // namespace getad
