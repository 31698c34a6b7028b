#pragma once

#include <cstdint>
#include <vector>

#include "getad/road_graph.hpp"
#include "getad/trajectory_store.hpp"

namespace getad {

/// A width x height grid of intersections whose streets are two-way, plus a
/// population of agents commuting between two fixed places.
struct GridSpec {
  std::size_t width = 10;
  std::size_t height = 10;
  std::uint64_t seed = 1;
  std::size_t n_agents = 20;
  std::size_t trips_per_agent = 40;
  /// Probability that a trip takes the second-shortest route.
  double route_noise = 0.05;

  void validate() const;
};

/// Each street yields two directed segments. Rows and columns alternate
/// between residential and primary class; lengths are jittered per street.
RoadNetwork grid_network(const GridSpec& spec);

struct AgentPlan {
  std::string agent;
  SegIndex home = 0;
  SegIndex work = 0;
};

/// Home/work anchors per agent, drawn from GridSpec::seed.
std::vector<AgentPlan> plan_agents(const RoadNetwork& net, const GridSpec& spec);

/// Trips alternate home->work and work->home. Each follows the shortest
/// route, or with probability route_noise the second-shortest one.
std::vector<Trajectory> generate_trajectories(const RoadNetwork& net, const GridSpec& spec);

/// Best path after forbidding each single transition of the shortest path in
/// turn; nullopt when no alternative exists.
std::optional<std::vector<SegIndex>> second_shortest_path(const RoadNetwork& net, SegIndex src,
                                                          SegIndex dst);

}  // namespace getad
