#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "getad/road_graph.hpp"
#include "getad/trajectory_store.hpp"

namespace getad {

enum class DetourMode { constrained, unconstrained };

/// What the constrained bound limits.
enum class DetourBound {
  replacement_length,  // segments spliced in <= ceil(max_fraction * m)
  total_growth,        // new length - m <= ceil(max_fraction * m)
};

struct DetourSpec {
  DetourMode mode = DetourMode::constrained;
  double max_fraction = 0.2;
  DetourBound bound = DetourBound::replacement_length;
  std::uint64_t rng_seed = 0;
  std::size_t max_retries = 32;

  void validate() const;
  /// ceil(max_fraction * m), robust to representation error in the product.
  std::size_t cap(std::size_t m) const;
};

DetourMode parse_detour_mode(const std::string& s);

struct Detour {
  Trajectory trajectory;
  std::size_t window_begin = 0;  // first removed position
  std::size_t window_end = 0;    // last removed position (inclusive)
  std::vector<SegmentId> replacement;
};

/// Removes a random interior window [i, j] from the network, reroutes
/// v_{i-1} -> v_{j+1} on the remaining graph, and splices the reroute in.
/// Returns nullopt once max_retries windows fail. Throws
/// std::invalid_argument for trajectories shorter than 4 segments or with
/// unknown segments.
std::optional<Detour> make_detour(const RoadNetwork& net, const Trajectory& traj,
                                  const DetourSpec& spec, std::mt19937_64& rng);

enum class Label { normal, anomalous };

struct LabeledItem {
  Trajectory trajectory;
  Label label = Label::normal;
  std::string provenance;
};

struct LabeledSet {
  std::vector<LabeledItem> items;
  std::size_t anomalies() const;
};

/// Converts floor(rate * N) normals into detours, skipping trajectories that
/// cannot be converted. Output keeps input order. Throws std::runtime_error
/// when the requested count is zero or cannot be reached.
LabeledSet build_eval_set(const RoadNetwork& net, std::span<const Trajectory> normals, double rate,
                          const DetourSpec& spec);

void write_labeled(std::ostream& out, const LabeledSet& set);
LabeledSet read_labeled(std::istream& in);
void save_labeled(const std::filesystem::path& file, const LabeledSet& set);
LabeledSet load_labeled(const std::filesystem::path& file);

/// Subnetwork induced by the given segment ids (used to keep generated
/// detours inside a training vocabulary).
RoadNetwork restrict_network(const RoadNetwork& net, std::span<const SegmentId> keep);

}  // namespace getad
