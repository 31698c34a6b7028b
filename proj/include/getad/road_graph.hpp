#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "getad/tensor.hpp"
#include "getad/trajectory_store.hpp"

namespace getad {

using NodeId = std::int64_t;
/// Dense segment index in [0, |V|).
using SegIndex = std::uint32_t;

struct SegmentRecord {
  SegmentId id = 0;
  double length_m = 1.0;
  int road_class = 0;
  int lanes = 1;
  double maxspeed_kmh = 50.0;
  NodeId tail_node = 0;
  NodeId head_node = 0;

  bool operator==(const SegmentRecord&) const = default;
};

/// Segment-level directed graph: segments are vertices, and u -> v is an edge
/// when u ends where v starts (u != v). Dense indices follow ascending id.
class RoadNetwork {
 public:
  RoadNetwork() = default;
  /// Validates records and builds the line graph. Throws on duplicate ids or
  /// invalid attributes.
  RoadNetwork(std::vector<SegmentRecord> segments, std::vector<std::string> class_names);

  std::size_t size() const { return segments_.size(); }
  std::size_t edge_count() const { return succ_.size(); }
  const SegmentRecord& segment(SegIndex i) const { return segments_[i]; }
  const std::vector<SegmentRecord>& segments() const { return segments_; }
  const std::vector<std::string>& class_names() const { return class_names_; }

  std::optional<SegIndex> find(SegmentId id) const;
  /// Throws std::out_of_range for unknown ids.
  SegIndex index(SegmentId id) const;

  std::span<const SegIndex> successors(SegIndex u) const {
    return {succ_.data() + succ_off_[u], succ_off_[u + 1] - succ_off_[u]};
  }
  std::span<const SegIndex> predecessors(SegIndex v) const {
    return {pred_.data() + pred_off_[v], pred_off_[v + 1] - pred_off_[v]};
  }
  bool adjacent(SegIndex u, SegIndex v) const;
  /// All (u, v) edges in ascending order.
  std::vector<std::pair<SegIndex, SegIndex>> edges() const;

  /// True when every consecutive pair of the segment sequence is an edge.
  bool is_connected_path(std::span<const SegmentId> segs) const;

 private:
  std::vector<SegmentRecord> segments_;
  std::vector<std::string> class_names_;
  std::map<SegmentId, SegIndex> index_;
  std::vector<std::size_t> succ_off_, pred_off_;
  std::vector<SegIndex> succ_, pred_;
};

RoadNetwork read_network(std::istream& in);
RoadNetwork load_network(const std::filesystem::path& edges_file);
/// Writes the edge CSV; node ids and class names round-trip.
void write_network(std::ostream& out, const RoadNetwork& net);
void save_network(const std::filesystem::path& edges_file, const RoadNetwork& net);

// ---- transition statistics --------------------------------------------------

class TransitionStats {
 public:
  TransitionStats() = default;
  explicit TransitionStats(std::size_t n) : count_src_(n, 0), visits_(n, 0) {}

  std::uint64_t count_pair(SegIndex u, SegIndex v) const;
  std::uint64_t count_src(SegIndex u) const { return count_src_[u]; }
  std::uint64_t visits(SegIndex u) const { return visits_[u]; }
  /// count_pair / count_src, or 0 when u never departs.
  double prob(SegIndex u, SegIndex v) const;
  std::size_t size() const { return count_src_.size(); }
  const std::map<std::pair<SegIndex, SegIndex>, std::uint64_t>& pairs() const { return pairs_; }

  void observe(std::span<const SegIndex> path);

 private:
  std::map<std::pair<SegIndex, SegIndex>, std::uint64_t> pairs_;
  std::vector<std::uint64_t> count_src_;
  std::vector<std::uint64_t> visits_;
};

/// Counts consecutive pairs over all trajectories. Throws std::invalid_argument
/// naming trajectory and position for unknown segment ids.
TransitionStats transition_stats(const RoadNetwork& net, std::span<const Trajectory> trajs);

// ---- features -----------------------------------------------------------------

struct FeatureColumn {
  enum class Kind { zscore, onehot, raw };
  std::string name;
  Kind kind;
};

struct FeatureMatrix {
  Tensor values;  // |V| x d0
  std::vector<FeatureColumn> columns;
  std::vector<std::string> warnings;
};

/// Columns: z(length), one-hot(class), z(lanes), z(maxspeed), z(in-degree),
/// z(out-degree), visits / max visits. Zero-variance z-columns become zeros.
FeatureMatrix build_features(const RoadNetwork& net, const TransitionStats& stats);

// ---- hop distances ------------------------------------------------------------

/// Breadth-first hop counts from src over successors, truncated at d_max.
/// Segments flagged in `blocked` are never entered. Result is (index, hops)
/// in visit order.
std::vector<std::pair<SegIndex, std::uint32_t>> bfs_hops(const RoadNetwork& net, SegIndex src,
                                                          std::uint32_t d_max,
                                                          std::span<const std::uint8_t> blocked = {});

/// Minimum-hop path src -> dst (both included) avoiding `blocked` segments and
/// the optional banned edge. Ties resolve toward the path discovered first
/// when successors are expanded in ascending index order.
std::optional<std::vector<SegIndex>> shortest_path(
    const RoadNetwork& net, SegIndex src, SegIndex dst, std::span<const std::uint8_t> blocked = {},
    std::optional<std::pair<SegIndex, SegIndex>> banned_edge = std::nullopt);

std::map<std::pair<SegIndex, SegIndex>, std::uint32_t> hop_distances(
    const RoadNetwork& net, std::span<const SegIndex> sources, std::uint32_t d_max);

/// Lazily filled per-source truncated BFS results. Not thread-safe.
class HopCache {
 public:
  HopCache(const RoadNetwork& net, std::uint32_t d_max) : net_(&net), d_max_(d_max) {}
  /// Hops from u to v, or d_max when v is not reached within d_max.
  std::uint32_t distance(SegIndex u, SegIndex v) const;
  std::uint32_t d_max() const { return d_max_; }

 private:
  const RoadNetwork* net_;
  std::uint32_t d_max_;
  mutable std::map<SegIndex, std::vector<std::pair<SegIndex, std::uint32_t>>> rows_;
};

}  // namespace getad
