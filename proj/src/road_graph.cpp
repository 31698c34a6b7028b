#include "getad/road_graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace getad {

RoadNetwork::RoadNetwork(std::vector<SegmentRecord> segments, std::vector<std::string> class_names)
    : segments_(std::move(segments)), class_names_(std::move(class_names)) {
  std::sort(segments_.begin(), segments_.end(),
            [](const SegmentRecord& a, const SegmentRecord& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const auto& s = segments_[i];
    if (!index_.emplace(s.id, static_cast<SegIndex>(i)).second)
      throw std::invalid_argument("duplicate segment id " + std::to_string(s.id));
    if (!(s.length_m > 0.0))
      throw std::invalid_argument("segment " + std::to_string(s.id) + ": length_m must be > 0");
    if (s.lanes < 1)
      throw std::invalid_argument("segment " + std::to_string(s.id) + ": lanes must be >= 1");
    if (!(s.maxspeed_kmh > 0.0))
      throw std::invalid_argument("segment " + std::to_string(s.id) + ": maxspeed must be > 0");
    if (s.road_class < 0 || static_cast<std::size_t>(s.road_class) >= class_names_.size())
      throw std::invalid_argument("segment " + std::to_string(s.id) + ": unknown road class code");
  }

  // Join on intersection ids: u -> v iff head(u) == tail(v).
  std::unordered_map<NodeId, std::vector<SegIndex>> leaving;
  for (std::size_t i = 0; i < segments_.size(); ++i)
    leaving[segments_[i].tail_node].push_back(static_cast<SegIndex>(i));

  const std::size_t n = segments_.size();
  std::vector<std::vector<SegIndex>> out(n), in(n);
  for (std::size_t u = 0; u < n; ++u) {
    auto it = leaving.find(segments_[u].head_node);
    if (it == leaving.end()) continue;
    for (SegIndex v : it->second) {
      if (v == u) continue;
      out[u].push_back(v);
      in[v].push_back(static_cast<SegIndex>(u));
    }
  }
  succ_off_.assign(1, 0);
  pred_off_.assign(1, 0);
  for (std::size_t u = 0; u < n; ++u) {
    std::sort(out[u].begin(), out[u].end());
    std::sort(in[u].begin(), in[u].end());
    succ_.insert(succ_.end(), out[u].begin(), out[u].end());
    pred_.insert(pred_.end(), in[u].begin(), in[u].end());
    succ_off_.push_back(succ_.size());
    pred_off_.push_back(pred_.size());
  }
}

std::optional<SegIndex> RoadNetwork::find(SegmentId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

SegIndex RoadNetwork::index(SegmentId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw std::out_of_range("unknown segment id " + std::to_string(id));
  return it->second;
}

bool RoadNetwork::adjacent(SegIndex u, SegIndex v) const {
  auto s = successors(u);
  return std::binary_search(s.begin(), s.end(), v);
}

std::vector<std::pair<SegIndex, SegIndex>> RoadNetwork::edges() const {
  std::vector<std::pair<SegIndex, SegIndex>> out;
  out.reserve(succ_.size());
  for (SegIndex u = 0; u < size(); ++u)
    for (SegIndex v : successors(u)) out.emplace_back(u, v);
  return out;
}

bool RoadNetwork::is_connected_path(std::span<const SegmentId> segs) const {
  if (segs.empty()) return false;
  std::optional<SegIndex> prev;
  for (SegmentId id : segs) {
    auto cur = find(id);
    if (!cur) return false;
    if (prev && !adjacent(*prev, *cur)) return false;
    prev = cur;
  }
  return true;
}

// ---- edge CSV -----------------------------------------------------------------

namespace {

constexpr const char* kEdgeHeader =
    "edge_id,from_node,to_node,length_m,highway_class,lanes,maxspeed_kmh";

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

template <class T>
T parse_number(const std::string& field, std::size_t lineno, const char* name) {
  std::istringstream is(field);
  T v{};
  is >> v;
  if (is.fail() || !is.eof())
    throw ParseError(lineno, std::string("bad ") + name + " '" + field + "'");
  return v;
}

}  // namespace

RoadNetwork read_network(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kEdgeHeader) throw ParseError(1, std::string("expected header '") + kEdgeHeader + "'");

  std::vector<SegmentRecord> segs;
  std::vector<std::string> classes;
  std::unordered_map<std::string, int> class_code;
  std::unordered_map<SegmentId, std::size_t> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto f = split_csv(line);
    if (f.size() != 7) throw ParseError(lineno, "expected 7 fields, got " + std::to_string(f.size()));
    SegmentRecord s;
    s.id = parse_number<SegmentId>(f[0], lineno, "edge_id");
    s.tail_node = parse_number<NodeId>(f[1], lineno, "from_node");
    s.head_node = parse_number<NodeId>(f[2], lineno, "to_node");
    s.length_m = parse_number<double>(f[3], lineno, "length_m");
    s.lanes = parse_number<int>(f[5], lineno, "lanes");
    s.maxspeed_kmh = parse_number<double>(f[6], lineno, "maxspeed_kmh");
    if (f[4].empty()) throw ParseError(lineno, "empty highway_class");
    auto [it, fresh] = class_code.emplace(f[4], static_cast<int>(classes.size()));
    if (fresh) classes.push_back(f[4]);
    s.road_class = it->second;
    if (!(s.length_m > 0.0)) throw ParseError(lineno, "length_m must be > 0");
    if (s.lanes < 1) throw ParseError(lineno, "lanes must be >= 1");
    if (!(s.maxspeed_kmh > 0.0)) throw ParseError(lineno, "maxspeed_kmh must be > 0");
    if (auto [pos, ok] = seen.emplace(s.id, lineno); !ok)
      throw ParseError(lineno, "duplicate segment id " + std::to_string(s.id) + " (first on line " +
                                   std::to_string(pos->second) + ")");
    segs.push_back(s);
  }
  return RoadNetwork(std::move(segs), std::move(classes));
}

RoadNetwork load_network(const std::filesystem::path& edges_file) {
  std::ifstream in(edges_file);
  if (!in) throw std::runtime_error("cannot open " + edges_file.string());
  return read_network(in);
}

void write_network(std::ostream& out, const RoadNetwork& net) {
  out << kEdgeHeader << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& s : net.segments()) {
    out << s.id << ',' << s.tail_node << ',' << s.head_node << ',' << s.length_m << ','
        << net.class_names()[static_cast<std::size_t>(s.road_class)] << ',' << s.lanes << ','
        << s.maxspeed_kmh << '\n';
  }
}

void save_network(const std::filesystem::path& edges_file, const RoadNetwork& net) {
  std::ofstream out(edges_file);
  if (!out) throw std::runtime_error("cannot write " + edges_file.string());
  write_network(out, net);
}

// ---- transition statistics --------------------------------------------------

std::uint64_t TransitionStats::count_pair(SegIndex u, SegIndex v) const {
  auto it = pairs_.find({u, v});
  return it == pairs_.end() ? 0 : it->second;
}

double TransitionStats::prob(SegIndex u, SegIndex v) const {
  if (u >= count_src_.size() || count_src_[u] == 0) return 0.0;
  return static_cast<double>(count_pair(u, v)) / static_cast<double>(count_src_[u]);
}

void TransitionStats::observe(std::span<const SegIndex> path) {
  for (std::size_t i = 0; i < path.size(); ++i) {
    ++visits_[path[i]];
    if (i + 1 < path.size()) {
      ++count_src_[path[i]];
      ++pairs_[{path[i], path[i + 1]}];
    }
  }
}

TransitionStats transition_stats(const RoadNetwork& net, std::span<const Trajectory> trajs) {
  TransitionStats stats(net.size());
  std::vector<SegIndex> path;
  for (const auto& t : trajs) {
    path.clear();
    for (std::size_t i = 0; i < t.segments.size(); ++i) {
      auto idx = net.find(t.segments[i]);
      if (!idx)
        throw std::invalid_argument("trajectory '" + t.id + "' position " + std::to_string(i) +
                                    ": unknown segment id " + std::to_string(t.segments[i]));
      path.push_back(*idx);
    }
    stats.observe(path);
  }
  return stats;
}

// ---- features -----------------------------------------------------------------

FeatureMatrix build_features(const RoadNetwork& net, const TransitionStats& stats) {
  const std::size_t n = net.size();
  const std::size_t n_classes = net.class_names().size();
  FeatureMatrix fm;
  std::vector<std::vector<double>> cols;

  auto push_z = [&](const std::string& name, std::vector<double> raw) {
    double mu = 0.0;
    for (double v : raw) mu += v;
    mu /= static_cast<double>(std::max<std::size_t>(n, 1));
    double var = 0.0;
    for (double v : raw) var += (v - mu) * (v - mu);
    var /= static_cast<double>(std::max<std::size_t>(n, 1));
    if (var <= 0.0) {
      fm.warnings.push_back("feature '" + name + "' has zero variance; z-score replaced by zeros");
      std::fill(raw.begin(), raw.end(), 0.0);
    } else {
      const double sd = std::sqrt(var);
      for (double& v : raw) v = (v - mu) / sd;
    }
    cols.push_back(std::move(raw));
    fm.columns.push_back({name, FeatureColumn::Kind::zscore});
  };

  std::vector<double> length(n), lanes(n), speed(n), indeg(n), outdeg(n), visits(n);
  std::uint64_t max_visits = 0;
  for (SegIndex i = 0; i < n; ++i) {
    const auto& s = net.segment(i);
    length[i] = s.length_m;
    lanes[i] = s.lanes;
    speed[i] = s.maxspeed_kmh;
    indeg[i] = static_cast<double>(net.predecessors(i).size());
    outdeg[i] = static_cast<double>(net.successors(i).size());
    if (i < stats.size()) max_visits = std::max(max_visits, stats.visits(i));
  }
  push_z("length_m", length);
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::vector<double> col(n, 0.0);
    for (SegIndex i = 0; i < n; ++i)
      if (static_cast<std::size_t>(net.segment(i).road_class) == c) col[i] = 1.0;
    cols.push_back(std::move(col));
    fm.columns.push_back({"class=" + net.class_names()[c], FeatureColumn::Kind::onehot});
  }
  push_z("lanes", lanes);
  push_z("maxspeed_kmh", speed);
  push_z("in_degree", indeg);
  push_z("out_degree", outdeg);
  for (SegIndex i = 0; i < n; ++i)
    visits[i] = max_visits == 0 || i >= stats.size()
                    ? 0.0
                    : static_cast<double>(stats.visits(i)) / static_cast<double>(max_visits);
  cols.push_back(std::move(visits));
  fm.columns.push_back({"visit_frequency", FeatureColumn::Kind::raw});

  fm.values = Tensor(n, cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c)
    for (std::size_t i = 0; i < n; ++i) fm.values(i, c) = static_cast<float>(cols[c][i]);
  return fm;
}

// ---- hop distances ------------------------------------------------------------

std::vector<std::pair<SegIndex, std::uint32_t>> bfs_hops(const RoadNetwork& net, SegIndex src,
                                                          std::uint32_t d_max,
                                                          std::span<const std::uint8_t> blocked) {
  std::vector<std::pair<SegIndex, std::uint32_t>> out;
  std::vector<std::uint32_t> dist(net.size(), std::numeric_limits<std::uint32_t>::max());
  std::deque<SegIndex> queue;
  dist[src] = 0;
  queue.push_back(src);
  while (!queue.empty()) {
    const SegIndex u = queue.front();
    queue.pop_front();
    out.emplace_back(u, dist[u]);
    if (dist[u] == d_max) continue;
    for (SegIndex v : net.successors(u)) {
      if (dist[v] != std::numeric_limits<std::uint32_t>::max()) continue;
      if (!blocked.empty() && blocked[v]) continue;
      dist[v] = dist[u] + 1;
      queue.push_back(v);
    }
  }
  return out;
}

std::optional<std::vector<SegIndex>> shortest_path(
    const RoadNetwork& net, SegIndex src, SegIndex dst, std::span<const std::uint8_t> blocked,
    std::optional<std::pair<SegIndex, SegIndex>> banned_edge) {
  constexpr SegIndex kNone = std::numeric_limits<SegIndex>::max();
  std::vector<SegIndex> parent(net.size(), kNone);
  std::vector<std::uint8_t> seen(net.size(), 0);
  std::deque<SegIndex> queue{src};
  seen[src] = 1;
  while (!queue.empty() && !seen[dst]) {
    const SegIndex u = queue.front();
    queue.pop_front();
    for (SegIndex v : net.successors(u)) {
      if (seen[v] || (!blocked.empty() && blocked[v])) continue;
      if (banned_edge && banned_edge->first == u && banned_edge->second == v) continue;
      seen[v] = 1;
      parent[v] = u;
      queue.push_back(v);
    }
  }
  if (!seen[dst]) return std::nullopt;
  std::vector<SegIndex> path{dst};
  while (path.back() != src) path.push_back(parent[path.back()]);
  std::reverse(path.begin(), path.end());
  return path;
}

std::map<std::pair<SegIndex, SegIndex>, std::uint32_t> hop_distances(
    const RoadNetwork& net, std::span<const SegIndex> sources, std::uint32_t d_max) {
  if (d_max < 1) throw std::invalid_argument("hop_distances: d_max must be >= 1");
  std::map<std::pair<SegIndex, SegIndex>, std::uint32_t> out;
  for (SegIndex s : sources)
    for (auto [v, d] : bfs_hops(net, s, d_max)) out[{s, v}] = d;
  return out;
}

std::uint32_t HopCache::distance(SegIndex u, SegIndex v) const {
  auto it = rows_.find(u);
  if (it == rows_.end()) {
    auto row = bfs_hops(*net_, u, d_max_);
    std::sort(row.begin(), row.end());
    it = rows_.emplace(u, std::move(row)).first;
  }
  const auto& row = it->second;
  auto pos = std::lower_bound(row.begin(), row.end(), std::pair<SegIndex, std::uint32_t>{v, 0});
  if (pos == row.end() || pos->first != v) return d_max_;
  return pos->second;
}

}  // namespace getad
