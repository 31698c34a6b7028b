#include "getad/anomaly_forge.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "getad/seed.hpp"

namespace getad {

using nlohmann::json;

void DetourSpec::validate() const {
  if (mode == DetourMode::constrained && !(max_fraction > 0.0 && max_fraction <= 1.0))
    throw std::invalid_argument("detour: max_fraction must be in (0, 1]");
  if (max_retries == 0) throw std::invalid_argument("detour: max_retries must be >= 1");
}

std::size_t DetourSpec::cap(std::size_t m) const {
  return static_cast<std::size_t>(std::ceil(max_fraction * static_cast<double>(m) - 1e-9));
}

DetourMode parse_detour_mode(const std::string& s) {
  if (s == "constrained") return DetourMode::constrained;
  if (s == "unconstrained") return DetourMode::unconstrained;
  throw std::invalid_argument("unknown detour mode '" + s + "'");
}

std::optional<Detour> make_detour(const RoadNetwork& net, const Trajectory& traj,
                                  const DetourSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  const std::size_t m = traj.segments.size();
  if (m < 4)
    throw std::invalid_argument("detour: trajectory '" + traj.id + "' has " + std::to_string(m) +
                                " segments, need >= 4");
  std::vector<SegIndex> path;
  for (std::size_t i = 0; i < m; ++i) {
    auto idx = net.find(traj.segments[i]);
    if (!idx)
      throw std::invalid_argument("detour: trajectory '" + traj.id + "' position " +
                                  std::to_string(i) + " is not in the network");
    path.push_back(*idx);
  }

  const bool constrained = spec.mode == DetourMode::constrained;
  const std::size_t cap = constrained ? spec.cap(m) : m;
  const std::size_t max_window = constrained ? std::min(std::max<std::size_t>(cap, 1), m - 2) : m - 2;
  std::uniform_int_distribution<std::size_t> pick_begin(1, m - 2);
  std::uniform_int_distribution<std::size_t> pick_len(1, max_window);
  std::vector<std::uint8_t> blocked(net.size(), 0);

  for (std::size_t attempt = 0; attempt < spec.max_retries; ++attempt) {
    const std::size_t i = pick_begin(rng);
    const std::size_t j = std::min(i + pick_len(rng) - 1, m - 2);

    std::fill(blocked.begin(), blocked.end(), 0);
    for (std::size_t k = i; k <= j; ++k) blocked[path[k]] = 1;
    // Anchors must stay reachable even if the window revisits them.
    if (blocked[path[i - 1]] || blocked[path[j + 1]]) continue;

    auto reroute = shortest_path(net, path[i - 1], path[j + 1], blocked);
    if (!reroute) continue;
    std::vector<SegmentId> replacement;
    for (std::size_t k = 1; k + 1 < reroute->size(); ++k)
      replacement.push_back(net.segment((*reroute)[k]).id);

    if (constrained) {
      const std::size_t new_len = m - (j - i + 1) + replacement.size();
      const bool ok = spec.bound == DetourBound::replacement_length
                          ? replacement.size() <= cap
                          : new_len <= m + cap;
      if (!ok) continue;
    }
    std::vector<SegmentId> removed(traj.segments.begin() + static_cast<std::ptrdiff_t>(i),
                                   traj.segments.begin() + static_cast<std::ptrdiff_t>(j + 1));
    if (replacement == removed) continue;

    Detour d;
    d.window_begin = i;
    d.window_end = j;
    d.replacement = replacement;
    d.trajectory = traj;
    auto& segs = d.trajectory.segments;
    segs.erase(segs.begin() + static_cast<std::ptrdiff_t>(i),
               segs.begin() + static_cast<std::ptrdiff_t>(j + 1));
    segs.insert(segs.begin() + static_cast<std::ptrdiff_t>(i), replacement.begin(),
                replacement.end());
    if (segs == traj.segments) continue;
    return d;
  }
  return std::nullopt;
}

std::size_t LabeledSet::anomalies() const {
  return static_cast<std::size_t>(std::count_if(
      items.begin(), items.end(), [](const LabeledItem& it) { return it.label == Label::anomalous; }));
}

LabeledSet build_eval_set(const RoadNetwork& net, std::span<const Trajectory> normals, double rate,
                          const DetourSpec& spec) {
  if (!(rate > 0.0 && rate < 1.0)) throw std::invalid_argument("eval set: rate must be in (0, 1)");
  const std::size_t want =
      static_cast<std::size_t>(std::floor(rate * static_cast<double>(normals.size()) + 1e-9));
  if (want == 0)
    throw std::runtime_error("eval set: rate " + std::to_string(rate) + " over " +
                             std::to_string(normals.size()) + " trajectories yields no anomalies");

  std::vector<std::size_t> order(normals.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(spec.rng_seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::optional<Trajectory>> converted(normals.size());
  std::size_t made = 0;
  for (std::size_t idx : order) {
    if (made == want) break;
    if (normals[idx].segments.size() < 4) continue;
    std::mt19937_64 item_rng(mix_seed(spec.rng_seed, idx));
    auto d = make_detour(net, normals[idx], spec, item_rng);
    if (!d) continue;
    d->trajectory.id = normals[idx].id + "-detour";
    converted[idx] = std::move(d->trajectory);
    ++made;
  }
  if (made < want)
    throw std::runtime_error("eval set: only " + std::to_string(made) + " of " +
                             std::to_string(want) + " requested anomalies could be generated");

  LabeledSet out;
  for (std::size_t i = 0; i < normals.size(); ++i) {
    if (converted[i])
      out.items.push_back({std::move(*converted[i]), Label::anomalous, normals[i].id});
    else
      out.items.push_back({normals[i], Label::normal, normals[i].id});
  }
  return out;
}

void write_labeled(std::ostream& out, const LabeledSet& set) {
  for (const auto& it : set.items) {
    json j;
    j["id"] = it.trajectory.id;
    if (it.trajectory.agent) j["agent"] = *it.trajectory.agent;
    j["segments"] = it.trajectory.segments;
    j["label"] = it.label == Label::anomalous ? "anomalous" : "normal";
    j["provenance"] = it.provenance;
    out << j.dump() << '\n';
  }
}

LabeledSet read_labeled(std::istream& in) {
  LabeledSet set;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      LabeledItem it;
      it.trajectory.id = j.at("id").get<std::string>();
      if (j.contains("agent") && !j["agent"].is_null())
        it.trajectory.agent = j["agent"].get<std::string>();
      it.trajectory.segments = j.at("segments").get<std::vector<SegmentId>>();
      const auto label = j.at("label").get<std::string>();
      if (label == "anomalous")
        it.label = Label::anomalous;
      else if (label == "normal")
        it.label = Label::normal;
      else
        throw ParseError(lineno, "unknown label '" + label + "'");
      it.provenance = j.value("provenance", it.trajectory.id);
      if (it.trajectory.segments.empty()) throw ParseError(lineno, "trajectory has no segments");
      set.items.push_back(std::move(it));
    } catch (const json::exception& e) {
      throw ParseError(lineno, e.what());
    }
  }
  return set;
}

void save_labeled(const std::filesystem::path& file, const LabeledSet& set) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  write_labeled(out, set);
}

LabeledSet load_labeled(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  return read_labeled(in);
}

RoadNetwork restrict_network(const RoadNetwork& net, std::span<const SegmentId> keep) {
  std::vector<SegmentRecord> segs;
  for (SegmentId id : keep)
    if (auto idx = net.find(id)) segs.push_back(net.segment(*idx));
  return RoadNetwork(std::move(segs), net.class_names());
}

}  // namespace getad
