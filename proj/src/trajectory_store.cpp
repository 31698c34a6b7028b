#include "getad/trajectory_store.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <json.hpp>

namespace getad {

using nlohmann::json;

std::vector<Trajectory> read_trajectories(std::istream& in) {
  std::vector<Trajectory> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(lineno, "expected a JSON object");
    Trajectory t;
    try {
      t.id = j.at("id").get<std::string>();
      if (j.contains("agent") && !j["agent"].is_null()) t.agent = j["agent"].get<std::string>();
      t.segments = j.at("segments").get<std::vector<SegmentId>>();
    } catch (const json::exception& e) {
      throw ParseError(lineno, e.what());
    }
    if (t.segments.empty()) throw ParseError(lineno, "trajectory '" + t.id + "' has no segments");
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<Trajectory> load_trajectories(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  return read_trajectories(in);
}

namespace {

json trajectory_json(const Trajectory& t) {
  json j;
  j["id"] = t.id;
  if (t.agent) j["agent"] = *t.agent;
  j["segments"] = t.segments;
  return j;
}

}  // namespace

void write_trajectory_line(std::ostream& out, const Trajectory& t) {
  out << trajectory_json(t).dump() << '\n';
}

void write_trajectories(std::ostream& out, std::span<const Trajectory> trajs) {
  for (const auto& t : trajs) write_trajectory_line(out, t);
}

void save_trajectories(const std::filesystem::path& file, std::span<const Trajectory> trajs) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  write_trajectories(out, trajs);
}

std::vector<Trajectory> filter_dataset(std::span<const Trajectory> trajs, std::size_t min_segments,
                                       std::optional<std::size_t> min_agent_trajs) {
  std::vector<Trajectory> kept;
  for (const auto& t : trajs)
    if (t.segments.size() >= min_segments) kept.push_back(t);
  if (!min_agent_trajs) return kept;

  std::map<std::string, std::size_t> per_agent;
  for (const auto& t : kept)
    if (t.agent) ++per_agent[*t.agent];
  std::vector<Trajectory> out;
  for (auto& t : kept)
    if (!t.agent || per_agent[*t.agent] >= *min_agent_trajs) out.push_back(std::move(t));
  return out;
}

// ---- vocabulary -------------------------------------------------------------

Vocab::Vocab(std::vector<SegmentId> segment_ids) : segments_(std::move(segment_ids)) {
  if (!std::is_sorted(segments_.begin(), segments_.end()))
    throw std::invalid_argument("vocab: segment ids must be ascending");
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (!index_.emplace(segments_[i], kFirstSegmentToken + static_cast<Token>(i)).second)
      throw std::invalid_argument("vocab: duplicate segment id " + std::to_string(segments_[i]));
  }
}

std::optional<Token> Vocab::token(SegmentId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

SegmentId Vocab::segment(Token t) const {
  if (t < kFirstSegmentToken || static_cast<std::size_t>(t) >= size())
    throw std::out_of_range("token " + std::to_string(t) + " is not a segment token");
  return segments_[static_cast<std::size_t>(t - kFirstSegmentToken)];
}

Vocab build_vocab(std::span<const Trajectory> train) {
  std::set<SegmentId> seen;
  for (const auto& t : train) seen.insert(t.segments.begin(), t.segments.end());
  return Vocab(std::vector<SegmentId>(seen.begin(), seen.end()));
}

namespace {

std::string positions_text(const std::vector<std::size_t>& pos) {
  std::string s;
  for (std::size_t i = 0; i < pos.size(); ++i) s += (i ? "," : "") + std::to_string(pos[i]);
  return s;
}

}  // namespace

OovError::OovError(const std::string& traj_id, std::vector<std::size_t> positions)
    : std::runtime_error("trajectory '" + traj_id + "' has out-of-vocabulary segments at positions " +
                         positions_text(positions)),
      positions_(std::move(positions)) {}

Encoded encode(const Trajectory& traj, const Vocab& vocab) {
  Encoded res;
  TokenSeq seq;
  seq.tokens.reserve(traj.segments.size() + 2);
  seq.tokens.push_back(kSot);
  for (std::size_t i = 0; i < traj.segments.size(); ++i) {
    auto tok = vocab.token(traj.segments[i]);
    if (!tok) {
      res.oov_positions.push_back(i);
      continue;
    }
    seq.tokens.push_back(*tok);
  }
  if (!res.oov_positions.empty()) return res;
  seq.tokens.push_back(kEot);
  seq.true_length = seq.tokens.size();
  res.seq = std::move(seq);
  return res;
}

TokenSeq encode_or_throw(const Trajectory& traj, const Vocab& vocab) {
  Encoded e = encode(traj, vocab);
  if (!e.ok()) throw OovError(traj.id, std::move(e.oov_positions));
  return std::move(*e.seq);
}

std::vector<SegmentId> decode(const TokenSeq& seq, const Vocab& vocab) {
  std::vector<SegmentId> out;
  for (std::size_t i = 0; i < seq.true_length; ++i) {
    const Token t = seq.tokens[i];
    if (t >= kFirstSegmentToken) out.push_back(vocab.segment(t));
  }
  return out;
}

std::vector<Batch> make_batches(std::span<const TokenSeq> dataset, std::size_t batch_size,
                                std::size_t max_len, std::uint64_t seed) {
  if (batch_size == 0) throw std::invalid_argument("make_batches: batch_size must be >= 1");
  if (max_len < 2) throw std::invalid_argument("make_batches: max_len must be >= 2");
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Batch> out;
  for (std::size_t b = 0; b < order.size(); b += batch_size) {
    Batch batch;
    const std::size_t end = std::min(order.size(), b + batch_size);
    batch.rows = end - b;
    for (std::size_t i = b; i < end; ++i)
      batch.width = std::max(batch.width, std::min(dataset[order[i]].true_length, max_len));
    batch.tokens.assign(batch.rows * batch.width, kPad);
    for (std::size_t i = b; i < end; ++i) {
      const TokenSeq& s = dataset[order[i]];
      const std::size_t len = std::min(s.true_length, max_len);
      Token* row = batch.tokens.data() + (i - b) * batch.width;
      std::copy_n(s.tokens.begin(), len, row);
      if (len < s.true_length) row[len - 1] = kEot;
      batch.true_length.push_back(len);
      batch.source.push_back(order[i]);
    }
    out.push_back(std::move(batch));
  }
  return out;
}

}  // namespace getad
