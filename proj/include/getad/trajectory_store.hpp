#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace getad {

using SegmentId = std::int64_t;

/// Raised for malformed input files; carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// A map-matched trajectory: the ordered road segments an agent traversed.
struct Trajectory {
  std::string id;
  std::optional<std::string> agent;
  std::vector<SegmentId> segments;

  bool operator==(const Trajectory&) const = default;
};

std::vector<Trajectory> read_trajectories(std::istream& in);
std::vector<Trajectory> load_trajectories(const std::filesystem::path& file);
void write_trajectory_line(std::ostream& out, const Trajectory& t);
void write_trajectories(std::ostream& out, std::span<const Trajectory> trajs);
void save_trajectories(const std::filesystem::path& file, std::span<const Trajectory> trajs);

/// Drops trajectories with fewer than min_segments segments, then (when
/// min_agent_trajs is set) every trajectory of an agent left with fewer than
/// min_agent_trajs trajectories. Trajectories without an agent are kept by
/// the agent rule.
std::vector<Trajectory> filter_dataset(std::span<const Trajectory> trajs, std::size_t min_segments,
                                       std::optional<std::size_t> min_agent_trajs = std::nullopt);

// ---- vocabulary -------------------------------------------------------------

using Token = std::int32_t;
inline constexpr Token kSot = 0;
inline constexpr Token kEot = 1;
inline constexpr Token kPad = 2;
inline constexpr Token kFirstSegmentToken = 3;

class Vocab {
 public:
  Vocab() = default;
  /// Segment tokens in ascending segment-id order; ids must be unique.
  explicit Vocab(std::vector<SegmentId> segment_ids);

  std::size_t size() const { return kFirstSegmentToken + segments_.size(); }
  std::optional<Token> token(SegmentId id) const;
  bool contains(SegmentId id) const { return index_.count(id) != 0; }
  /// Segment id of a segment token; throws for special tokens.
  SegmentId segment(Token t) const;
  const std::vector<SegmentId>& segments() const { return segments_; }

  bool operator==(const Vocab& o) const { return segments_ == o.segments_; }

 private:
  std::vector<SegmentId> segments_;
  std::unordered_map<SegmentId, Token> index_;
};

Vocab build_vocab(std::span<const Trajectory> train);

/// [SOT, seg..., EOT] followed by PAD up to the matrix width.
struct TokenSeq {
  std::vector<Token> tokens;
  std::size_t true_length = 0;
};

/// Either a token sequence or the positions of out-of-vocabulary segments.
struct Encoded {
  std::optional<TokenSeq> seq;
  std::vector<std::size_t> oov_positions;
  bool ok() const { return seq.has_value(); }
};

class OovError : public std::runtime_error {
 public:
  OovError(const std::string& traj_id, std::vector<std::size_t> positions);
  const std::vector<std::size_t>& positions() const { return positions_; }

 private:
  std::vector<std::size_t> positions_;
};

Encoded encode(const Trajectory& traj, const Vocab& vocab);
/// Throws OovError instead of returning a report.
TokenSeq encode_or_throw(const Trajectory& traj, const Vocab& vocab);
std::vector<SegmentId> decode(const TokenSeq& seq, const Vocab& vocab);

/// A PAD-aligned token matrix. Row r holds the sequence at dataset index
/// source[r].
struct Batch {
  std::size_t rows = 0;
  std::size_t width = 0;
  std::vector<Token> tokens;  // rows x width, row-major
  std::vector<std::size_t> true_length;
  std::vector<std::size_t> source;

  std::span<const Token> row(std::size_t r) const { return {tokens.data() + r * width, width}; }
};

inline constexpr std::size_t kDefaultMaxLen = 512;

/// Shuffles under seed, then cuts into batches of batch_size. Sequences
/// longer than max_len are cut at the tail and EOT is re-appended.
std::vector<Batch> make_batches(std::span<const TokenSeq> dataset, std::size_t batch_size,
                                std::size_t max_len, std::uint64_t seed);

}  // namespace getad
