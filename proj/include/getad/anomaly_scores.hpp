#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "getad/model.hpp"
#include "getad/train_engine.hpp"

namespace getad {

struct TokenScore {
  double l = 0.0;  // -log p(realized token), nats
  double H = 0.0;  // entropy of the next-token distribution
  double c = 0.0;  // 1 - H / H_max
};

struct ScoreBreakdown {
  std::vector<TokenScore> tokens;
  double h_max = 0.0;

  std::size_t n() const { return tokens.size(); }
};

/// Score of one position from a probability vector. Zero entries are outside
/// the support; v_eff sets H_max = ln(v_eff).
TokenScore token_score(std::span<const double> p, std::size_t target, std::size_t v_eff);

/// Same, from a logits row where -inf marks excluded tokens.
TokenScore token_score_logits(std::span<const double> logits, std::size_t target,
                              std::size_t v_eff);

double nll(const ScoreBreakdown& b);
double perplexity(const ScoreBreakdown& b);
double cw_nll(const ScoreBreakdown& b);

enum class Scoring { cw_nll, nll, perplexity };
Scoring parse_scoring(const std::string& s);
std::string to_string(Scoring s);
double score_value(const ScoreBreakdown& b, Scoring s);

/// Read-only scorer over a checkpoint. Segment embeddings are computed once.
class Scorer {
 public:
  explicit Scorer(const Checkpoint& ckpt);

  std::size_t v_eff() const { return model_.vocab_size() - 2; }
  const Vocab& vocab() const { return ckpt_.data.vocab; }
  const Checkpoint& checkpoint() const { return ckpt_; }

  /// Positions 1 .. true_length-1 are scored (segments and EOT).
  ScoreBreakdown score(const TokenSeq& seq) const;
  /// Encodes first; throws OovError on unknown segments.
  ScoreBreakdown score(const Trajectory& traj) const;

  /// Logits for one input token sequence (one row per token).
  Tensor64 logits(std::span<const Token> tokens) const;

 private:
  const Checkpoint& ckpt_;
  Model model_;
  Tensor64 table_;
};

struct StreamStep {
  TokenScore score;
  std::size_t n = 0;
  double nll = 0.0;
  double cw_nll = 0.0;
  double perplexity = 0.0;
};

/// Online scoring: each pushed token is scored against the distribution
/// predicted from the prefix seen so far. Requires causal GPE.
class StreamScorer {
 public:
  explicit StreamScorer(const Scorer& scorer);

  /// Starts a new trajectory; the prefix becomes [SOT].
  void reset();
  StreamStep push(Token next);
  std::span<const Token> prefix() const { return prefix_; }

 private:
  const Scorer& scorer_;
  std::vector<Token> prefix_;
  double nll_ = 0.0, cw_ = 0.0;
  std::size_t n_ = 0;
};

/// Stateless variant: scores `next` after `prefix` and returns aggregates
/// over the whole prefix. The prefix must start with SOT.
StreamStep score_stream(const Scorer& scorer, std::span<const Token> prefix, Token next);

struct ScoredItem {
  std::string id;
  std::optional<std::string> label;
  ScoreBreakdown breakdown;
};

/// One JSON object per line: id, label?, nll, perplexity, cw_nll, n and,
/// with per_token, the list of {l, H, c}.
void write_scores(std::ostream& out, std::span<const ScoredItem> items, bool per_token);

struct ScoreRecord {
  std::string id;
  std::optional<std::string> label;
  double nll = 0.0, perplexity = 0.0, cw_nll = 0.0;
  std::size_t n = 0;
  double value(Scoring s) const;
};
std::vector<ScoreRecord> read_scores(std::istream& in);

}  // namespace getad
