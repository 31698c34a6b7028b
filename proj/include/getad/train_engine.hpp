#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "getad/autodiff.hpp"
#include "getad/model.hpp"
#include "getad/params.hpp"

namespace getad {

struct TrainConfig {
  ModelConfig model;
  double lambda_ce = 1.0;
  double lambda_link = 1.0;
  bool use_link_loss = true;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 1.0;  // <= 0 disables clipping
  std::size_t epochs = 15;
  std::size_t batch_size = 16;
  std::size_t max_len = kDefaultMaxLen;
  std::uint64_t seed = 0;
  std::size_t neg_ratio = 1;
  std::size_t max_positive_pairs = 50000;

  void validate() const;
  /// Sets one flat key; throws std::invalid_argument on unknown keys or bad values.
  void apply(const std::string& key, const std::string& value);
  /// Every key with its current value, in a stable order.
  std::vector<std::pair<std::string, std::string>> to_kv() const;
  static std::vector<std::string> keys();
};

/// Reads flat `key = value` lines ('#' starts a comment).
std::vector<std::pair<std::string, std::string>> parse_kv_lines(std::istream& in);

// ---- losses -------------------------------------------------------------------

/// Next-token targets for an input row sequence: targets[i] = tokens[i+1];
/// the last position and PAD targets are masked (-1).
std::vector<int> shift_targets(std::span<const Token> tokens);

/// Sum over unmasked positions of -log softmax(logits)[target]. Targets equal
/// to pad_token or negative are masked; throws if every position is masked.
ad::Var ce_loss(ad::Var logits, std::span<const int> targets, int pad_token = kPad);

struct LinkPairs {
  std::vector<std::uint32_t> u, v;
  std::vector<double> labels;
  std::size_t positives = 0;
};

/// Positives are adjacency edges (at most max_positive pairs, sampled without
/// replacement when above); negatives are uniform non-adjacent pairs with
/// u != v, neg_ratio per positive.
LinkPairs sample_link_pairs(const RoadNetwork& net, std::mt19937_64& rng, std::size_t neg_ratio,
                            std::size_t max_positive = 50000);

/// Mean binary cross-entropy of sigmoid(<emb_u, emb_v>) against the labels.
ad::Var link_loss(ad::Var embeddings, const LinkPairs& pairs);

/// lambda_ce * ce + lambda_link * link; the link term is skipped when
/// use_link_loss is off or link is absent.
ad::Var total_loss(ad::Var ce, std::optional<ad::Var> link, const TrainConfig& cfg);

// ---- optimizer ------------------------------------------------------------------

class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double eps);
  /// One update from grads aligned with params.entries(). Grads may be empty
  /// for parameters that received none.
  void step(ParamSet& params, const std::vector<Tensor64>& grads);
  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Scales grads in place so their joint L2 norm is at most max_norm. Returns
/// the norm before clipping.
double clip_global_norm(std::vector<Tensor64>& grads, double max_norm);

// ---- training -------------------------------------------------------------------

struct Checkpoint {
  TrainConfig config;
  ModelData data;
  ParamSet params;
};

struct EpochLog {
  std::size_t epoch = 0;
  double ce = 0.0;     // mean per-sequence CE over the epoch
  double link = 0.0;   // mean link loss per step
  double total = 0.0;  // mean total loss per step
  double first_ce = 0.0;  // per-sequence CE of the first and last batch
  double last_ce = 0.0;
};

class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Trains a fresh model. Every training trajectory must encode under
/// data.vocab.
TrainResult train(ModelData data, std::span<const Trajectory> trajectories,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Runs epochs [first_epoch, first_epoch + epochs) on ckpt.params with a
/// fresh optimizer state.
std::vector<EpochLog> train_epochs(Checkpoint& ckpt, std::span<const TokenSeq> seqs,
                                   std::size_t first_epoch, std::size_t epochs,
                                   const EpochCallback& on_epoch = {});

// ---- persistence ----------------------------------------------------------------

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace getad
