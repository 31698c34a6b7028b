#pragma once

#include <optional>
#include <random>
#include <span>
#include <vector>

#include "getad/autodiff.hpp"
#include "getad/gat_encoder.hpp"
#include "getad/graph_pos_enc.hpp"
#include "getad/params.hpp"
#include "getad/road_graph.hpp"
#include "getad/traj_decoder.hpp"
#include "getad/trajectory_store.hpp"

namespace getad {

struct ModelConfig {
  std::size_t d_model = 64;
  GatConfig gat;
  DecoderConfig dec;
  GpeConfig gpe;
  RpeConfig rpe;
  bool use_gat = true;
  bool use_gpe = true;
  bool use_rpe = false;

  /// Copies d_model into the sub-configs and checks cross-field rules.
  void sync();
  void validate() const;
};

/// Everything the model needs besides its parameters.
struct ModelData {
  RoadNetwork network;
  Tensor features;               // |V| x d0
  std::vector<float> edge_prob;  // aligned with network.edges()
  Vocab vocab;
};

/// Transition statistics, features and vocabulary from training trajectories.
/// Every vocabulary segment must exist in the network.
ModelData prepare_data(RoadNetwork network, std::span<const Trajectory> train,
                       std::vector<std::string>* warnings = nullptr);

void init_model_params(ParamSet& params, const ModelConfig& cfg, const ModelData& data,
                       std::mt19937_64& rng);

/// Ties the encoder, positional signal and decoder together. Holds
/// references to cfg and data; both must outlive the model.
class Model {
 public:
  Model(const ModelConfig& cfg, const ModelData& data);

  const ModelConfig& config() const { return cfg_; }
  const ModelData& data() const { return data_; }
  std::size_t vocab_size() const { return data_.vocab.size(); }

  /// |V| x d_model embedding of every network segment.
  ad::Var segment_embeddings(Binder& bind) const;
  /// vocab_size x d_model input embeddings: special rows, then one row per
  /// segment token.
  ad::Var token_table(Binder& bind, ad::Var segments) const;

  /// Logits for sequences stacked row-wise. Columns of SOT and PAD are -inf.
  ad::Var forward(Binder& bind, ad::Var table, std::span<const std::span<const Token>> seqs,
                  AttentionTrace* trace = nullptr) const;

  /// Network index of a segment token.
  SegIndex token_segment(Token t) const;

 private:
  const ModelConfig& cfg_;
  const ModelData& data_;
  AttentionGraph graph_;
  std::vector<std::uint32_t> token_rows_;
  HopCache hops_;
};

}  // namespace getad
