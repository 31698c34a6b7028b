#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "getad/autodiff.hpp"
#include "getad/params.hpp"
#include "getad/road_graph.hpp"

namespace getad {

enum class Activation { elu, relu };
Activation parse_activation(const std::string& s);
std::string to_string(Activation a);

struct GatConfig {
  std::size_t layers = 2;
  std::size_t heads = 4;
  /// Width of every layer's concatenated output; each head emits d_model / heads.
  std::size_t d_model = 64;
  Activation activation = Activation::elu;
  bool self_loops = true;

  void validate() const;
  std::size_t head_width() const { return d_model / heads; }
};

/// Neighborhoods in CSR form. Edges of node i occupy [offsets[i], offsets[i+1])
/// with the self loop (when enabled) first, then successors ascending. Each
/// edge carries the transition probability p(i, j); the self loop uses 1.
struct AttentionGraph {
  std::size_t nodes = 0;
  std::vector<std::size_t> offsets;
  std::vector<std::uint32_t> source;
  std::vector<std::uint32_t> target;
  std::vector<float> prob;

  /// edge_prob is aligned with net.edges().
  static AttentionGraph build(const RoadNetwork& net, std::span<const float> edge_prob,
                              bool self_loops);
};

/// p(u, v) for every adjacency edge, in net.edges() order.
std::vector<float> edge_probabilities(const RoadNetwork& net, const TransitionStats& stats);

/// Registers gat.* parameters. An input projection gat.in_proj is added when
/// the feature width differs from d_model.
void init_gat_params(ParamSet& params, std::size_t feature_width, const GatConfig& cfg,
                     std::mt19937_64& rng);

/// One attention layer over all nodes. The attention weights of each head
/// (one column vector per head, edge order of `graph`) are appended to
/// `attention` when given.
ad::Var gat_layer(Binder& bind, std::size_t layer, ad::Var h, const AttentionGraph& graph,
                  const GatConfig& cfg, std::vector<ad::Var>* attention = nullptr);

/// Input projection (if any) followed by cfg.layers attention layers.
ad::Var encode_segments(Binder& bind, ad::Var features, const AttentionGraph& graph,
                        const GatConfig& cfg);

}  // namespace getad
