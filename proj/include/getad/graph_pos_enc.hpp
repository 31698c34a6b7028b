#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "getad/autodiff.hpp"
#include "getad/params.hpp"
#include "getad/road_graph.hpp"
#include "getad/trajectory_store.hpp"

namespace getad {

enum class GpeAggregation { sum, mean };
enum class GpeHorizon { causal, full };
GpeAggregation parse_aggregation(const std::string& s);
GpeHorizon parse_horizon(const std::string& s);
std::string to_string(GpeAggregation a);
std::string to_string(GpeHorizon h);

struct GpeConfig {
  std::uint32_t d_max = 8;
  GpeAggregation aggregation = GpeAggregation::sum;
  GpeHorizon horizon = GpeHorizon::causal;
};

struct RpeConfig {
  std::size_t clip = 16;
};

/// Registers gpe.dist ((d_max + 1) x d_model) and gpe.special (rows: SOT,
/// EOT, PAD).
void init_gpe_params(ParamSet& params, std::size_t d_model, const GpeConfig& cfg,
                     std::mt19937_64& rng);
/// Registers rpe.table ((2 clip + 1) x 1).
void init_rpe_params(ParamSet& params, const RpeConfig& cfg);

/// |T| x |T| hop matrix over a token sequence. Entry (i, j) is the truncated
/// hop distance from the segment at i to the segment at j (d_max when not
/// reached); rows and columns of special-token positions hold kSpecial.
struct HopMatrix {
  static constexpr int kSpecial = -1;
  std::size_t n = 0;
  std::vector<int> d;

  int operator()(std::size_t i, std::size_t j) const { return d[i * n + j]; }
};

/// positions[i] is the segment index at token position i, or nullopt for a
/// special token.
HopMatrix pairwise_hops(std::span<const std::optional<SegIndex>> positions, const HopCache& hops);

/// Graph positional embedding per token position (|T| x d_model). Segment
/// positions aggregate gpe.dist rows over their horizon; special positions
/// take their dedicated embedding.
ad::Var gpe(Binder& bind, std::span<const Token> tokens, const HopMatrix& hops,
            const GpeConfig& cfg);

/// bias(i, j) = table[clip(j - i, -k, k) + k], a seq_len x seq_len matrix
/// added to attention logits.
ad::Var rpe_bias(Binder& bind, std::size_t seq_len, const RpeConfig& cfg);

}  // namespace getad
