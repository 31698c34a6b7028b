#pragma once

#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "getad/autodiff.hpp"
#include "getad/params.hpp"
#include "getad/trajectory_store.hpp"

namespace getad {

struct DecoderConfig {
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t d_model = 64;
  std::size_t d_ff = 256;
  double dropout = 0.0;

  void validate() const;
  std::size_t head_width() const { return d_model / heads; }
};

/// Registers dec.* (per layer: wq, wk, wv, wo, ff1.w/b, ff2.w/b, ln1.g/b,
/// ln2.g/b) and the output head head.w / head.b.
void init_decoder_params(ParamSet& params, const DecoderConfig& cfg, std::size_t vocab_size,
                         std::mt19937_64& rng);

/// z_i = h_i + ge_i.
ad::Var embed_inputs(ad::Var token_embeddings, ad::Var positional);

/// Attention weights per layer and head, captured for inspection.
struct AttentionTrace {
  std::vector<Tensor64> weights;  // index: layer * heads + head
};

/// Causal post-norm decoder stack followed by the vocabulary projection.
/// attn_bias, when given, is added to every head's attention logits.
ad::Var decode(Binder& bind, ad::Var z, const DecoderConfig& cfg,
               std::optional<ad::Var> attn_bias = std::nullopt, AttentionTrace* trace = nullptr);

/// Attention bias for a sequence of the given length.
using BiasFn = std::function<ad::Var(std::size_t seq_len)>;

/// Several sequences stacked row-wise in z; sequence s occupies rows
/// [offsets[s], offsets[s+1]). Position-wise layers run on the whole stack,
/// attention stays within each sequence.
ad::Var decode_packed(Binder& bind, ad::Var z, const DecoderConfig& cfg,
                      std::span<const std::size_t> offsets, const BiasFn& bias = {},
                      AttentionTrace* trace = nullptr);

/// Column mask hiding SOT and PAD from next-token predictions.
std::vector<std::uint8_t> prediction_mask(std::size_t rows, std::size_t vocab_size);

/// Softmax of one logits row with SOT and PAD excluded (probability 0).
std::vector<double> next_token_dist(const Tensor64& logits, std::size_t position);

}  // namespace getad
