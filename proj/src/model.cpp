#include "getad/model.hpp"

#include <limits>
#include <stdexcept>

namespace getad {

void ModelConfig::sync() {
  gat.d_model = d_model;
  dec.d_model = d_model;
}

void ModelConfig::validate() const {
  if (gat.d_model != d_model || dec.d_model != d_model)
    throw std::invalid_argument("model: encoder and decoder widths must equal d_model");
  if (use_gpe && use_rpe)
    throw std::invalid_argument("model: use_gpe and use_rpe are mutually exclusive");
  if (use_gat) gat.validate();
  dec.validate();
  if (use_gpe && gpe.d_max < 1) throw std::invalid_argument("model: gpe.d_max must be >= 1");
}

ModelData prepare_data(RoadNetwork network, std::span<const Trajectory> train,
                       std::vector<std::string>* warnings) {
  ModelData d;
  const TransitionStats stats = transition_stats(network, train);
  FeatureMatrix fm = build_features(network, stats);
  if (warnings) *warnings = fm.warnings;
  d.features = std::move(fm.values);
  d.edge_prob = edge_probabilities(network, stats);
  d.vocab = build_vocab(train);
  d.network = std::move(network);
  return d;
}

void init_model_params(ParamSet& params, const ModelConfig& cfg, const ModelData& data,
                       std::mt19937_64& rng) {
  cfg.validate();
  params.add("tok.special", normal_init(3, cfg.d_model, 0.02, rng));
  if (cfg.use_gat)
    init_gat_params(params, data.features.cols(), cfg.gat, rng);
  else
    params.add("emb.segments", normal_init(data.network.size(), cfg.d_model, 0.1, rng));
  if (cfg.use_gpe) init_gpe_params(params, cfg.d_model, cfg.gpe, rng);
  if (cfg.use_rpe) init_rpe_params(params, cfg.rpe);
  init_decoder_params(params, cfg.dec, data.vocab.size(), rng);
}

Model::Model(const ModelConfig& cfg, const ModelData& data)
    : cfg_(cfg), data_(data), hops_(data.network, cfg.gpe.d_max) {
  cfg_.validate();
  if (data.features.rows() != data.network.size())
    throw ShapeError("model: feature rows do not match the network size");
  if (cfg_.use_gat) graph_ = AttentionGraph::build(data.network, data.edge_prob, cfg_.gat.self_loops);
  for (SegmentId id : data.vocab.segments()) {
    auto idx = data.network.find(id);
    if (!idx)
      throw std::invalid_argument("model: vocabulary segment " + std::to_string(id) +
                                  " is not in the network");
    token_rows_.push_back(*idx);
  }
}

SegIndex Model::token_segment(Token t) const {
  if (t < kFirstSegmentToken || static_cast<std::size_t>(t) >= vocab_size())
    throw std::out_of_range("token " + std::to_string(t) + " is not a segment token");
  return token_rows_[static_cast<std::size_t>(t - kFirstSegmentToken)];
}

ad::Var Model::segment_embeddings(Binder& bind) const {
  if (!cfg_.use_gat) return bind("emb.segments");
  const Tensor64 f = data_.features.cast<double>();
  return encode_segments(bind, bind.graph().constant(f), graph_, cfg_.gat);
}

ad::Var Model::token_table(Binder& bind, ad::Var segments) const {
  const ad::Var parts[2] = {bind("tok.special"), ad::gather_rows(segments, token_rows_)};
  return ad::concat_rows(parts);
}

ad::Var Model::forward(Binder& bind, ad::Var table, std::span<const std::span<const Token>> seqs,
                       AttentionTrace* trace) const {
  if (seqs.empty()) throw std::invalid_argument("forward: no sequences");
  std::vector<std::uint32_t> rows;
  std::vector<std::size_t> offsets{0};
  for (const auto& s : seqs) {
    if (s.empty()) throw std::invalid_argument("forward: empty sequence");
    for (Token t : s) {
      if (t < 0 || static_cast<std::size_t>(t) >= vocab_size())
        throw std::out_of_range("forward: token " + std::to_string(t) + " outside the vocabulary");
      rows.push_back(static_cast<std::uint32_t>(t));
    }
    offsets.push_back(rows.size());
  }
  const ad::Var h = ad::gather_rows(table, rows);

  ad::Var z = h;
  if (cfg_.use_gpe) {
    std::vector<ad::Var> parts;
    for (const auto& s : seqs) {
      std::vector<std::optional<SegIndex>> pos(s.size());
      for (std::size_t i = 0; i < s.size(); ++i)
        if (s[i] >= kFirstSegmentToken) pos[i] = token_segment(s[i]);
      parts.push_back(gpe(bind, s, pairwise_hops(pos, hops_), cfg_.gpe));
    }
    z = embed_inputs(h, parts.size() == 1 ? parts.front() : ad::concat_rows(parts));
  }

  BiasFn bias;
  if (cfg_.use_rpe) bias = [&bind, this](std::size_t n) { return rpe_bias(bind, n, cfg_.rpe); };
  const ad::Var logits = decode_packed(bind, z, cfg_.dec, offsets, bias, trace);
  return ad::masked_fill(logits, prediction_mask(logits.rows(), logits.cols()),
                         -std::numeric_limits<double>::infinity());
}

}  // namespace getad
