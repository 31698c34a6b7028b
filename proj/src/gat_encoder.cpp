#include "getad/gat_encoder.hpp"

#include <stdexcept>

namespace getad {

Activation parse_activation(const std::string& s) {
  if (s == "elu") return Activation::elu;
  if (s == "relu") return Activation::relu;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

std::string to_string(Activation a) { return a == Activation::elu ? "elu" : "relu"; }

void GatConfig::validate() const {
  if (layers < 1) throw std::invalid_argument("gat: layers must be >= 1");
  if (heads < 1) throw std::invalid_argument("gat: heads must be >= 1");
  if (d_model % heads != 0) throw std::invalid_argument("gat: d_model must be divisible by heads");
}

AttentionGraph AttentionGraph::build(const RoadNetwork& net, std::span<const float> edge_prob,
                                     bool self_loops) {
  if (edge_prob.size() != net.edge_count())
    throw std::invalid_argument("attention graph: " + std::to_string(edge_prob.size()) +
                                " probabilities for " + std::to_string(net.edge_count()) + " edges");
  AttentionGraph g;
  g.nodes = net.size();
  g.offsets.push_back(0);
  std::size_t e = 0;
  for (SegIndex u = 0; u < net.size(); ++u) {
    if (self_loops) {
      g.source.push_back(u);
      g.target.push_back(u);
      g.prob.push_back(1.0f);
    }
    for (SegIndex v : net.successors(u)) {
      g.source.push_back(u);
      g.target.push_back(v);
      g.prob.push_back(edge_prob[e++]);
    }
    if (g.source.size() == g.offsets.back())
      throw std::invalid_argument("attention graph: segment " + std::to_string(net.segment(u).id) +
                                  " has an empty neighborhood (enable self loops)");
    g.offsets.push_back(g.source.size());
  }
  return g;
}

std::vector<float> edge_probabilities(const RoadNetwork& net, const TransitionStats& stats) {
  std::vector<float> out;
  out.reserve(net.edge_count());
  for (auto [u, v] : net.edges()) out.push_back(static_cast<float>(stats.prob(u, v)));
  return out;
}

namespace {

std::string key(std::size_t layer, std::size_t head, const char* name) {
  return "gat." + std::to_string(layer) + "." + std::to_string(head) + "." + name;
}

}  // namespace

void init_gat_params(ParamSet& params, std::size_t feature_width, const GatConfig& cfg,
                     std::mt19937_64& rng) {
  cfg.validate();
  if (feature_width != cfg.d_model) params.add("gat.in_proj", glorot(feature_width, cfg.d_model, rng));
  const std::size_t dh = cfg.head_width();
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    for (std::size_t k = 0; k < cfg.heads; ++k) {
      params.add(key(l, k, "w1"), glorot(cfg.d_model, dh, rng));
      params.add(key(l, k, "w2"), glorot(cfg.d_model, dh, rng));
      params.add(key(l, k, "w3"), glorot(cfg.d_model, dh, rng));
      params.add(key(l, k, "a1"), glorot(dh, 1, rng));
      params.add(key(l, k, "a2"), glorot(1, dh, rng));
    }
  }
}

ad::Var gat_layer(Binder& bind, std::size_t layer, ad::Var h, const AttentionGraph& graph,
                  const GatConfig& cfg, std::vector<ad::Var>* attention) {
  if (h.rows() != graph.nodes)
    throw ShapeError("gat_layer: " + std::to_string(h.rows()) + " feature rows for " +
                     std::to_string(graph.nodes) + " nodes");
  ad::Graph& g = bind.graph();
  Tensor64 p(graph.prob.size(), 1);
  for (std::size_t e = 0; e < graph.prob.size(); ++e) p[e] = graph.prob[e];
  const ad::Var pcol = g.constant(std::move(p));

  std::vector<ad::Var> heads;
  for (std::size_t k = 0; k < cfg.heads; ++k) {
    const ad::Var left = ad::gather_rows(ad::matmul(h, bind(key(layer, k, "w1"))), graph.source);
    const ad::Var right = ad::gather_rows(ad::matmul(h, bind(key(layer, k, "w2"))), graph.target);
    const ad::Var bias = ad::matmul(pcol, bind(key(layer, k, "a2")));
    const ad::Var pre = ad::leaky_relu(ad::add(ad::add(left, right), bias), 0.01);
    const ad::Var score = ad::matmul(pre, bind(key(layer, k, "a1")));
    const ad::Var alpha = ad::segment_softmax(score, graph.offsets);
    if (attention) attention->push_back(alpha);
    const ad::Var msg = ad::mul_col(
        ad::gather_rows(ad::matmul(h, bind(key(layer, k, "w3"))), graph.target), alpha);
    heads.push_back(ad::scatter_add_rows(msg, graph.source, graph.nodes));
  }
  const ad::Var cat = ad::concat_cols(heads);
  return cfg.activation == Activation::elu ? ad::elu(cat) : ad::relu(cat);
}

ad::Var encode_segments(Binder& bind, ad::Var features, const AttentionGraph& graph,
                        const GatConfig& cfg) {
  cfg.validate();
  ad::Var h = features;
  if (bind.params().contains("gat.in_proj")) {
    h = ad::matmul(h, bind("gat.in_proj"));
  } else if (h.cols() != cfg.d_model) {
    throw ShapeError("encode_segments: feature width " + std::to_string(h.cols()) +
                     " != d_model " + std::to_string(cfg.d_model));
  }
  for (std::size_t l = 0; l < cfg.layers; ++l) h = gat_layer(bind, l, h, graph, cfg);
  return h;
}

}  // namespace getad
