#include "getad/gradcheck_suite.hpp"

#include <random>

#include "getad/gat_encoder.hpp"
#include "getad/graph_pos_enc.hpp"
#include "getad/model.hpp"
#include "getad/train_engine.hpp"
#include "getad/traj_decoder.hpp"

namespace getad {
namespace {

using ad::Graph;
using ad::Var;
using Inputs = std::span<const Var>;

Tensor64 randn(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor64 t(r, c);
  for (double& x : t.values()) x = n(rng);
  return t;
}

Tensor64 positive(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.5, 1.5);
  Tensor64 t(r, c);
  for (double& x : t.values()) x = u(rng);
  return t;
}

using Body = std::function<Var(Binder&, Inputs extra)>;

// Every parameter of ps becomes a gradcheck input, after the extra tensors.
GradcheckReport check_params(const ParamSet& ps, std::vector<Tensor64> extra, const Body& body,
                             double eps, double tol) {
  const std::size_t n_extra = extra.size();
  for (const auto& [name, t] : ps.entries()) extra.push_back(t.cast<double>());
  Composite f = [&ps, n_extra, &body](Graph& g, Inputs in) {
    Binder bind(g, ps);
    std::size_t k = n_extra;
    for (const auto& [name, t] : ps.entries()) bind.use(name, in[k++]);
    return body(bind, in.first(n_extra));
  };
  return gradcheck(f, std::move(extra), eps, tol);
}

// Four intersections on a two-way ring: 8 segments.
RoadNetwork toy_network() {
  std::vector<SegmentRecord> segs;
  SegmentId id = 1;
  for (NodeId a = 0; a < 4; ++a) {
    const NodeId b = (a + 1) % 4;
    segs.push_back({id++, 100.0 + 10.0 * static_cast<double>(a), 0, 1, 30.0, a, b});
    segs.push_back({id++, 120.0, static_cast<int>(a % 2), 2, 50.0, b, a});
  }
  return RoadNetwork(std::move(segs), {"residential", "primary"});
}

}  // namespace

std::vector<NamedReport> run_gradcheck_suite(std::uint64_t seed, double eps, double tol) {
  std::mt19937_64 rng(seed);
  std::vector<NamedReport> out;
  auto run = [&](const std::string& name, const Composite& f, std::vector<Tensor64> in) {
    out.push_back({name, gradcheck(f, std::move(in), eps, tol)});
  };

  // ---- primitives ----
  run("matmul", [](Graph&, Inputs v) { return ad::matmul(v[0], v[1]); },
      {randn(3, 4, rng), randn(4, 2, rng)});
  run("transpose", [](Graph&, Inputs v) { return ad::transpose(v[0]); }, {randn(3, 4, rng)});
  run("add", [](Graph&, Inputs v) { return ad::add(v[0], v[1]); }, {randn(3, 2, rng), randn(3, 2, rng)});
  run("sub", [](Graph&, Inputs v) { return ad::sub(v[0], v[1]); }, {randn(3, 2, rng), randn(3, 2, rng)});
  run("add_row", [](Graph&, Inputs v) { return ad::add_row(v[0], v[1]); },
      {randn(4, 3, rng), randn(1, 3, rng)});
  run("scale", [](Graph&, Inputs v) { return ad::scale(v[0], -1.7); }, {randn(2, 3, rng)});
  run("mul", [](Graph&, Inputs v) { return ad::mul(v[0], v[1]); }, {randn(3, 3, rng), randn(3, 3, rng)});
  run("mul_col", [](Graph&, Inputs v) { return ad::mul_col(v[0], v[1]); },
      {randn(4, 3, rng), randn(4, 1, rng)});
  run("concat_cols", [](Graph&, Inputs v) { return ad::concat_cols(v); },
      {randn(3, 2, rng), randn(3, 1, rng), randn(3, 3, rng)});
  run("concat_rows", [](Graph&, Inputs v) { return ad::concat_rows(v); },
      {randn(2, 3, rng), randn(1, 3, rng)});
  run("slice_cols", [](Graph&, Inputs v) { return ad::slice_cols(v[0], 1, 2); }, {randn(3, 4, rng)});
  run("slice_rows", [](Graph&, Inputs v) { return ad::slice_rows(v[0], 1, 2); }, {randn(4, 3, rng)});
  run("reshape", [](Graph&, Inputs v) { return ad::reshape(v[0], 2, 6); }, {randn(3, 4, rng)});
  run("gather_rows",
      [](Graph&, Inputs v) {
        const std::uint32_t idx[] = {2, 0, 2, 1};
        return ad::gather_rows(v[0], idx);
      },
      {randn(3, 2, rng)});
  run("scatter_add_rows",
      [](Graph&, Inputs v) {
        const std::uint32_t idx[] = {1, 1, 3};
        return ad::scatter_add_rows(v[0], idx, 4);
      },
      {randn(3, 2, rng)});
  run("pick",
      [](Graph&, Inputs v) {
        const int col[] = {2, -1, 0};
        return ad::pick(v[0], col);
      },
      {randn(3, 4, rng)});
  run("leaky_relu", [](Graph&, Inputs v) { return ad::leaky_relu(v[0], 0.2); }, {randn(4, 3, rng)});
  run("elu", [](Graph&, Inputs v) { return ad::elu(v[0]); }, {randn(4, 3, rng)});
  run("relu", [](Graph&, Inputs v) { return ad::relu(v[0]); }, {randn(4, 3, rng)});
  run("sigmoid", [](Graph&, Inputs v) { return ad::sigmoid(v[0]); }, {randn(4, 3, rng, 2.0)});
  run("softmax_rows", [](Graph&, Inputs v) { return ad::softmax_rows(v[0]); }, {randn(3, 5, rng)});
  run("log_softmax_rows", [](Graph&, Inputs v) { return ad::log_softmax_rows(v[0]); },
      {randn(3, 5, rng)});
  run("segment_softmax",
      [](Graph&, Inputs v) {
        const std::size_t off[] = {0, 3, 4, 7};
        return ad::segment_softmax(v[0], off);
      },
      {randn(7, 1, rng)});
  run("layer_norm", [](Graph&, Inputs v) { return ad::layer_norm(v[0], v[1], v[2]); },
      {randn(3, 5, rng), positive(1, 5, rng), randn(1, 5, rng)});
  run("dropout", [](Graph&, Inputs v) { return ad::dropout(v[0], 0.3); }, {randn(3, 3, rng)});
  run("masked_fill",
      [](Graph&, Inputs v) {
        const std::uint8_t m[] = {0, 1, 0, 0, 0, 1};
        return ad::masked_fill(v[0], m, -2.0);
      },
      {randn(2, 3, rng)});
  run("masked_softmax",
      [](Graph&, Inputs v) {
        const std::uint8_t m[] = {0, 1, 1, 0, 0, 1, 0, 0, 0};
        return ad::softmax_rows(ad::masked_fill(v[0], m, -std::numeric_limits<double>::infinity()));
      },
      {randn(3, 3, rng)});
  run("rowwise_dot", [](Graph&, Inputs v) { return ad::rowwise_dot(v[0], v[1]); },
      {randn(4, 3, rng), randn(4, 3, rng)});
  run("sum", [](Graph&, Inputs v) { return ad::sum(v[0]); }, {randn(3, 4, rng)});
  run("mean", [](Graph&, Inputs v) { return ad::mean(v[0]); }, {randn(3, 4, rng)});
  run("cross_entropy",
      [](Graph&, Inputs v) {
        const int t[] = {1, -1, 4, 0};
        return ad::cross_entropy(v[0], t);
      },
      {randn(4, 5, rng)});
  run("bce_with_logits",
      [](Graph&, Inputs v) {
        const double y[] = {1, 0, 0, 1, 1};
        return ad::bce_with_logits(v[0], y);
      },
      {randn(5, 1, rng, 2.0)});

  // ---- composed graphs ----
  const RoadNetwork net = toy_network();
  TransitionStats stats(net.size());
  std::vector<float> prob;
  {
    std::uniform_real_distribution<float> u(0.05f, 1.0f);
    for (std::size_t i = 0; i < net.edge_count(); ++i) prob.push_back(u(rng));
  }
  const AttentionGraph ag = AttentionGraph::build(net, prob, true);
  const std::size_t d0 = 5;

  {
    GatConfig cfg;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.d_model = 4;
    ParamSet ps;
    init_gat_params(ps, cfg.d_model, cfg, rng);
    out.push_back({"gat_layer", check_params(ps, {randn(net.size(), cfg.d_model, rng)},
                                             [&](Binder& b, Inputs x) {
                                               return gat_layer(b, 0, x[0], ag, cfg);
                                             },
                                             eps, tol)});
  }
  {
    GatConfig cfg;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.d_model = 4;
    ParamSet ps;
    init_gat_params(ps, d0, cfg, rng);
    out.push_back({"gat_encoder", check_params(ps, {randn(net.size(), d0, rng)},
                                               [&](Binder& b, Inputs x) {
                                                 return encode_segments(b, x[0], ag, cfg);
                                               },
                                               eps, tol)});
  }

  const HopCache hops(net, 3);
  const std::vector<Token> toks = {kSot, 3, 5, 7, 4, 9, kEot};
  std::vector<std::optional<SegIndex>> pos(toks.size());
  for (std::size_t i = 0; i < toks.size(); ++i)
    if (toks[i] >= kFirstSegmentToken) pos[i] = static_cast<SegIndex>(toks[i] - kFirstSegmentToken);
  const HopMatrix hm = pairwise_hops(pos, hops);
  for (GpeAggregation agg : {GpeAggregation::sum, GpeAggregation::mean}) {
    GpeConfig cfg;
    cfg.d_max = 3;
    cfg.aggregation = agg;
    ParamSet ps;
    init_gpe_params(ps, 4, cfg, rng);
    out.push_back({"gpe_" + to_string(agg),
                   check_params(ps, {}, [&](Binder& b, Inputs) { return gpe(b, toks, hm, cfg); },
                                eps, tol)});
  }
  {
    RpeConfig cfg;
    cfg.clip = 2;
    ParamSet ps;
    ps.add("rpe.table", randn(5, 1, rng).cast<float>());
    out.push_back({"rpe_bias", check_params(ps, {}, [&](Binder& b, Inputs) { return rpe_bias(b, 6, cfg); },
                                            eps, tol)});
  }

  const std::size_t vocab = 11;
  {
    DecoderConfig cfg;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.d_model = 4;
    cfg.d_ff = 8;
    ParamSet ps;
    init_decoder_params(ps, cfg, vocab, rng);
    ps.add("rpe.table", randn(5, 1, rng, 0.5).cast<float>());
    RpeConfig rc;
    rc.clip = 2;
    out.push_back({"decoder_block", check_params(ps, {randn(6, 4, rng)},
                                                 [&](Binder& b, Inputs x) {
                                                   return decode(b, x[0], cfg, rpe_bias(b, 6, rc));
                                                 },
                                                 eps, tol)});
  }
  {
    DecoderConfig cfg;
    cfg.layers = 2;
    cfg.heads = 2;
    cfg.d_model = 4;
    cfg.d_ff = 8;
    ParamSet ps;
    init_decoder_params(ps, cfg, vocab, rng);
    out.push_back({"decoder_ce", check_params(ps, {randn(7, 4, rng)},
                                              [&](Binder& b, Inputs x) {
                                                const Var lg = decode(b, x[0], cfg);
                                                const int t[] = {3, 5, 7, 4, 9, 1, -1};
                                                return ce_loss(lg, t);
                                              },
                                              eps, tol)});
  }
  {
    // Encoder, graph positions, decoder and both losses in one graph.
    ModelConfig mc;
    mc.d_model = 4;
    mc.gat.heads = 2;
    mc.dec.heads = 2;
    mc.dec.d_ff = 8;
    mc.dec.layers = 1;
    mc.gat.layers = 1;
    mc.gpe.d_max = 3;
    mc.sync();
    ModelData md;
    md.network = net;
    md.features = randn(net.size(), d0, rng).cast<float>();
    md.edge_prob = prob;
    std::vector<SegmentId> ids;
    for (const auto& s : net.segments()) ids.push_back(s.id);
    md.vocab = Vocab(ids);
    ParamSet ps;
    init_model_params(ps, mc, md, rng);
    // The default 0.02-scale embeddings put layer norm near a zero-variance
    // input, where curvature swamps a 1e-3 central difference.
    for (const char* name : {"tok.special", "gpe.dist", "gpe.special"})
      ps.at(name) = randn(ps.at(name).rows(), ps.at(name).cols(), rng).cast<float>();
    const Model model(mc, md);
    std::mt19937_64 prng(seed);
    const LinkPairs pairs = sample_link_pairs(net, prng, 1);
    const std::vector<Token> in = {kSot, 3, 5, 7, 4};
    const int tgt[] = {3, 5, 7, 4, kEot};
    TrainConfig tc;
    tc.model = mc;
    out.push_back({"model_total_loss", check_params(ps, {},
                                                    [&](Binder& b, Inputs) {
                                                      const Var seg = model.segment_embeddings(b);
                                                      const std::span<const Token> seqs[] = {in};
                                                      const Var lg = model.forward(
                                                          b, model.token_table(b, seg), seqs);
                                                      return total_loss(ce_loss(lg, tgt),
                                                                        link_loss(seg, pairs), tc);
                                                    },
                                                    eps, tol)});
  }
  return out;
}

}  // namespace getad
