#include <doctest.h>

#include <cmath>
#include <limits>

#include "getad/model.hpp"
#include "getad/traj_decoder.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace getad;

namespace {

DecoderConfig small_cfg(std::size_t layers = 2) {
  DecoderConfig c;
  c.layers = layers;
  c.heads = 2;
  c.d_model = 8;
  c.d_ff = 16;
  return c;
}

}  // namespace

TEST_CASE("input embedding is the sum of token and positional parts") {
  std::mt19937_64 rng(1);
  const Tensor64 h = testing::randn(4, 6, rng), ge = testing::randn(4, 6, rng);
  ad::Graph g;
  auto zero = g.constant(Tensor64(4, 6));
  CHECK(embed_inputs(g.constant(h), zero).value() == h);
  CHECK(embed_inputs(zero, g.constant(ge)).value() == ge);
  auto z = embed_inputs(g.constant(h), g.constant(ge)).value();
  for (std::size_t i = 0; i < h.size(); ++i) CHECK(z[i] == h[i] + ge[i]);
  CHECK_THROWS_AS(embed_inputs(g.constant(Tensor64(3, 6)), zero), ShapeError);
}

TEST_CASE("attention of a length-1 sequence is [[1]]") {
  std::mt19937_64 rng(2);
  auto cfg = small_cfg();
  ParamSet ps;
  init_decoder_params(ps, cfg, 5, rng);
  ad::Graph g;
  Binder bind(g, ps, false);
  AttentionTrace tr;
  decode(bind, g.constant(testing::randn(1, 8, rng)), cfg, std::nullopt, &tr);
  REQUIRE(tr.weights.size() == cfg.layers * cfg.heads);
  for (const auto& w : tr.weights) {
    REQUIRE(w.size() == 1);
    CHECK(w[0] == 1.0);
  }
}

TEST_CASE("attention never looks ahead") {
  std::mt19937_64 rng(3);
  auto cfg = small_cfg();
  ParamSet ps;
  init_decoder_params(ps, cfg, 5, rng);
  ad::Graph g;
  Binder bind(g, ps, false);
  AttentionTrace tr;
  decode(bind, g.constant(testing::randn(9, 8, rng, 3.0)), cfg, std::nullopt, &tr);
  for (const auto& w : tr.weights)
    for (std::size_t i = 0; i < 9; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < 9; ++j) {
        if (j > i) CHECK(w(i, j) == 0.0);
        s += w(i, j);
      }
      CHECK(std::abs(s - 1.0) <= 1e-6);
    }
}

TEST_CASE("length-6 logits match the per-position oracle") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    auto cfg = small_cfg(1 + trial % 2);
    ParamSet ps;
    init_decoder_params(ps, cfg, 7, rng);
    for (auto& [name, t] : ps.entries())
      if (name.find(".b") != std::string::npos || name.find(".g") != std::string::npos)
        for (auto& v : t.values()) v += static_cast<float>(testing::randn(1, 1, rng, 0.3)[0]);
    const Tensor64 z = testing::randn(6, 8, rng);
    const Tensor64 bias = testing::randn(6, 6, rng);
    const bool with_bias = trial % 3 == 0;
    ad::Graph g;
    Binder bind(g, ps, false);
    auto logits = decode(bind, g.constant(z), cfg,
                         with_bias ? std::optional<ad::Var>(g.constant(bias)) : std::nullopt)
                      .value();
    auto ref = oracle::decoder(ps, oracle::to_mat(z), cfg,
                               with_bias ? std::function<double(std::size_t, std::size_t)>(
                                               [&](std::size_t i, std::size_t j) { return bias(i, j); })
                                         : nullptr);
    CHECK(oracle::max_abs_diff(ref, logits) <= 1e-5);
  }
}

TEST_CASE("packed sequences decode like separate ones") {
  std::mt19937_64 rng(5);
  auto cfg = small_cfg();
  ParamSet ps;
  init_decoder_params(ps, cfg, 6, rng);
  const Tensor64 a = testing::randn(4, 8, rng), b = testing::randn(7, 8, rng);
  Tensor64 ab(11, 8);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < 8; ++c) ab(i, c) = a(i, c);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t c = 0; c < 8; ++c) ab(4 + i, c) = b(i, c);
  auto one = [&](const Tensor64& z) {
    ad::Graph g;
    Binder bind(g, ps, false);
    return decode(bind, g.constant(z), cfg).value();
  };
  ad::Graph g;
  Binder bind(g, ps, false);
  const std::size_t off[3] = {0, 4, 11};
  auto packed = decode_packed(bind, g.constant(ab), cfg, off).value();
  auto la = one(a), lb = one(b);
  for (std::size_t c = 0; c < 6; ++c) {
    for (std::size_t i = 0; i < 4; ++i) CHECK(packed(i, c) == la(i, c));
    for (std::size_t i = 0; i < 7; ++i) CHECK(packed(4 + i, c) == lb(i, c));
  }
}

TEST_CASE("next-token distribution") {
  Tensor64 flat(1, 4, 0.0);  // SOT, EOT, PAD, one segment
  auto p = next_token_dist(flat, 0);
  CHECK(p == std::vector<double>{0.0, 0.5, 0.0, 0.5});
  CHECK_THROWS_AS(next_token_dist(flat, 1), std::out_of_range);

  std::mt19937_64 rng(6);
  const Tensor64 logits = testing::randn(5, 12, rng, 4.0);
  for (std::size_t r = 0; r < 5; ++r) {
    auto q = next_token_dist(logits, r);
    CHECK(q[kPad] == 0.0);
    CHECK(q[kSot] == 0.0);
    double z = 0.0, sum = 0.0;
    for (std::size_t j = 0; j < 12; ++j)
      if (j != kSot && j != kPad) z += std::exp(logits(r, j));
    for (std::size_t j = 0; j < 12; ++j) {
      sum += q[j];
      if (j != kSot && j != kPad) CHECK(std::abs(q[j] - std::exp(logits(r, j)) / z) <= 1e-7);
    }
    CHECK(std::abs(sum - 1.0) <= 1e-6);
  }
}

TEST_CASE("decoder block gradients at toy size") {
  std::mt19937_64 rng(7);
  auto cfg = small_cfg(1);
  ParamSet ps;
  init_decoder_params(ps, cfg, 5, rng);
  auto rep = testing::check_params(ps, {testing::randn(6, 8, rng)},
                                   [&](Binder& b, std::span<const ad::Var> x) { return decode(b, x[0], cfg); });
  INFO("rel " << rep.max_rel_err << " at " << rep.worst);
  CHECK(rep.max_rel_err <= 1e-4);
  CHECK(rep.passed);
}

TEST_CASE("model logits at a position do not depend on later tokens") {
  GridSpec spec;
  spec.width = 5;
  spec.height = 5;
  spec.n_agents = 6;
  spec.trips_per_agent = 6;
  auto net = grid_network(spec);
  auto trajs = generate_trajectories(net, spec);
  ModelData data = prepare_data(net, trajs);
  ModelConfig cfg;
  cfg.d_model = 16;
  cfg.gat.heads = 2;
  cfg.dec.heads = 2;
  cfg.dec.d_ff = 32;
  cfg.sync();
  ParamSet ps;
  std::mt19937_64 rng(8);
  init_model_params(ps, cfg, data, rng);
  Model model(cfg, data);
  const Token V = static_cast<Token>(data.vocab.size());
  std::uniform_int_distribution<Token> any(kFirstSegmentToken, V - 1);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Token> a{kSot};
    for (int k = 0; k < 9; ++k) a.push_back(any(rng));
    a.push_back(kEot);
    auto b = a;
    const std::size_t cut = 1 + static_cast<std::size_t>(trial) % 9;
    for (std::size_t k = cut; k + 1 < b.size(); ++k) b[k] = any(rng);
    ad::Graph g;
    Binder bind(g, ps, false);
    auto table = model.token_table(bind, model.segment_embeddings(bind));
    std::span<const Token> seqs[2] = {a, b};
    auto logits = model.forward(bind, table, seqs).value();
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < cut; ++i)
      for (std::size_t c = 0; c < logits.cols(); ++c) CHECK(logits(i, c) == logits(n + i, c));
    for (std::size_t i = 0; i < 2 * n; ++i) {
      CHECK(logits(i, kSot) == -std::numeric_limits<double>::infinity());
      CHECK(logits(i, kPad) == -std::numeric_limits<double>::infinity());
      auto p = next_token_dist(logits, i);
      double s = 0.0;
      for (double v : p) s += v;
      CHECK(std::abs(s - 1.0) <= 1e-6);
    }
  }
}
