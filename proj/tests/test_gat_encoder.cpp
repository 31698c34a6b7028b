#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "getad/gat_encoder.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace getad;
using testing::seg;

namespace {

struct Setup {
  RoadNetwork net;
  std::vector<float> prob;
  std::map<std::pair<std::size_t, std::size_t>, double> pmap;

  double p(std::size_t i, std::size_t j) const { return pmap.at({i, j}); }
};

Setup with_random_probs(RoadNetwork net, std::mt19937_64& rng) {
  Setup s{std::move(net), {}, {}};
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto [a, b] : s.net.edges()) {
    const float v = static_cast<float>(u(rng));
    s.prob.push_back(v);
    s.pmap[{a, b}] = v;
  }
  return s;
}

// A -> {B, C}, B -> D, C -> E, D -> A, E -> A
RoadNetwork fork_network() {
  return RoadNetwork({seg(1, 0, 1), seg(2, 1, 2), seg(3, 1, 3), seg(4, 2, 0), seg(5, 3, 0)}, {"c"});
}

struct Run {
  Tensor64 out;
  std::vector<Tensor64> alpha;
};

Run run_layer(const ParamSet& ps, const Tensor64& h, const AttentionGraph& ag, const GatConfig& cfg) {
  ad::Graph g;
  Binder bind(g, ps, false);
  std::vector<ad::Var> att;
  auto y = gat_layer(bind, 0, g.constant(h), ag, cfg, &att);
  Run r{y.value(), {}};
  for (auto a : att) r.alpha.push_back(a.value());
  return r;
}

}  // namespace

TEST_CASE("identical neighbors with equal probability share attention evenly") {
  auto net = fork_network();
  std::mt19937_64 rng(1);
  GatConfig cfg;
  cfg.d_model = 8;
  cfg.heads = 2;
  cfg.layers = 1;
  cfg.self_loops = false;
  ParamSet ps;
  init_gat_params(ps, 8, cfg, rng);
  Tensor64 h = testing::randn(5, 8, rng);
  for (std::size_t c = 0; c < 8; ++c) h(net.index(3), c) = h(net.index(2), c);
  std::vector<float> prob(net.edge_count(), 0.5f);
  auto ag = AttentionGraph::build(net, prob, false);
  auto r = run_layer(ps, h, ag, cfg);
  const SegIndex A = net.index(1), B = net.index(2);
  for (const auto& alpha : r.alpha) {
    REQUIRE(ag.offsets[A + 1] - ag.offsets[A] == 2);
    CHECK(alpha[ag.offsets[A]] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(alpha[ag.offsets[A] + 1] == doctest::Approx(0.5).epsilon(1e-12));
    // B has exactly one neighbor
    REQUIRE(ag.offsets[B + 1] - ag.offsets[B] == 1);
    CHECK(alpha[ag.offsets[B]] == 1.0);
  }
}

TEST_CASE("without self loops an isolated segment is an error") {
  RoadNetwork net({seg(1, 0, 1), seg(2, 5, 6)}, {"c"});
  std::vector<float> none;
  CHECK_THROWS_AS(AttentionGraph::build(net, none, false), std::invalid_argument);
  auto ag = AttentionGraph::build(net, none, true);
  CHECK(ag.source.size() == 2);
}

TEST_CASE("single-head ring with identity output projection applies the activation to the successor") {
  // ring of 4 one-way segments, each with one successor
  RoadNetwork net({seg(1, 0, 1), seg(2, 1, 2), seg(3, 2, 3), seg(4, 3, 0)}, {"c"});
  std::mt19937_64 rng(2);
  GatConfig cfg;
  cfg.d_model = 4;
  cfg.heads = 1;
  cfg.layers = 1;
  cfg.self_loops = false;
  ParamSet ps;
  init_gat_params(ps, 4, cfg, rng);
  Tensor& w3 = ps.at("gat.0.0.w3");
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) w3(i, j) = i == j ? 1.0f : 0.0f;
  Tensor64 h = testing::randn(4, 4, rng);
  std::vector<float> prob(net.edge_count(), 1.0f);
  auto ag = AttentionGraph::build(net, prob, false);
  auto r = run_layer(ps, h, ag, cfg);
  for (SegIndex i = 0; i < 4; ++i) {
    const SegIndex nxt = net.successors(i)[0];
    for (std::size_t c = 0; c < 4; ++c) {
      const double x = h(nxt, c);
      CHECK(r.out(i, c) == doctest::Approx(x > 0 ? x : std::expm1(x)).epsilon(1e-12));
    }
  }
}

TEST_CASE("no adjacency with self loops attends only to itself") {
  RoadNetwork net({seg(1, 0, 1), seg(2, 2, 3), seg(3, 4, 5)}, {"c"});
  std::mt19937_64 rng(3);
  GatConfig cfg;
  cfg.d_model = 6;
  cfg.heads = 3;
  cfg.layers = 1;
  ParamSet ps;
  init_gat_params(ps, 6, cfg, rng);
  Tensor64 h = testing::randn(3, 6, rng);
  auto ag = AttentionGraph::build(net, {}, true);
  auto r = run_layer(ps, h, ag, cfg);
  for (const auto& alpha : r.alpha)
    for (double a : alpha.values()) CHECK(a == 1.0);
  for (std::size_t k = 0; k < 3; ++k) {
    auto w3 = ps.at("gat.0." + std::to_string(k) + ".w3");
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t c = 0; c < 2; ++c) {
        double v = 0.0;
        for (std::size_t r2 = 0; r2 < 6; ++r2) v += h(i, r2) * w3(r2, c);
        CHECK(r.out(i, k * 2 + c) == doctest::Approx(v > 0 ? v : std::expm1(v)).epsilon(1e-12));
      }
  }
}

TEST_CASE("5-node toy graph matches the double-loop oracle") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    auto s = with_random_probs(fork_network(), rng);
    GatConfig cfg;
    cfg.d_model = 8;
    cfg.heads = trial % 2 ? 4 : 2;
    cfg.layers = 1 + trial % 2;
    cfg.activation = trial % 3 ? Activation::elu : Activation::relu;
    cfg.self_loops = trial % 4 != 3;
    ParamSet ps;
    init_gat_params(ps, 5, cfg, rng);
    Tensor64 f = testing::randn(5, 5, rng);
    auto ag = AttentionGraph::build(s.net, s.prob, cfg.self_loops);
    ad::Graph g;
    Binder bind(g, ps, false);
    auto y = encode_segments(bind, g.constant(f), ag, cfg).value();
    auto ref = oracle::gat_encoder(ps, oracle::to_mat(f), s.net,
                                   [&](std::size_t i, std::size_t j) { return s.p(i, j); }, cfg);
    CHECK(oracle::max_abs_diff(ref, y) <= 1e-5);

    std::vector<ad::Var> att;
    ad::Graph g2;
    Binder b2(g2, ps, false);
    auto h1 = ad::matmul(g2.constant(f), b2("gat.in_proj"));
    gat_layer(b2, 0, h1, ag, cfg, &att);
    for (auto a : att)
      for (std::size_t i = 0; i < 5; ++i) {
        double sum = 0.0;
        for (std::size_t e = ag.offsets[i]; e < ag.offsets[i + 1]; ++e) {
          CHECK(a.value()[e] >= 0.0);
          sum += a.value()[e];
        }
        CHECK(std::abs(sum - 1.0) <= 1e-6);
      }
  }
}

TEST_CASE("attention weight grows with transition probability") {
  auto net = fork_network();
  std::mt19937_64 rng(5);
  GatConfig cfg;
  cfg.d_model = 4;
  cfg.heads = 1;
  cfg.layers = 1;
  cfg.self_loops = false;
  ParamSet ps;
  init_gat_params(ps, 4, cfg, rng);
  // a1 = a2 > 0 and a large positive projection keep LeakyReLU in its identity region
  for (auto* name : {"gat.0.0.a1", "gat.0.0.a2"})
    for (auto& v : ps.at(name).values()) v = 0.5f;
  for (auto* name : {"gat.0.0.w1", "gat.0.0.w2"})
    for (auto& v : ps.at(name).values()) v = 1.0f;
  Tensor64 h(5, 4, 1.0);
  const SegIndex A = net.index(1);
  auto edges = net.edges();
  std::size_t e_ab = 0;
  while (!(edges[e_ab].first == A && edges[e_ab].second == net.index(2))) ++e_ab;
  double prev = -1.0;
  for (float p : {0.0f, 0.1f, 0.3f, 0.5f, 0.7f, 0.9f, 1.0f}) {
    std::vector<float> prob(net.edge_count(), 0.5f);
    prob[e_ab] = p;
    auto ag = AttentionGraph::build(net, prob, false);
    auto r = run_layer(ps, h, ag, cfg);
    std::size_t slot = ag.offsets[A];
    while (ag.target[slot] != net.index(2)) ++slot;
    const double a = r.alpha[0][slot];
    CHECK(a > prev);
    prev = a;
  }
}

TEST_CASE("relabeling segments permutes the outputs") {
  std::mt19937_64 rng(6);
  auto base = testing::grid(3, 3);
  std::vector<SegmentId> perm(base.size());
  std::iota(perm.begin(), perm.end(), SegmentId{1});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<SegmentRecord> relabeled = base.segments();
  for (std::size_t i = 0; i < relabeled.size(); ++i) relabeled[i].id = 1000 + perm[i];
  RoadNetwork other(relabeled, base.class_names());

  // probability and features are functions of the original segment
  auto prob_of = [](SegmentId a, SegmentId b) { return static_cast<float>(((a * 31 + b * 17) % 97) / 97.0); };
  auto probs = [&](const RoadNetwork& n, auto orig) {
    std::vector<float> p;
    for (auto [u, v] : n.edges()) p.push_back(prob_of(orig(u), orig(v)));
    return p;
  };
  std::map<SegmentId, SegmentId> back;
  for (std::size_t i = 0; i < relabeled.size(); ++i) back[relabeled[i].id] = base.segments()[i].id;
  auto orig_base = [&](SegIndex u) { return base.segment(u).id; };
  auto orig_other = [&](SegIndex u) { return back.at(other.segment(u).id); };

  Tensor64 f = testing::randn(base.size(), 6, rng);
  Tensor64 f2(base.size(), 6);
  for (SegIndex u = 0; u < other.size(); ++u) {
    const SegIndex src = base.index(orig_other(u));
    for (std::size_t c = 0; c < 6; ++c) f2(u, c) = f(src, c);
  }
  GatConfig cfg;
  cfg.d_model = 8;
  cfg.heads = 2;
  ParamSet ps;
  init_gat_params(ps, 6, cfg, rng);
  auto run = [&](const RoadNetwork& n, const std::vector<float>& p, const Tensor64& x) {
    ad::Graph g;
    Binder bind(g, ps, false);
    return encode_segments(bind, g.constant(x), AttentionGraph::build(n, p, true), cfg).value();
  };
  auto y1 = run(base, probs(base, orig_base), f);
  auto y2 = run(other, probs(other, orig_other), f2);
  for (SegIndex u = 0; u < other.size(); ++u) {
    const SegIndex src = base.index(orig_other(u));
    for (std::size_t c = 0; c < 8; ++c) CHECK(y2(u, c) == doctest::Approx(y1(src, c)).epsilon(1e-9));
  }
}

TEST_CASE("grid world two-layer four-head stack: finite outputs and gradients") {
  std::mt19937_64 rng(7);
  {
    GridSpec spec;
    auto net = grid_network(spec);
    auto s = with_random_probs(net, rng);
    GatConfig cfg;  // L = 2, H = 4, d_model = 64
    ParamSet ps;
    init_gat_params(ps, 10, cfg, rng);
    ad::Graph g;
    Binder bind(g, ps, false);
    auto y = encode_segments(bind, g.constant(testing::randn(net.size(), 10, rng)),
                             AttentionGraph::build(s.net, s.prob, true), cfg);
    for (double v : y.value().values()) CHECK(std::isfinite(v));
  }
  auto s = with_random_probs(testing::grid(3, 3), rng);
  GatConfig cfg;
  cfg.d_model = 8;
  cfg.heads = 4;
  cfg.layers = 2;
  ParamSet ps;
  init_gat_params(ps, 5, cfg, rng);
  auto ag = AttentionGraph::build(s.net, s.prob, true);
  auto rep = testing::check_params(ps, {testing::randn(s.net.size(), 5, rng)},
                                   [&](Binder& b, std::span<const ad::Var> x) {
                                     return encode_segments(b, x[0], ag, cfg);
                                   });
  INFO("rel " << rep.max_rel_err << " at " << rep.worst << " skipped " << rep.skipped);
  CHECK(rep.passed);
  CHECK(rep.max_rel_err <= 1e-4);
}
