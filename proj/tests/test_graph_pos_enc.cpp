#include <doctest.h>

#include "getad/graph_pos_enc.hpp"
#include "helpers.hpp"

using namespace getad;

namespace {

std::vector<std::optional<SegIndex>> as_positions(std::span<const SegIndex> path) {
  return {path.begin(), path.end()};
}

ParamSet gpe_params(std::size_t d, std::uint32_t d_max, std::mt19937_64& rng) {
  ParamSet ps;
  GpeConfig cfg;
  cfg.d_max = d_max;
  init_gpe_params(ps, d, cfg, rng);
  return ps;
}

Tensor64 run_gpe(const ParamSet& ps, std::span<const Token> tokens, const HopMatrix& hm,
                 const GpeConfig& cfg) {
  ad::Graph g;
  Binder bind(g, ps, false);
  return gpe(bind, tokens, hm, cfg).value();
}

}  // namespace

TEST_CASE("hop matrix on a one-way path") {
  auto net = testing::path_network(3);
  HopCache hc(net, 5);
  std::vector<SegIndex> p{net.index(1), net.index(2), net.index(3)};
  auto hm = pairwise_hops(as_positions(p), hc);
  const std::vector<int> expect{0, 1, 2, 5, 0, 1, 5, 5, 0};
  CHECK(hm.d == expect);
}

TEST_CASE("hop matrix equals a capped Dijkstra on a grid trajectory") {
  auto net = testing::grid(8, 8, 4);
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    auto walk = testing::random_walk(net, 12, rng);
    REQUIRE(walk.size() == 12);
    const std::uint32_t d_max = 6;
    HopCache hc(net, d_max);
    auto hm = pairwise_hops(as_positions(walk), hc);
    for (std::size_t i = 0; i < 12; ++i) {
      CHECK(hm(i, i) == 0);
      auto d = testing::dijkstra(net, walk[i]);
      for (std::size_t j = 0; j < 12; ++j)
        if (i != j) CHECK(hm(i, j) == static_cast<int>(std::min(d[walk[j]], d_max)));
    }
  }
}

TEST_CASE("special positions are excluded from the hop matrix") {
  auto net = testing::path_network(3);
  HopCache hc(net, 4);
  std::vector<std::optional<SegIndex>> pos{std::nullopt, SegIndex{0}, SegIndex{1}, std::nullopt};
  auto hm = pairwise_hops(pos, hc);
  CHECK(hm(0, 1) == HopMatrix::kSpecial);
  CHECK(hm(1, 3) == HopMatrix::kSpecial);
  CHECK(hm(1, 2) == 1);
}

TEST_CASE("a single segment gets the distance-0 row") {
  std::mt19937_64 rng(1);
  auto ps = gpe_params(6, 4, rng);
  HopMatrix hm{1, {0}};
  const std::vector<Token> tok{kFirstSegmentToken};
  GpeConfig cfg;
  cfg.d_max = 4;
  auto ge = run_gpe(ps, tok, hm, cfg);
  for (std::size_t c = 0; c < 6; ++c) CHECK(ge(0, c) == static_cast<double>(ps.at("gpe.dist")(0, c)));
}

TEST_CASE("special tokens take their dedicated rows regardless of hops") {
  std::mt19937_64 rng(2);
  auto ps = gpe_params(5, 3, rng);
  const std::vector<Token> tok{kSot, 7, 8, kEot, kPad};
  GpeConfig cfg;
  cfg.d_max = 3;
  HopMatrix a{5, std::vector<int>(25, HopMatrix::kSpecial)};
  a.d[1 * 5 + 1] = a.d[2 * 5 + 2] = 0;
  a.d[1 * 5 + 2] = 1;
  a.d[2 * 5 + 1] = 3;
  HopMatrix b = a;
  b.d[1 * 5 + 2] = 2;
  b.d[2 * 5 + 1] = 2;
  for (auto* hm : {&a, &b}) {
    auto ge = run_gpe(ps, tok, *hm, cfg);
    const auto& sp = ps.at("gpe.special");
    for (std::size_t c = 0; c < 5; ++c) {
      CHECK(ge(0, c) == static_cast<double>(sp(kSot, c)));
      CHECK(ge(3, c) == static_cast<double>(sp(kEot, c)));
      CHECK(ge(4, c) == static_cast<double>(sp(kPad, c)));
    }
  }
}

TEST_CASE("full-horizon sum equals the direct row sum") {
  std::mt19937_64 rng(3);
  auto net = testing::grid(6, 6, 2);
  const std::uint32_t d_max = 5;
  auto ps = gpe_params(7, d_max, rng);
  auto walk = testing::random_walk(net, 5, rng);
  HopCache hc(net, d_max);
  auto hm = pairwise_hops(as_positions(walk), hc);
  std::vector<Token> tok(5, kFirstSegmentToken);
  GpeConfig cfg;
  cfg.d_max = d_max;
  cfg.horizon = GpeHorizon::full;
  auto ge = run_gpe(ps, tok, hm, cfg);
  const auto& table = ps.at("gpe.dist");
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t c = 0; c < 7; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < 5; ++j) s += table(static_cast<std::size_t>(hm(i, j)), c);
      CHECK(ge(i, c) == doctest::Approx(s).epsilon(1e-12));
    }

  cfg.aggregation = GpeAggregation::mean;
  auto gm = run_gpe(ps, tok, hm, cfg);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t c = 0; c < 7; ++c) CHECK(gm(i, c) == doctest::Approx(ge(i, c) / 5.0).epsilon(1e-12));
}

TEST_CASE("causal embedding of a prefix ignores later tokens") {
  std::mt19937_64 rng(4);
  auto net = testing::grid(7, 7, 5);
  const std::uint32_t d_max = 6;
  auto ps = gpe_params(4, d_max, rng);
  HopCache hc(net, d_max);
  GpeConfig cfg;
  cfg.d_max = d_max;
  for (int trial = 0; trial < 20; ++trial) {
    auto a = testing::random_walk(net, 10, rng);
    auto b = a;
    const std::size_t cut = 1 + trial % 8;
    std::uniform_int_distribution<SegIndex> any(0, static_cast<SegIndex>(net.size() - 1));
    for (std::size_t k = cut; k < b.size(); ++k) b[k] = any(rng);
    auto toks = [](std::size_t n) {
      std::vector<Token> t{kSot};
      t.insert(t.end(), n, kFirstSegmentToken);
      t.push_back(kEot);
      return t;
    };
    auto with_specials = [](std::span<const SegIndex> p) {
      std::vector<std::optional<SegIndex>> out{std::nullopt};
      out.insert(out.end(), p.begin(), p.end());
      out.push_back(std::nullopt);
      return out;
    };
    auto ga = run_gpe(ps, toks(a.size()), pairwise_hops(with_specials(a), hc), cfg);
    auto gb = run_gpe(ps, toks(b.size()), pairwise_hops(with_specials(b), hc), cfg);
    for (std::size_t i = 0; i <= cut; ++i)
      for (std::size_t c = 0; c < 4; ++c) CHECK(ga(i, c) == gb(i, c));
  }
}

TEST_CASE("gradient reaches exactly the distance rows in use") {
  std::mt19937_64 rng(5);
  const std::uint32_t d_max = 8;
  auto ps = gpe_params(3, d_max, rng);
  // distances 0, 2 and 5 only
  HopMatrix hm{3, {0, 2, 5, 5, 0, 2, 5, 5, 0}};
  const std::vector<Token> tok(3, kFirstSegmentToken);
  GpeConfig cfg;
  cfg.d_max = d_max;
  cfg.horizon = GpeHorizon::full;
  ad::Graph g;
  Binder bind(g, ps);
  g.backward(ad::sum(gpe(bind, tok, hm, cfg)));
  const Tensor64 grad = g.grad(bind.bound().at("gpe.dist"));
  for (std::size_t r = 0; r <= d_max; ++r) {
    const bool used = r == 0 || r == 2 || r == 5;
    for (std::size_t c = 0; c < 3; ++c) CHECK((grad(r, c) != 0.0) == used);
  }
}

TEST_CASE("relative position bias") {
  ParamSet ps;
  RpeConfig cfg;
  cfg.clip = 2;
  init_rpe_params(ps, cfg);
  for (std::size_t i = 0; i < 5; ++i) ps.at("rpe.table")[i] = static_cast<float>(10 + i);
  ad::Graph g;
  Binder bind(g, ps, false);
  auto b = rpe_bias(bind, 7, cfg).value();
  CHECK(b(0, 5) == 14.0);  // offset +5 clips to +2
  CHECK(b(6, 0) == 10.0);
  for (std::size_t i = 0; i < 7; ++i) CHECK(b(i, i) == 12.0);

  std::mt19937_64 rng(6);
  RpeConfig c16;
  ParamSet p16;
  init_rpe_params(p16, c16);
  for (auto& v : p16.at("rpe.table").values()) v = static_cast<float>(testing::randn(1, 1, rng)[0]);
  ad::Graph g2;
  Binder b2(g2, p16, false);
  auto m = rpe_bias(b2, 8, c16).value();
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      int off = j - i;
      off = off < -16 ? -16 : off > 16 ? 16 : off;
      CHECK(m(i, j) == static_cast<double>(p16.at("rpe.table")[off + 16]));
    }
}
