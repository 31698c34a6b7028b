#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "getad/anomaly_scores.hpp"
#include "getad/synth_world.hpp"
#include "helpers.hpp"

using namespace getad;

namespace {

ScoreBreakdown breakdown(std::vector<TokenScore> t, double h_max = std::log(4.0)) {
  return {std::move(t), h_max};
}

struct Fixture {
  std::vector<Trajectory> trajs;
  Checkpoint ckpt;
};

// Untrained model over a small grid world; scores need not be meaningful.
Fixture fixture(bool causal = true) {
  GridSpec spec;
  spec.width = 5;
  spec.height = 5;
  spec.n_agents = 10;
  spec.trips_per_agent = 10;
  auto net = grid_network(spec);
  Fixture f;
  f.trajs = generate_trajectories(net, spec);
  f.ckpt.data = prepare_data(net, f.trajs);
  auto& m = f.ckpt.config.model;
  m.d_model = 16;
  m.gat.heads = 2;
  m.dec.heads = 2;
  m.dec.d_ff = 32;
  if (!causal) m.gpe.horizon = GpeHorizon::full;
  m.sync();
  std::mt19937_64 rng(11);
  init_model_params(f.ckpt.params, m, f.ckpt.data, rng);
  return f;
}

}  // namespace

TEST_CASE("one-hot prediction scores zero surprise and full confidence") {
  const std::vector<double> p{0.0, 0.0, 0.0, 1.0, 0.0, 0.0};
  auto s = token_score(p, 3, 4);
  CHECK(s.l == 0.0);
  CHECK(s.H == 0.0);
  CHECK(s.c == 1.0);
}

TEST_CASE("uniform prediction has zero confidence") {
  const std::vector<double> p{0.0, 0.25, 0.0, 0.25, 0.25, 0.25};
  auto s = token_score(p, 4, 4);
  CHECK(s.c == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(s.c * s.l == doctest::Approx(0.0));
  CHECK(s.l == doctest::Approx(std::log(4.0)));
}

TEST_CASE("token score from logits matches the formulas") {
  std::mt19937_64 rng(1);
  const double inf = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 100; ++trial) {
    Tensor64 x = testing::randn(1, 6, rng, 2.0);
    x[kSot] = -inf;
    x[kPad] = -inf;
    const std::size_t target = 1 + 2 * static_cast<std::size_t>(trial % 3) % 5;  // 1, 3 or 5
    double z = 0.0;
    for (std::size_t j = 0; j < 6; ++j)
      if (std::isfinite(x[j])) z += std::exp(x[j]);
    double H = 0.0;
    for (std::size_t j = 0; j < 6; ++j)
      if (std::isfinite(x[j])) {
        const double p = std::exp(x[j]) / z;
        H -= p * std::log(p);
      }
    const double l = -std::log(std::exp(x[target]) / z);
    auto s = token_score_logits(x.values(), target, 4);
    CHECK(std::abs(s.l - l) <= 1e-7);
    CHECK(std::abs(s.H - H) <= 1e-7);
    CHECK(std::abs(s.c - (1.0 - H / std::log(4.0))) <= 1e-7);
  }
}

TEST_CASE("aggregate examples") {
  CHECK(nll(breakdown({{0, 0, 1}, {0, 0, 1}, {0, 0, 1}})) == 0.0);
  CHECK(nll(breakdown({{1, 0, 1}, {2, 0, 1}})) == 3.0);
  const double ln4 = std::log(4.0);
  CHECK(perplexity(breakdown({{ln4, 0, 0}, {ln4, 0, 0}})) == doctest::Approx(4.0));
  CHECK(perplexity(breakdown({{0, 0, 0}, {0, 0, 0}})) == 1.0);
  auto full = breakdown({{0.5, 0, 1}, {1.5, 0, 1}, {3.0, 0, 1}});
  CHECK(cw_nll(full) == nll(full));
  CHECK(cw_nll(breakdown({{0.5, 1, 0}, {1.5, 1, 0}})) == 0.0);
  CHECK_THROWS(nll(ScoreBreakdown{}));
  CHECK_THROWS(perplexity(ScoreBreakdown{}));
  CHECK_THROWS(cw_nll(ScoreBreakdown{}));
}

TEST_CASE("aggregates match their summation oracles") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 3.0), c01(0.0, 1.0);
  std::uniform_int_distribution<int> len(1, 40);
  for (int trial = 0; trial < 100; ++trial) {
    ScoreBreakdown b;
    const int n = len(rng);
    double s = 0.0, w = 0.0;
    for (int i = 0; i < n; ++i) {
      TokenScore t{u(rng), 0.0, c01(rng)};
      b.tokens.push_back(t);
      s += t.l;
      w += t.c * t.l;
    }
    CHECK(nll(b) == doctest::Approx(s).epsilon(1e-12));
    CHECK(perplexity(b) == doctest::Approx(std::exp(s / n)).epsilon(1e-12));
    CHECK(cw_nll(b) == doctest::Approx(w).epsilon(1e-12));
    CHECK(cw_nll(b) <= nll(b));
  }
}

TEST_CASE("confidence decreases as entropy rises") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    Tensor64 a = testing::randn(1, 7, rng, 2.0), b = testing::randn(1, 7, rng, 2.0);
    for (auto* x : {&a, &b}) (*x)[kSot] = (*x)[kPad] = -std::numeric_limits<double>::infinity();
    auto sa = token_score_logits(a.values(), 3, 5), sb = token_score_logits(b.values(), 3, 5);
    if (sa.H < sb.H) CHECK(sa.c > sb.c);
    if (sb.H < sa.H) CHECK(sb.c > sa.c);
  }
}

TEST_CASE("scoring a trajectory: CW-NLL never exceeds NLL") {
  auto f = fixture();
  Scorer sc(f.ckpt);
  CHECK(sc.v_eff() == f.ckpt.data.vocab.size() - 2);
  for (std::size_t i = 0; i < 30; ++i) {
    auto b = sc.score(f.trajs[i]);
    CHECK(b.n() == f.trajs[i].segments.size() + 1);
    CHECK(cw_nll(b) <= nll(b));
    CHECK(b.h_max == doctest::Approx(std::log(static_cast<double>(sc.v_eff()))));
    for (const auto& t : b.tokens) {
      CHECK(t.l >= 0.0);
      CHECK(t.c >= 0.0);
      CHECK(t.c <= 1.0);
    }
  }
  Trajectory bad{"x", std::nullopt, {f.trajs[0].segments[0], 999999}};
  CHECK_THROWS_AS(sc.score(bad), OovError);
}

TEST_CASE("streaming equals batch scoring exactly") {
  auto f = fixture();
  Scorer sc(f.ckpt);
  StreamScorer st(sc);
  for (std::size_t i = 0; i < 20; ++i) {
    const TokenSeq seq = encode_or_throw(f.trajs[i], sc.vocab());
    const auto batch = sc.score(seq);
    st.reset();
    StreamStep last;
    for (std::size_t k = 1; k < seq.true_length; ++k) {
      last = st.push(seq.tokens[k]);
      const auto& bt = batch.tokens[k - 1];
      CHECK(last.score.l == bt.l);
      CHECK(last.score.c == bt.c);
      if (k == 1) {
        CHECK(last.n == 1);
        CHECK(last.cw_nll == bt.c * bt.l);
      }
    }
    CHECK(last.cw_nll == cw_nll(batch));
    CHECK(last.nll == nll(batch));
    CHECK(last.perplexity == perplexity(batch));
    CHECK_THROWS(st.push(seq.tokens[1]));  // past EOT

    const std::span<const Token> prefix(seq.tokens.data(), seq.true_length - 1);
    auto one = score_stream(sc, prefix, kEot);
    CHECK(one.cw_nll == cw_nll(batch));
  }
  st.reset();
  CHECK_THROWS(st.push(kPad));
  CHECK_THROWS(score_stream(sc, std::span<const Token>{}, kEot));
}

TEST_CASE("streaming needs the causal positional signal") {
  auto f = fixture(false);
  Scorer sc(f.ckpt);
  CHECK_THROWS(StreamScorer(sc));
}

TEST_CASE("score file round-trip") {
  std::vector<ScoredItem> items{{"a", "normal", breakdown({{1.0, 0.5, 0.5}, {2.0, 0.1, 0.9}})},
                                {"b", std::nullopt, breakdown({{0.25, 0.2, 0.75}})}};
  std::stringstream buf;
  write_scores(buf, items, true);
  auto recs = read_scores(buf);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].id == "a");
  CHECK(recs[0].label == std::optional<std::string>("normal"));
  CHECK(recs[0].nll == nll(items[0].breakdown));
  CHECK(recs[0].cw_nll == cw_nll(items[0].breakdown));
  CHECK(recs[0].perplexity == perplexity(items[0].breakdown));
  CHECK(recs[1].n == 1);
  CHECK(!recs[1].label);
  CHECK(parse_scoring("cw_nll") == Scoring::cw_nll);
  CHECK_THROWS(parse_scoring("bogus"));
}
