#include "getad/anomaly_scores.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

namespace getad {

using nlohmann::json;

namespace {

TokenScore finish(double l, double H, std::size_t v_eff) {
  TokenScore s;
  s.l = l;
  const double h_max = std::log(static_cast<double>(v_eff));
  s.H = std::clamp(H, 0.0, h_max);
  s.c = h_max > 0.0 ? std::clamp(1.0 - s.H / h_max, 0.0, 1.0) : 1.0;
  return s;
}

void require_nonempty(const ScoreBreakdown& b, const char* what) {
  if (b.tokens.empty()) throw std::invalid_argument(std::string(what) + ": empty breakdown");
}

}  // namespace

TokenScore token_score(std::span<const double> p, std::size_t target, std::size_t v_eff) {
  if (target >= p.size()) throw std::out_of_range("token_score: target outside distribution");
  if (v_eff < 1) throw std::invalid_argument("token_score: v_eff must be >= 1");
  double H = 0.0;
  for (double x : p)
    if (x > 0.0) H -= x * std::log(x);
  return finish(-std::log(p[target]), H, v_eff);
}

TokenScore token_score_logits(std::span<const double> logits, std::size_t target,
                              std::size_t v_eff) {
  if (target >= logits.size()) throw std::out_of_range("token_score: target outside logits");
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  double mx = kNegInf;
  for (double v : logits) mx = std::max(mx, v);
  if (mx == kNegInf) throw std::domain_error("token_score: every logit is masked");
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  const double lz = std::log(z);
  double H = 0.0;
  for (double v : logits) {
    if (v == kNegInf) continue;
    const double lp = (v - mx) - lz;
    H -= std::exp(lp) * lp;
  }
  // (mx - x) >= 0 and log z >= 0, so l stays non-negative under rounding.
  return finish((mx - logits[target]) + lz, H, v_eff);
}

double nll(const ScoreBreakdown& b) {
  require_nonempty(b, "nll");
  double s = 0.0;
  for (const auto& t : b.tokens) s += t.l;
  return s;
}

double perplexity(const ScoreBreakdown& b) {
  require_nonempty(b, "perplexity");
  return std::exp(nll(b) / static_cast<double>(b.n()));
}

double cw_nll(const ScoreBreakdown& b) {
  require_nonempty(b, "cw_nll");
  double s = 0.0;
  for (const auto& t : b.tokens) s += t.c * t.l;
  return s;
}

Scoring parse_scoring(const std::string& s) {
  if (s == "cw_nll") return Scoring::cw_nll;
  if (s == "nll") return Scoring::nll;
  if (s == "perplexity") return Scoring::perplexity;
  throw std::invalid_argument("unknown scoring '" + s + "' (cw_nll|nll|perplexity)");
}

std::string to_string(Scoring s) {
  switch (s) {
    case Scoring::cw_nll: return "cw_nll";
    case Scoring::nll: return "nll";
    case Scoring::perplexity: return "perplexity";
  }
  return "?";
}

double score_value(const ScoreBreakdown& b, Scoring s) {
  switch (s) {
    case Scoring::cw_nll: return cw_nll(b);
    case Scoring::nll: return nll(b);
    case Scoring::perplexity: return perplexity(b);
  }
  return 0.0;
}

// ---- scorer -------------------------------------------------------------------

Scorer::Scorer(const Checkpoint& ckpt) : ckpt_(ckpt), model_(ckpt.config.model, ckpt.data) {
  if (model_.vocab_size() < 3 + 1) throw std::invalid_argument("scorer: empty vocabulary");
  ad::Graph g;
  Binder bind(g, ckpt_.params, false);
  table_ = model_.token_table(bind, model_.segment_embeddings(bind)).value();
}

Tensor64 Scorer::logits(std::span<const Token> tokens) const {
  ad::Graph g;
  Binder bind(g, ckpt_.params, false);
  const std::span<const Token> seqs[1] = {tokens};
  return model_.forward(bind, g.constant(table_), seqs).value();
}

ScoreBreakdown Scorer::score(const TokenSeq& seq) const {
  if (seq.true_length < 2) throw std::invalid_argument("score: sequence too short");
  const std::span<const Token> all(seq.tokens.data(), seq.true_length);
  const Tensor64 lg = logits(all.first(seq.true_length - 1));
  ScoreBreakdown b;
  b.h_max = std::log(static_cast<double>(v_eff()));
  for (std::size_t i = 0; i + 1 < seq.true_length; ++i)
    b.tokens.push_back(token_score_logits(lg.row(i), static_cast<std::size_t>(all[i + 1]), v_eff()));
  return b;
}

ScoreBreakdown Scorer::score(const Trajectory& traj) const {
  return score(encode_or_throw(traj, vocab()));
}

namespace {

void require_streamable(const Scorer& s) {
  const auto& m = s.checkpoint().config.model;
  if (m.use_gpe && m.gpe.horizon == GpeHorizon::full)
    throw std::invalid_argument("stream scoring needs causal GPE; checkpoint uses the full horizon");
}

void check_token(const Scorer& s, Token t) {
  if (t == kSot || t == kPad || t < 0 || static_cast<std::size_t>(t) >= s.vocab().size())
    throw std::invalid_argument("stream: token " + std::to_string(t) + " cannot be scored");
}

}  // namespace

StreamScorer::StreamScorer(const Scorer& scorer) : scorer_(scorer) {
  require_streamable(scorer_);
  reset();
}

void StreamScorer::reset() {
  prefix_.assign(1, kSot);
  nll_ = cw_ = 0.0;
  n_ = 0;
}

StreamStep StreamScorer::push(Token next) {
  check_token(scorer_, next);
  if (!prefix_.empty() && prefix_.back() == kEot)
    throw std::logic_error("stream: trajectory already ended");
  const Tensor64 lg = scorer_.logits(prefix_);
  StreamStep st;
  st.score = token_score_logits(lg.row(lg.rows() - 1), static_cast<std::size_t>(next), scorer_.v_eff());
  nll_ += st.score.l;
  cw_ += st.score.c * st.score.l;
  ++n_;
  prefix_.push_back(next);
  st.n = n_;
  st.nll = nll_;
  st.cw_nll = cw_;
  st.perplexity = std::exp(nll_ / static_cast<double>(n_));
  return st;
}

StreamStep score_stream(const Scorer& scorer, std::span<const Token> prefix, Token next) {
  require_streamable(scorer);
  if (prefix.empty()) throw std::invalid_argument("stream: empty prefix");
  if (prefix.front() != kSot) throw std::invalid_argument("stream: prefix must start with SOT");
  check_token(scorer, next);
  const Tensor64 lg = scorer.logits(prefix);
  StreamStep st;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    const Token t = i + 1 < prefix.size() ? prefix[i + 1] : next;
    check_token(scorer, t);
    st.score = token_score_logits(lg.row(i), static_cast<std::size_t>(t), scorer.v_eff());
    st.nll += st.score.l;
    st.cw_nll += st.score.c * st.score.l;
  }
  st.n = prefix.size();
  st.perplexity = std::exp(st.nll / static_cast<double>(st.n));
  return st;
}

// ---- output -------------------------------------------------------------------

void write_scores(std::ostream& out, std::span<const ScoredItem> items, bool per_token) {
  for (const auto& it : items) {
    json j;
    j["id"] = it.id;
    if (it.label) j["label"] = *it.label;
    j["nll"] = nll(it.breakdown);
    j["perplexity"] = perplexity(it.breakdown);
    j["cw_nll"] = cw_nll(it.breakdown);
    j["n"] = it.breakdown.n();
    if (per_token) {
      json arr = json::array();
      for (const auto& t : it.breakdown.tokens) arr.push_back({{"l", t.l}, {"H", t.H}, {"c", t.c}});
      j["per_token"] = arr;
    }
    out << j.dump() << '\n';
  }
}

double ScoreRecord::value(Scoring s) const {
  switch (s) {
    case Scoring::cw_nll: return cw_nll;
    case Scoring::nll: return nll;
    case Scoring::perplexity: return perplexity;
  }
  return 0.0;
}

std::vector<ScoreRecord> read_scores(std::istream& in) {
  std::vector<ScoreRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      ScoreRecord r;
      r.id = j.at("id").get<std::string>();
      if (j.contains("label")) r.label = j["label"].get<std::string>();
      r.nll = j.at("nll").get<double>();
      r.perplexity = j.at("perplexity").get<double>();
      r.cw_nll = j.at("cw_nll").get<double>();
      r.n = j.at("n").get<std::size_t>();
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(lineno, e.what());
    }
  }
  return out;
}

}  // namespace getad
