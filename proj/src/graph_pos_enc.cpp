#include "getad/graph_pos_enc.hpp"

#include <algorithm>
#include <stdexcept>

namespace getad {

GpeAggregation parse_aggregation(const std::string& s) {
  if (s == "sum") return GpeAggregation::sum;
  if (s == "mean") return GpeAggregation::mean;
  throw std::invalid_argument("unknown GPE aggregation '" + s + "'");
}

GpeHorizon parse_horizon(const std::string& s) {
  if (s == "causal") return GpeHorizon::causal;
  if (s == "full") return GpeHorizon::full;
  throw std::invalid_argument("unknown GPE horizon '" + s + "'");
}

std::string to_string(GpeAggregation a) { return a == GpeAggregation::sum ? "sum" : "mean"; }
std::string to_string(GpeHorizon h) { return h == GpeHorizon::causal ? "causal" : "full"; }

void init_gpe_params(ParamSet& params, std::size_t d_model, const GpeConfig& cfg,
                     std::mt19937_64& rng) {
  if (cfg.d_max < 1) throw std::invalid_argument("gpe: d_max must be >= 1");
  params.add("gpe.dist", normal_init(cfg.d_max + 1, d_model, 0.02, rng));
  params.add("gpe.special", normal_init(3, d_model, 0.02, rng));
}

void init_rpe_params(ParamSet& params, const RpeConfig& cfg) {
  params.add("rpe.table", Tensor(2 * cfg.clip + 1, 1));
}

HopMatrix pairwise_hops(std::span<const std::optional<SegIndex>> positions, const HopCache& hops) {
  HopMatrix m;
  m.n = positions.size();
  m.d.assign(m.n * m.n, HopMatrix::kSpecial);
  for (std::size_t i = 0; i < m.n; ++i) {
    if (!positions[i]) continue;
    for (std::size_t j = 0; j < m.n; ++j) {
      if (!positions[j]) continue;
      m.d[i * m.n + j] =
          i == j ? 0 : static_cast<int>(hops.distance(*positions[i], *positions[j]));
    }
  }
  return m;
}

ad::Var gpe(Binder& bind, std::span<const Token> tokens, const HopMatrix& hops,
            const GpeConfig& cfg) {
  const std::size_t n = tokens.size();
  if (hops.n != n)
    throw ShapeError("gpe: hop matrix of size " + std::to_string(hops.n) + " for " +
                     std::to_string(n) + " tokens");
  const std::size_t rows = cfg.d_max + 1;
  Tensor64 counts(n, rows);
  Tensor64 special(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    if (tokens[i] < kFirstSegmentToken) {
      special(i, static_cast<std::size_t>(tokens[i])) = 1.0;
      continue;
    }
    const std::size_t end = cfg.horizon == GpeHorizon::causal ? i + 1 : n;
    double used = 0.0;
    for (std::size_t j = 0; j < end; ++j) {
      const int d = hops(i, j);
      if (d == HopMatrix::kSpecial) continue;
      counts(i, std::min<std::size_t>(static_cast<std::size_t>(d), cfg.d_max)) += 1.0;
      used += 1.0;
    }
    if (cfg.aggregation == GpeAggregation::mean && used > 0.0)
      for (std::size_t d = 0; d < rows; ++d) counts(i, d) /= used;
  }
  ad::Graph& g = bind.graph();
  return ad::add(ad::matmul(g.constant(std::move(counts)), bind("gpe.dist")),
                 ad::matmul(g.constant(std::move(special)), bind("gpe.special")));
}

ad::Var rpe_bias(Binder& bind, std::size_t seq_len, const RpeConfig& cfg) {
  if (seq_len == 0) throw std::invalid_argument("rpe_bias: seq_len must be >= 1");
  const long k = static_cast<long>(cfg.clip);
  std::vector<std::uint32_t> idx(seq_len * seq_len);
  for (std::size_t i = 0; i < seq_len; ++i)
    for (std::size_t j = 0; j < seq_len; ++j) {
      const long off = std::clamp(static_cast<long>(j) - static_cast<long>(i), -k, k);
      idx[i * seq_len + j] = static_cast<std::uint32_t>(off + k);
    }
  return ad::reshape(ad::gather_rows(bind("rpe.table"), idx), seq_len, seq_len);
}

}  // namespace getad
