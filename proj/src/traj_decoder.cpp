#include "getad/traj_decoder.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

namespace getad {

void DecoderConfig::validate() const {
  if (layers < 1) throw std::invalid_argument("decoder: layers must be >= 1");
  if (heads < 1 || d_model % heads != 0)
    throw std::invalid_argument("decoder: d_model must be divisible by heads");
  if (d_ff < 1) throw std::invalid_argument("decoder: d_ff must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("decoder: dropout in [0,1)");
}

namespace {

std::string key(std::size_t layer, const char* name) {
  return "dec." + std::to_string(layer) + "." + name;
}

}  // namespace

void init_decoder_params(ParamSet& params, const DecoderConfig& cfg, std::size_t vocab_size,
                         std::mt19937_64& rng) {
  cfg.validate();
  const std::size_t d = cfg.d_model;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    params.add(key(l, "wq"), glorot(d, d, rng));
    params.add(key(l, "wk"), glorot(d, d, rng));
    params.add(key(l, "wv"), glorot(d, d, rng));
    params.add(key(l, "wo"), glorot(d, d, rng));
    params.add(key(l, "ff1.w"), glorot(d, cfg.d_ff, rng));
    params.add(key(l, "ff1.b"), Tensor(1, cfg.d_ff));
    params.add(key(l, "ff2.w"), glorot(cfg.d_ff, d, rng));
    params.add(key(l, "ff2.b"), Tensor(1, d));
    params.add(key(l, "ln1.g"), Tensor(1, d, 1.0f));
    params.add(key(l, "ln1.b"), Tensor(1, d));
    params.add(key(l, "ln2.g"), Tensor(1, d, 1.0f));
    params.add(key(l, "ln2.b"), Tensor(1, d));
  }
  params.add("head.w", glorot(d, vocab_size, rng));
  params.add("head.b", Tensor(1, vocab_size));
}

ad::Var embed_inputs(ad::Var token_embeddings, ad::Var positional) {
  if (token_embeddings.rows() != positional.rows())
    throw ShapeError("embed_inputs: " + std::to_string(token_embeddings.rows()) +
                     " token rows vs " + std::to_string(positional.rows()) + " positional rows");
  return ad::add(token_embeddings, positional);
}

ad::Var decode(Binder& bind, ad::Var z, const DecoderConfig& cfg, std::optional<ad::Var> attn_bias,
               AttentionTrace* trace) {
  const std::size_t offsets[2] = {0, z.rows()};
  BiasFn fn;
  if (attn_bias) fn = [b = *attn_bias](std::size_t) { return b; };
  return decode_packed(bind, z, cfg, offsets, fn, trace);
}

ad::Var decode_packed(Binder& bind, ad::Var z, const DecoderConfig& cfg,
                      std::span<const std::size_t> offsets, const BiasFn& bias,
                      AttentionTrace* trace) {
  cfg.validate();
  if (z.cols() != cfg.d_model)
    throw ShapeError("decode: input width " + std::to_string(z.cols()) + " != d_model " +
                     std::to_string(cfg.d_model));
  if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != z.rows())
    throw ShapeError("decode: offsets do not cover the " + std::to_string(z.rows()) + " input rows");
  const std::size_t dh = cfg.head_width();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  std::map<std::size_t, std::vector<std::uint8_t>> future;
  std::map<std::size_t, ad::Var> biases;
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    const std::size_t n = offsets[s + 1] - offsets[s];
    if (n == 0) throw ShapeError("decode: empty sequence in batch");
    if (future.count(n)) continue;
    auto& m = future[n];
    m.assign(n * n, 0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) m[i * n + j] = 1;
    if (bias) biases.emplace(n, bias(n));
  }

  ad::Var x = z;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const ad::Var q = ad::matmul(x, bind(key(l, "wq")));
    const ad::Var k = ad::matmul(x, bind(key(l, "wk")));
    const ad::Var v = ad::matmul(x, bind(key(l, "wv")));
    std::vector<ad::Var> per_seq;
    for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
      const std::size_t begin = offsets[s], n = offsets[s + 1] - offsets[s];
      const bool whole = n == z.rows();
      const ad::Var qs = whole ? q : ad::slice_rows(q, begin, n);
      const ad::Var ks = whole ? k : ad::slice_rows(k, begin, n);
      const ad::Var vs = whole ? v : ad::slice_rows(v, begin, n);
      std::vector<ad::Var> heads;
      for (std::size_t h = 0; h < cfg.heads; ++h) {
        const ad::Var qh = ad::slice_cols(qs, h * dh, dh);
        const ad::Var kh = ad::slice_cols(ks, h * dh, dh);
        const ad::Var vh = ad::slice_cols(vs, h * dh, dh);
        ad::Var logits = ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt);
        if (bias) logits = ad::add(logits, biases.at(n));
        const ad::Var weights = ad::softmax_rows(ad::masked_fill(logits, future.at(n), kNegInf));
        if (trace) trace->weights.push_back(weights.value());
        heads.push_back(ad::matmul(weights, vh));
      }
      per_seq.push_back(ad::concat_cols(heads));
    }
    const ad::Var mixed = per_seq.size() == 1 ? per_seq.front() : ad::concat_rows(per_seq);
    const ad::Var attended = ad::matmul(mixed, bind(key(l, "wo")));
    x = ad::layer_norm(ad::add(x, ad::dropout(attended, cfg.dropout)), bind(key(l, "ln1.g")),
                       bind(key(l, "ln1.b")));
    const ad::Var hidden = ad::relu(ad::add_row(ad::matmul(x, bind(key(l, "ff1.w"))),
                                                bind(key(l, "ff1.b"))));
    const ad::Var ff = ad::add_row(ad::matmul(hidden, bind(key(l, "ff2.w"))), bind(key(l, "ff2.b")));
    x = ad::layer_norm(ad::add(x, ad::dropout(ff, cfg.dropout)), bind(key(l, "ln2.g")),
                       bind(key(l, "ln2.b")));
  }
  return ad::add_row(ad::matmul(x, bind("head.w")), bind("head.b"));
}

std::vector<std::uint8_t> prediction_mask(std::size_t rows, std::size_t vocab_size) {
  std::vector<std::uint8_t> mask(rows * vocab_size, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    mask[r * vocab_size + static_cast<std::size_t>(kSot)] = 1;
    mask[r * vocab_size + static_cast<std::size_t>(kPad)] = 1;
  }
  return mask;
}

std::vector<double> next_token_dist(const Tensor64& logits, std::size_t position) {
  if (position >= logits.rows())
    throw std::out_of_range("next_token_dist: position " + std::to_string(position) +
                            " beyond " + std::to_string(logits.rows()) + " rows");
  const auto row = logits.row(position);
  std::vector<double> p(row.size(), 0.0);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < row.size(); ++j)
    if (j != static_cast<std::size_t>(kSot) && j != static_cast<std::size_t>(kPad))
      mx = std::max(mx, row[j]);
  double z = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (j == static_cast<std::size_t>(kSot) || j == static_cast<std::size_t>(kPad)) continue;
    p[j] = std::exp(row[j] - mx);
    z += p[j];
  }
  for (double& v : p) v /= z;
  return p;
}

}  // namespace getad
