#include "getad/train_engine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "getad/seed.hpp"

namespace getad {

using nlohmann::json;

// ---- config -------------------------------------------------------------------

namespace {

// Shortest of %.15g / %.16g / %.17g that reads back exactly.
std::string fmt_double(double v) {
  char buf[40];
  for (int prec : {15, 16, 17}) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size())
    throw std::invalid_argument("config: '" + key + "' expects a number, got '" + v + "'");
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  unsigned long long out = 0;
  try {
    if (!v.empty() && v[0] != '-') out = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size())
    throw std::invalid_argument("config: '" + key + "' expects a non-negative integer, got '" + v +
                                "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: '" + key + "' expects true or false, got '" + v + "'");
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void TrainConfig::validate() const {
  model.validate();
  if (!(lambda_ce >= 0.0) || !(lambda_link >= 0.0))
    throw std::invalid_argument("config: loss weights must be >= 0");
  if (neg_ratio < 1) throw std::invalid_argument("config: neg_ratio must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("config: lr must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw std::invalid_argument("config: Adam betas must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw std::invalid_argument("config: adam_eps must be > 0");
  if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (max_len < 3) throw std::invalid_argument("config: max_len must be >= 3");
  if (max_positive_pairs < 1) throw std::invalid_argument("config: max_positive_pairs must be >= 1");
}

std::vector<std::string> TrainConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [k, v] : TrainConfig{}.to_kv()) out.push_back(k);
  return out;
}

void TrainConfig::apply(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  auto& m = model;
  if (key == "d_model") {
    m.d_model = parse_uint(key, v);
    m.sync();
  } else if (key == "gat.layers") {
    m.gat.layers = parse_uint(key, v);
  } else if (key == "gat.heads") {
    m.gat.heads = parse_uint(key, v);
  } else if (key == "gat.activation") {
    m.gat.activation = parse_activation(v);
  } else if (key == "gat.self_loops") {
    m.gat.self_loops = parse_bool(key, v);
  } else if (key == "dec.layers") {
    m.dec.layers = parse_uint(key, v);
  } else if (key == "dec.heads") {
    m.dec.heads = parse_uint(key, v);
  } else if (key == "dec.d_ff") {
    m.dec.d_ff = parse_uint(key, v);
  } else if (key == "dec.dropout") {
    m.dec.dropout = parse_double(key, v);
  } else if (key == "gpe.d_max") {
    m.gpe.d_max = static_cast<std::uint32_t>(parse_uint(key, v));
  } else if (key == "gpe.aggregation") {
    m.gpe.aggregation = parse_aggregation(v);
  } else if (key == "gpe.horizon") {
    m.gpe.horizon = parse_horizon(v);
  } else if (key == "rpe.clip") {
    m.rpe.clip = parse_uint(key, v);
  } else if (key == "use_gat") {
    m.use_gat = parse_bool(key, v);
  } else if (key == "use_gpe") {
    m.use_gpe = parse_bool(key, v);
  } else if (key == "use_rpe") {
    m.use_rpe = parse_bool(key, v);
  } else if (key == "use_link_loss") {
    use_link_loss = parse_bool(key, v);
  } else if (key == "lambda_ce") {
    lambda_ce = parse_double(key, v);
  } else if (key == "lambda_link") {
    lambda_link = parse_double(key, v);
  } else if (key == "lr") {
    lr = parse_double(key, v);
  } else if (key == "beta1") {
    beta1 = parse_double(key, v);
  } else if (key == "beta2") {
    beta2 = parse_double(key, v);
  } else if (key == "adam_eps") {
    adam_eps = parse_double(key, v);
  } else if (key == "clip_norm") {
    clip_norm = parse_double(key, v);
  } else if (key == "epochs") {
    epochs = parse_uint(key, v);
  } else if (key == "batch_size") {
    batch_size = parse_uint(key, v);
  } else if (key == "max_len") {
    max_len = parse_uint(key, v);
  } else if (key == "seed") {
    seed = parse_uint(key, v);
  } else if (key == "neg_ratio") {
    neg_ratio = parse_uint(key, v);
  } else if (key == "max_positive_pairs") {
    max_positive_pairs = parse_uint(key, v);
  } else {
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

std::vector<std::pair<std::string, std::string>> TrainConfig::to_kv() const {
  const auto& m = model;
  return {
      {"d_model", std::to_string(m.d_model)},
      {"gat.layers", std::to_string(m.gat.layers)},
      {"gat.heads", std::to_string(m.gat.heads)},
      {"gat.activation", to_string(m.gat.activation)},
      {"gat.self_loops", fmt_bool(m.gat.self_loops)},
      {"dec.layers", std::to_string(m.dec.layers)},
      {"dec.heads", std::to_string(m.dec.heads)},
      {"dec.d_ff", std::to_string(m.dec.d_ff)},
      {"dec.dropout", fmt_double(m.dec.dropout)},
      {"gpe.d_max", std::to_string(m.gpe.d_max)},
      {"gpe.aggregation", to_string(m.gpe.aggregation)},
      {"gpe.horizon", to_string(m.gpe.horizon)},
      {"rpe.clip", std::to_string(m.rpe.clip)},
      {"use_gat", fmt_bool(m.use_gat)},
      {"use_gpe", fmt_bool(m.use_gpe)},
      {"use_rpe", fmt_bool(m.use_rpe)},
      {"use_link_loss", fmt_bool(use_link_loss)},
      {"lambda_ce", fmt_double(lambda_ce)},
      {"lambda_link", fmt_double(lambda_link)},
      {"lr", fmt_double(lr)},
      {"beta1", fmt_double(beta1)},
      {"beta2", fmt_double(beta2)},
      {"adam_eps", fmt_double(adam_eps)},
      {"clip_norm", fmt_double(clip_norm)},
      {"epochs", std::to_string(epochs)},
      {"batch_size", std::to_string(batch_size)},
      {"max_len", std::to_string(max_len)},
      {"seed", std::to_string(seed)},
      {"neg_ratio", std::to_string(neg_ratio)},
      {"max_positive_pairs", std::to_string(max_positive_pairs)},
  };
}

std::vector<std::pair<std::string, std::string>> parse_kv_lines(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(lineno, "expected 'key = value'");
    std::string k = trim(line.substr(0, eq));
    if (k.empty()) throw ParseError(lineno, "empty key");
    out.emplace_back(std::move(k), trim(line.substr(eq + 1)));
  }
  return out;
}

// ---- losses -------------------------------------------------------------------

std::vector<int> shift_targets(std::span<const Token> tokens) {
  std::vector<int> t(tokens.size(), -1);
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i)
    t[i] = tokens[i + 1] == kPad ? -1 : tokens[i + 1];
  return t;
}

ad::Var ce_loss(ad::Var logits, std::span<const int> targets, int pad_token) {
  if (targets.size() != logits.rows())
    throw ShapeError("ce_loss: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(logits.rows()) + " rows");
  std::vector<int> t(targets.begin(), targets.end());
  bool any = false;
  for (int& x : t) {
    if (x == pad_token) x = -1;
    any = any || x >= 0;
  }
  if (!any) throw std::invalid_argument("ce_loss: every position is masked");
  return ad::cross_entropy(logits, t);
}

LinkPairs sample_link_pairs(const RoadNetwork& net, std::mt19937_64& rng, std::size_t neg_ratio,
                            std::size_t max_positive) {
  if (neg_ratio < 1) throw std::invalid_argument("link pairs: neg_ratio must be >= 1");
  auto edges = net.edges();
  if (edges.empty()) throw std::invalid_argument("link pairs: network has no edges");
  if (edges.size() > max_positive) {
    std::vector<std::pair<SegIndex, SegIndex>> kept;
    std::sample(edges.begin(), edges.end(), std::back_inserter(kept), max_positive, rng);
    edges = std::move(kept);
  }
  const std::size_t n = net.size();
  const std::size_t possible = n * (n - 1);
  const std::size_t non_edges = possible - net.edge_count();
  if (non_edges == 0) throw std::invalid_argument("link pairs: graph is complete, no negatives");

  LinkPairs out;
  out.positives = edges.size();
  for (auto [u, v] : edges) {
    out.u.push_back(u);
    out.v.push_back(v);
    out.labels.push_back(1.0);
  }
  const std::size_t want = neg_ratio * edges.size();
  if (non_edges * 4 < possible) {
    // Dense graph: enumerate the complement and draw from it.
    std::vector<std::pair<SegIndex, SegIndex>> pool;
    for (SegIndex u = 0; u < n; ++u)
      for (SegIndex v = 0; v < n; ++v)
        if (u != v && !net.adjacent(u, v)) pool.emplace_back(u, v);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (std::size_t k = 0; k < want; ++k) {
      const auto [u, v] = pool[pick(rng)];
      out.u.push_back(u);
      out.v.push_back(v);
      out.labels.push_back(0.0);
    }
    return out;
  }
  std::uniform_int_distribution<SegIndex> node(0, static_cast<SegIndex>(n - 1));
  while (out.u.size() < edges.size() + want) {
    const SegIndex u = node(rng), v = node(rng);
    if (u == v || net.adjacent(u, v)) continue;
    out.u.push_back(u);
    out.v.push_back(v);
    out.labels.push_back(0.0);
  }
  return out;
}

ad::Var link_loss(ad::Var embeddings, const LinkPairs& pairs) {
  const ad::Var s = ad::rowwise_dot(ad::gather_rows(embeddings, pairs.u),
                                    ad::gather_rows(embeddings, pairs.v));
  return ad::bce_with_logits(s, pairs.labels);
}

ad::Var total_loss(ad::Var ce, std::optional<ad::Var> link, const TrainConfig& cfg) {
  ad::Var t = ad::scale(ce, cfg.lambda_ce);
  if (cfg.use_link_loss && link) t = ad::add(t, ad::scale(*link, cfg.lambda_link));
  return t;
}

// ---- optimizer ----------------------------------------------------------------

Adam::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(ParamSet& params, const std::vector<Tensor64>& grads) {
  auto& entries = params.entries();
  if (grads.size() != entries.size())
    throw std::invalid_argument("adam: gradient count does not match parameters");
  if (m_.empty()) {
    for (const auto& [name, t] : entries) {
      m_.emplace_back(t.size(), 0.0);
      v_.emplace_back(t.size(), 0.0);
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t p = 0; p < entries.size(); ++p) {
    Tensor& w = entries[p].second;
    const Tensor64& g = grads[p];
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g.empty() ? 0.0 : g[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
      const double update = lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
      w[i] = static_cast<float>(static_cast<double>(w[i]) - update);
    }
  }
}

double clip_global_norm(std::vector<Tensor64>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (double x : g.values()) sq += x * x;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double f = max_norm / norm;
    for (auto& g : grads)
      for (double& x : g.values()) x *= f;
  }
  return norm;
}

// ---- training -----------------------------------------------------------------

std::vector<EpochLog> train_epochs(Checkpoint& ckpt, std::span<const TokenSeq> seqs,
                                   std::size_t first_epoch, std::size_t epochs,
                                   const EpochCallback& on_epoch) {
  const TrainConfig& cfg = ckpt.config;
  cfg.validate();
  if (seqs.empty()) throw std::invalid_argument("train: empty dataset");
  const Model model(cfg.model, ckpt.data);
  Adam adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
  auto& entries = ckpt.params.entries();

  std::vector<EpochLog> log;
  std::size_t step = 0;
  for (std::size_t e = first_epoch; e < first_epoch + epochs; ++e) {
    const auto batches = make_batches(seqs, cfg.batch_size, cfg.max_len, mix_seed(cfg.seed, 2 * e + 1));
    std::mt19937_64 link_rng(mix_seed(cfg.seed, 2 * e + 2));
    std::optional<LinkPairs> pairs;
    if (cfg.use_link_loss)
      pairs = sample_link_pairs(ckpt.data.network, link_rng, cfg.neg_ratio, cfg.max_positive_pairs);

    EpochLog rec;
    rec.epoch = e;
    double ce_sum = 0.0, link_sum = 0.0, total_sum = 0.0;
    std::size_t rows = 0;
    for (std::size_t b = 0; b < batches.size(); ++b, ++step) {
      const Batch& batch = batches[b];
      ad::Graph g(true, mix_seed(cfg.seed ^ 0xd1ce, step));
      Binder bind(g, ckpt.params);
      const ad::Var seg = model.segment_embeddings(bind);
      const ad::Var table = model.token_table(bind, seg);

      std::vector<std::span<const Token>> inputs;
      std::vector<int> targets;
      for (std::size_t r = 0; r < batch.rows; ++r) {
        const auto row = batch.row(r);
        const std::size_t len = batch.true_length[r];
        inputs.push_back(row.first(len - 1));
        for (std::size_t i = 1; i < len; ++i) targets.push_back(row[i]);
      }
      const ad::Var logits = model.forward(bind, table, inputs);
      const ad::Var ce = ad::scale(ce_loss(logits, targets), 1.0 / static_cast<double>(batch.rows));
      std::optional<ad::Var> link;
      if (pairs) link = link_loss(seg, *pairs);
      const ad::Var total = total_loss(ce, link, cfg);

      const double ce_v = ce.value().item(), total_v = total.value().item();
      const double link_v = link ? link->value().item() : 0.0;
      if (!std::isfinite(total_v) || !std::isfinite(ce_v) || !std::isfinite(link_v)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << e << " step " << step << ": ce=" << ce_v
            << " link=" << link_v << " total=" << total_v;
        throw TrainError(msg.str());
      }
      g.backward(total);

      std::vector<Tensor64> grads(entries.size());
      for (std::size_t p = 0; p < entries.size(); ++p) {
        auto it = bind.bound().find(entries[p].first);
        if (it != bind.bound().end() && g.requires_grad(it->second)) grads[p] = g.grad(it->second);
      }
      clip_global_norm(grads, cfg.clip_norm);
      adam.step(ckpt.params, grads);

      ce_sum += ce_v * static_cast<double>(batch.rows);
      rows += batch.rows;
      link_sum += link_v;
      total_sum += total_v;
      if (b == 0) rec.first_ce = ce_v;
      rec.last_ce = ce_v;
    }
    rec.ce = ce_sum / static_cast<double>(rows);
    rec.link = link_sum / static_cast<double>(batches.size());
    rec.total = total_sum / static_cast<double>(batches.size());
    log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return log;
}

TrainResult train(ModelData data, std::span<const Trajectory> trajectories,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  TrainResult res;
  res.checkpoint.config = config;
  res.checkpoint.data = std::move(data);
  std::mt19937_64 rng(mix_seed(config.seed, 0));
  init_model_params(res.checkpoint.params, config.model, res.checkpoint.data, rng);
  std::vector<TokenSeq> seqs;
  seqs.reserve(trajectories.size());
  for (const auto& t : trajectories) seqs.push_back(encode_or_throw(t, res.checkpoint.data.vocab));
  res.log = train_epochs(res.checkpoint, seqs, 0, config.epochs, on_epoch);
  return res;
}

// ---- persistence --------------------------------------------------------------

namespace {

constexpr char kMagic[9] = {'G', 'E', 'T', 'A', 'D', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename U>
void put_le(std::ostream& out, U v) {
  std::array<char, sizeof(U)> b;
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b.data(), b.size());
}

template <typename U>
U get_le(std::istream& in, const char* what) {
  std::array<unsigned char, sizeof(U)> b;
  if (!in.read(reinterpret_cast<char*>(b.data()), b.size()))
    throw CheckpointError(std::string("checkpoint: truncated ") + what);
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
  return v;
}

struct Blob {
  std::string name;
  std::vector<std::size_t> shape;
  std::span<const float> values;
};

json network_json(const RoadNetwork& net) {
  json arr = json::array();
  for (const auto& s : net.segments())
    arr.push_back({{"id", s.id},
                   {"length_m", s.length_m},
                   {"road_class", s.road_class},
                   {"lanes", s.lanes},
                   {"maxspeed_kmh", s.maxspeed_kmh},
                   {"tail", s.tail_node},
                   {"head", s.head_node}});
  return arr;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  std::vector<Blob> blobs;
  // a default-constructed tensor has no shape at all; store it as 0 x 0
  const auto& fshape = ckpt.data.features.shape();
  blobs.push_back({"data.features", fshape.empty() ? std::vector<std::size_t>{0, 0} : fshape,
                   ckpt.data.features.values()});
  blobs.push_back({"data.edge_prob", {1, ckpt.data.edge_prob.size()}, ckpt.data.edge_prob});
  for (const auto& [name, t] : ckpt.params.entries()) blobs.push_back({name, t.shape(), t.values()});

  json header;
  json cfg = json::object();
  for (const auto& [k, v] : ckpt.config.to_kv()) cfg[k] = v;
  header["config"] = cfg;
  header["vocab"] = ckpt.data.vocab.segments();
  header["classes"] = ckpt.data.network.class_names();
  header["network"] = network_json(ckpt.data.network);
  json dir = json::array();
  std::uint64_t offset = 0;
  for (const auto& b : blobs) {
    dir.push_back({{"name", b.name}, {"shape", b.shape}, {"offset", offset}});
    offset += 4 * b.values.size();
  }
  header["tensors"] = dir;
  const std::string text = header.dump();

  out.write(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& b : blobs)
    for (float f : b.values) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_le<std::uint32_t>(out, bits);
    }
  if (!out) throw CheckpointError("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw CheckpointError("checkpoint: bad magic");
  const auto version = get_le<std::uint32_t>(in, "version");
  if (version != kVersion)
    throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
  const auto hlen = get_le<std::uint64_t>(in, "header length");
  if (hlen > (std::uint64_t{1} << 32)) throw CheckpointError("checkpoint: implausible header length");
  std::string text(hlen, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(hlen)))
    throw CheckpointError("checkpoint: truncated header");

  Checkpoint ck;
  try {
    const json h = json::parse(text);
    for (const auto& [k, v] : h.at("config").items()) ck.config.apply(k, v.get<std::string>());
    ck.config.validate();
    std::vector<SegmentRecord> segs;
    for (const auto& s : h.at("network")) {
      SegmentRecord r;
      r.id = s.at("id").get<SegmentId>();
      r.length_m = s.at("length_m").get<double>();
      r.road_class = s.at("road_class").get<int>();
      r.lanes = s.at("lanes").get<int>();
      r.maxspeed_kmh = s.at("maxspeed_kmh").get<double>();
      r.tail_node = s.at("tail").get<NodeId>();
      r.head_node = s.at("head").get<NodeId>();
      segs.push_back(r);
    }
    ck.data.network = RoadNetwork(std::move(segs), h.at("classes").get<std::vector<std::string>>());
    ck.data.vocab = Vocab(h.at("vocab").get<std::vector<SegmentId>>());

    std::uint64_t expect = 0;
    for (const auto& d : h.at("tensors")) {
      const auto name = d.at("name").get<std::string>();
      const auto shape = d.at("shape").get<std::vector<std::size_t>>();
      if (d.at("offset").get<std::uint64_t>() != expect)
        throw CheckpointError("checkpoint: tensor '" + name + "' is not contiguous");
      Tensor t(shape);
      for (float& f : t.values()) {
        const auto bits = get_le<std::uint32_t>(in, "tensor data");
        std::memcpy(&f, &bits, 4);
      }
      expect += 4 * t.size();
      if (name == "data.features")
        ck.data.features = std::move(t);
      else if (name == "data.edge_prob")
        ck.data.edge_prob.assign(t.values().begin(), t.values().end());
      else
        ck.params.add(name, std::move(t));
    }
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint: malformed header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
  if (ck.data.edge_prob.size() != ck.data.network.edge_count())
    throw CheckpointError("checkpoint: edge probabilities do not match the network");
  return ck;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace getad
