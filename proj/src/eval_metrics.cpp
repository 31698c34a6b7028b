#include "getad/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace getad {

using nlohmann::json;

namespace {

struct Counts {
  std::size_t pos = 0, neg = 0;
};

Counts check_inputs(std::span<const double> scores, Labels labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("metrics: " + std::to_string(scores.size()) + " scores vs " +
                                std::to_string(labels.size()) + " labels");
  Counts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) throw std::invalid_argument("metrics: NaN score");
    if (labels[i] > 1) throw std::invalid_argument("metrics: labels must be 0 or 1");
    (labels[i] ? c.pos : c.neg)++;
  }
  if (c.pos == 0 || c.neg == 0)
    throw std::invalid_argument("metrics: need both positive and negative labels");
  return c;
}

std::vector<std::size_t> order_desc(std::span<const double> scores) {
  std::vector<std::size_t> o(scores.size());
  std::iota(o.begin(), o.end(), std::size_t{0});
  std::sort(o.begin(), o.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return o;
}

double f1_value(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::size_t den = 2 * tp + fp + fn;
  return den == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(den);
}

// tp_a / den_a > tp_b / den_b, exactly.
bool f1_greater(const F1Result& a, const F1Result& b) {
  using u128 = unsigned __int128;
  const u128 da = 2 * a.tp + a.fp + a.fn, db = 2 * b.tp + b.fp + b.fn;
  return static_cast<u128>(a.tp) * db > static_cast<u128>(b.tp) * da;
}

}  // namespace

std::vector<PrPoint> pr_curve(std::span<const double> scores, Labels labels) {
  const Counts c = check_inputs(scores, labels);
  const auto o = order_desc(scores);
  std::vector<PrPoint> curve{{std::numeric_limits<double>::infinity(), 1.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < o.size();) {
    const double t = scores[o[k]];
    while (k < o.size() && scores[o[k]] == t) (labels[o[k++]] ? tp : fp)++;
    curve.push_back({t, static_cast<double>(tp) / static_cast<double>(tp + fp),
                     static_cast<double>(tp) / static_cast<double>(c.pos)});
  }
  return curve;
}

double pr_auc(std::span<const double> scores, Labels labels) {
  const auto curve = pr_curve(scores, labels);
  double ap = 0.0;
  for (std::size_t k = 1; k < curve.size(); ++k)
    ap += (curve[k].recall - curve[k - 1].recall) * curve[k].precision;
  return ap;
}

F1Result f1_at(std::span<const double> scores, Labels labels, double threshold) {
  check_inputs(scores, labels);
  F1Result r;
  r.threshold = threshold;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] > threshold;
    if (pred && labels[i]) ++r.tp;
    else if (pred) ++r.fp;
    else if (labels[i]) ++r.fn;
  }
  r.f1 = f1_value(r.tp, r.fp, r.fn);
  return r;
}

F1Result best_f1(std::span<const double> scores, Labels labels) {
  const Counts c = check_inputs(scores, labels);
  auto o = order_desc(scores);
  std::reverse(o.begin(), o.end());  // ascending
  // Start with everything predicted positive, then raise the threshold past
  // each distinct score in turn.
  F1Result cur;
  cur.tp = c.pos;
  cur.fp = c.neg;
  cur.fn = 0;
  cur.threshold = std::nextafter(scores[o.front()], -std::numeric_limits<double>::infinity());
  F1Result best = cur;
  for (std::size_t k = 0; k < o.size();) {
    const double lo = scores[o[k]];
    while (k < o.size() && scores[o[k]] == lo) {
      if (labels[o[k]]) {
        --cur.tp;
        ++cur.fn;
      } else {
        --cur.fp;
      }
      ++k;
    }
    if (k == o.size()) break;  // nothing above: no candidate beyond the maximum
    const double hi = scores[o[k]];
    double mid = lo + (hi - lo) / 2.0;
    if (!(mid < hi)) mid = lo;
    cur.threshold = mid;
    if (f1_greater(cur, best)) best = cur;
  }
  best.f1 = f1_value(best.tp, best.fp, best.fn);
  return best;
}

EvalResult evaluate(std::span<const double> scores, Labels labels, const std::string& scoring,
                    const double* fixed_threshold) {
  const Counts c = check_inputs(scores, labels);
  EvalResult r;
  r.scoring = scoring;
  r.n_pos = c.pos;
  r.n_neg = c.neg;
  r.curve = pr_curve(scores, labels);
  for (std::size_t k = 1; k < r.curve.size(); ++k)
    r.pr_auc += (r.curve[k].recall - r.curve[k - 1].recall) * r.curve[k].precision;
  const F1Result f = fixed_threshold ? f1_at(scores, labels, *fixed_threshold) : best_f1(scores, labels);
  r.f1 = f.f1;
  r.threshold = f.threshold;
  r.f1_mode = fixed_threshold ? "fixed" : "best";
  return r;
}

std::string metrics_json(const EvalResult& r) {
  json j;
  j["pr_auc"] = r.pr_auc;
  j["f1"] = r.f1;
  j["threshold"] = r.threshold;
  j["n_pos"] = r.n_pos;
  j["n_neg"] = r.n_neg;
  j["scoring"] = r.scoring;
  j["f1_mode"] = r.f1_mode;
  return j.dump(2);
}

void report(const EvalResult& r, const std::filesystem::path& metrics_path,
            const std::filesystem::path& csv_path) {
  if (r.curve.empty()) throw std::invalid_argument("report: empty precision-recall curve");
  {
    std::ofstream out(metrics_path);
    if (!out) throw std::runtime_error("cannot write " + metrics_path.string());
    out << metrics_json(r) << '\n';
  }
  if (csv_path.empty()) return;
  std::ofstream out(csv_path);
  if (!out) throw std::runtime_error("cannot write " + csv_path.string());
  out << "threshold,precision,recall\n";
  char buf[128];
  for (const auto& p : r.curve) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.threshold, p.precision, p.recall);
    out << buf;
  }
}

EvalResult read_metrics(const std::filesystem::path& metrics_path) {
  std::ifstream in(metrics_path);
  if (!in) throw std::runtime_error("cannot open " + metrics_path.string());
  const json j = json::parse(in);
  EvalResult r;
  r.pr_auc = j.at("pr_auc").get<double>();
  r.f1 = j.at("f1").get<double>();
  r.threshold = j.at("threshold").get<double>();
  r.n_pos = j.at("n_pos").get<std::size_t>();
  r.n_neg = j.at("n_neg").get<std::size_t>();
  r.scoring = j.at("scoring").get<std::string>();
  r.f1_mode = j.value("f1_mode", "best");
  return r;
}

}  // namespace getad
