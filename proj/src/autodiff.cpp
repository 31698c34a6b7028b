#include "getad/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

namespace getad {

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

namespace ad {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

[[noreturn]] void shape_fail(const char* op, const Tensor64& a, const Tensor64& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) +
                   " and " + shape_string(b.shape()));
}

[[noreturn]] void shape_fail(const char* op, const Tensor64& a) {
  throw ShapeError(std::string(op) + ": unsupported shape " + shape_string(a.shape()));
}

void require_same_graph(Var a, Var b) {
  if (a.graph != b.graph) throw std::invalid_argument("operands recorded on different graphs");
}

// out (m x n) += a (m x k) * b (k x n)
void gemm_nn(const Tensor64& a, const Tensor64& b, Tensor64& out) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  for (std::size_t i = 0; i < m; ++i) {
    double* o = out.row(i).data();
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a(i, p);
      if (av == 0.0) continue;
      const double* br = b.row(p).data();
      for (std::size_t j = 0; j < n; ++j) o[j] += av * br[j];
    }
  }
}

// out (m x k) += g (m x n) * b^T  where b is (k x n)
void gemm_nt(const Tensor64& g, const Tensor64& b, Tensor64& out) {
  const std::size_t m = g.rows(), n = g.cols(), k = b.rows();
  for (std::size_t i = 0; i < m; ++i) {
    const double* gr = g.row(i).data();
    for (std::size_t p = 0; p < k; ++p) {
      const double* br = b.row(p).data();
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += gr[j] * br[j];
      out(i, p) += acc;
    }
  }
}

// out (k x n) += a^T * g  where a is (m x k), g is (m x n)
void gemm_tn(const Tensor64& a, const Tensor64& g, Tensor64& out) {
  const std::size_t m = a.rows(), k = a.cols(), n = g.cols();
  for (std::size_t i = 0; i < m; ++i) {
    const double* gr = g.row(i).data();
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a(i, p);
      if (av == 0.0) continue;
      double* o = out.row(p).data();
      for (std::size_t j = 0; j < n; ++j) o[j] += av * gr[j];
    }
  }
}

template <class F>
Var unary(Var a, F&& f, Graph::Backward bw) {
  const Tensor64& x = a.value();
  Tensor64 out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return a.graph->record(std::move(out), {a}, std::move(bw));
}

}  // namespace

// ---- Graph ----------------------------------------------------------------

Var Graph::variable(Tensor64 value) {
  nodes_.push_back(Node{std::move(value), {}, {}, true});
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::constant(Tensor64 value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false});
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::record(Tensor64 value, std::initializer_list<Var> inputs, Backward backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Graph::record(Tensor64 value, std::span<const Var> inputs, Backward backward) {
  bool needs = false;
  for (const Var& v : inputs) {
    if (v.graph != this) throw std::invalid_argument("operand recorded on a different graph");
    needs = needs || nodes_[v.id].requires_grad;
  }
  Node n{std::move(value), {}, {}, needs};
  if (needs) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tensor64& Graph::grad_ref(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad.empty()) n.grad = Tensor64(n.value.shape());
  return n.grad;
}

void Graph::mark_branches(const Tensor64& x) {
  std::uint64_t h = branch_sig_;
  for (double v : x.values()) h = (h ^ (v > 0.0 ? 0x9dU : 0x3bU)) * 0x100000001b3ULL;
  branch_sig_ = h;
}

Tensor64 Graph::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.empty()) return Tensor64(n.value.shape());
  return n.grad;
}

void Graph::backward(Var loss) {
  if (value(loss).size() != 1)
    throw ShapeError("backward: loss must be a scalar, got " + shape_string(value(loss).shape()));
  grad_ref(loss)[0] += 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, n.grad);
  }
}

// ---- linear algebra ---------------------------------------------------------

Var matmul(Var a, Var b) {
  require_same_graph(a, b);
  const Tensor64& x = a.value();
  const Tensor64& y = b.value();
  if (x.cols() != y.rows()) shape_fail("matmul", x, y);
  Tensor64 out(x.rows(), y.cols());
  gemm_nn(x, y, out);
  return a.graph->record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor64& go) {
    if (g.requires_grad(a)) gemm_nt(go, g.value(b), g.grad_ref(a));
    if (g.requires_grad(b)) gemm_tn(g.value(a), go, g.grad_ref(b));
  });
}

Var transpose(Var a) {
  const Tensor64& x = a.value();
  Tensor64 out(x.cols(), x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(j, i) = x(i, j);
  return a.graph->record(std::move(out), {a}, [a](Graph& g, const Tensor64& go) {
    Tensor64& ga = g.grad_ref(a);
    for (std::size_t i = 0; i < ga.rows(); ++i)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += go(j, i);
  });
}

Var add(Var a, Var b) {
  require_same_graph(a, b);
  const Tensor64& x = a.value();
  const Tensor64& y = b.value();
  if (!x.same_shape(y)) shape_fail("add", x, y);
  Tensor64 out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
  return a.graph->record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor64& go) {
    for (Var v : {a, b}) {
      if (!g.requires_grad(v)) continue;
      Tensor64& gv = g.grad_ref(v);
      for (std::size_t i = 0; i < go.size(); ++i) gv[i] += go[i];
    }
  });
}

Var sub(Var a, Var b) {
  require_same_graph(a, b);
  const Tensor64& x = a.value();
  const Tensor64& y = b.value();
  if (!x.same_shape(y)) shape_fail("sub", x, y);
  Tensor64 out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
  return a.graph->record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor64& go) {
    if (g.requires_grad(a)) {
      Tensor64& ga = g.grad_ref(a);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
    }
    if (g.requires_grad(b)) {
      Tensor64& gb = g.grad_ref(b);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
    }
  });
}

Var add_row(Var a, Var bias) {
  require_same_graph(a, bias);
  const Tensor64& x = a.value();
  const Tensor64& b = bias.value();
  if (b.rows() != 1 || b.cols() != x.cols()) shape_fail("add_row", x, b);
  Tensor64 out = x;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) += b[j];
  return a.graph->record(std::move(out), {a, bias}, [a, bias](Graph& g, const Tensor64& go) {
    if (g.requires_grad(a)) {
      Tensor64& ga = g.grad_ref(a);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
    }
    if (g.requires_grad(bias)) {
      Tensor64& gb = g.grad_ref(bias);
      for (std::size_t i = 0; i < go.rows(); ++i)
        for (std::size_t j = 0; j < go.cols(); ++j) gb[j] += go(i, j);
    }
  });
}

Var scale(Var a, double s) {
  return unary(a, [s](double v) { return v * s; }, [a, s](Graph& g, const Tensor64& go) {
    Tensor64& ga = g.grad_ref(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += s * go[i];
  });
}

Var mul(Var a, Var b) {
  require_same_graph(a, b);
  const Tensor64& x = a.value();
  const Tensor64& y = b.value();
  if (!x.same_shape(y)) shape_fail("mul", x, y);
  Tensor64 out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  return a.graph->record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor64& go) {
    const Tensor64& x = g.value(a);
    const Tensor64& y = g.value(b);
    if (g.requires_grad(a)) {
      Tensor64& ga = g.grad_ref(a);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * y[i];
    }
    if (g.requires_grad(b)) {
      Tensor64& gb = g.grad_ref(b);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * x[i];
    }
  });
}

Var mul_col(Var a, Var c) {
  require_same_graph(a, c);
  const Tensor64& x = a.value();
  const Tensor64& s = c.value();
  if (s.rows() != x.rows() || s.cols() != 1) shape_fail("mul_col", x, s);
  Tensor64 out = x;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) *= s[i];
  return a.graph->record(std::move(out), {a, c}, [a, c](Graph& g, const Tensor64& go) {
    const Tensor64& x = g.value(a);
    const Tensor64& s = g.value(c);
    if (g.requires_grad(a)) {
      Tensor64& ga = g.grad_ref(a);
      for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) ga(i, j) += go(i, j) * s[i];
    }
    if (g.requires_grad(c)) {
      Tensor64& gc = g.grad_ref(c);
      for (std::size_t i = 0; i < x.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) acc += go(i, j) * x(i, j);
        gc[i] += acc;
      }
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  const std::size_t m = parts[0].rows();
  std::size_t n = 0;
  for (const Var& p : parts) {
    if (p.rows() != m) shape_fail("concat_cols", parts[0].value(), p.value());
    n += p.cols();
  }
  Tensor64 out(m, n);
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor64& x = p.value();
    for (std::size_t i = 0; i < m; ++i)
      std::copy(x.row(i).begin(), x.row(i).end(), out.row(i).begin() + off);
    off += x.cols();
  }
  std::vector<Var> in(parts.begin(), parts.end());
  return parts[0].graph->record(std::move(out), parts, [in](Graph& g, const Tensor64& go) {
    std::size_t off = 0;
    for (const Var& p : in) {
      const std::size_t w = g.value(p).cols();
      if (g.requires_grad(p)) {
        Tensor64& gp = g.grad_ref(p);
        for (std::size_t i = 0; i < go.rows(); ++i)
          for (std::size_t j = 0; j < w; ++j) gp(i, j) += go(i, off + j);
      }
      off += w;
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  const std::size_t n = parts[0].cols();
  std::size_t m = 0;
  for (const Var& p : parts) {
    if (p.cols() != n) shape_fail("concat_rows", parts[0].value(), p.value());
    m += p.rows();
  }
  Tensor64 out(m, n);
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor64& x = p.value();
    std::copy(x.values().begin(), x.values().end(), out.values().begin() + off * n);
    off += x.rows();
  }
  std::vector<Var> in(parts.begin(), parts.end());
  return parts[0].graph->record(std::move(out), parts, [in](Graph& g, const Tensor64& go) {
    std::size_t off = 0;
    for (const Var& p : in) {
      const std::size_t sz = g.value(p).size();
      if (g.requires_grad(p)) {
        Tensor64& gp = g.grad_ref(p);
        for (std::size_t i = 0; i < sz; ++i) gp[i] += go[off + i];
      }
      off += sz;
    }
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Tensor64& x = a.value();
  if (begin + count > x.cols()) shape_fail("slice_cols", x);
  Tensor64 out(x.rows(), count);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = x(i, begin + j);
  return a.graph->record(std::move(out), {a}, [a, begin, count](Graph& g, const Tensor64& go) {
    Tensor64& ga = g.grad_ref(a);
    for (std::size_t i = 0; i < go.rows(); ++i)
      for (std::size_t j = 0; j < count; ++j) ga(i, begin + j) += go(i, j);
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t count) {
  const Tensor64& x = a.value();
  if (begin + count > x.rows()) shape_fail("slice_rows", x);
  const std::size_t n = x.cols();
  Tensor64 out(count, n);
  std::copy_n(x.values().begin() + static_cast<std::ptrdiff_t>(begin * n), count * n,
              out.values().begin());
  return a.graph->record(std::move(out), {a}, [a, begin, n](Graph& g, const Tensor64& go) {
    Tensor64& ga = g.grad_ref(a);
    for (std::size_t k = 0; k < go.size(); ++k) ga[begin * n + k] += go[k];
  });
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
  Tensor64 out = a.value();
  out.reshape({rows, cols});
  return a.graph->record(std::move(out), {a}, [a](Graph& g, const Tensor64& go) {
    Tensor64& ga = g.grad_ref(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
  });
}

// ---- indexing ---------------------------------------------------------------

Var gather_rows(Var table, std::span<const std::uint32_t> index) {
  const Tensor64& t = table.value();
  const std::size_t n = t.cols();
  Tensor64 out(index.size(), n);
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= t.rows())
      throw ShapeError("gather_rows: index " + std::to_string(index[r]) + " out of range for " +
                       shape_string(t.shape()));
    std::copy(t.row(index[r]).begin(), t.row(index[r]).end(), out.row(r).begin());
  }
  std::vector<std::uint32_t> idx(index.begin(), index.end());
  return table.graph->record(std::move(out), {table},
                             [table, idx = std::move(idx)](Graph& g, const Tensor64& go) {
                               Tensor64& gt = g.grad_ref(table);
                               const std::size_t n = go.cols();
                               for (std::size_t r = 0; r < idx.size(); ++r) {
                                 double* dst = gt.row(idx[r]).data();
                                 const double* src = go.row(r).data();
                                 for (std::size_t j = 0; j < n; ++j) dst[j] += src[j];
                               }
                             });
}

Var scatter_add_rows(Var src, std::span<const std::uint32_t> index, std::size_t n_rows) {
  const Tensor64& s = src.value();
  if (index.size() != s.rows())
    throw ShapeError("scatter_add_rows: " + std::to_string(index.size()) + " indices for " +
                     shape_string(s.shape()));
  const std::size_t n = s.cols();
  Tensor64 out(n_rows, n);
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= n_rows) throw ShapeError("scatter_add_rows: index out of range");
    for (std::size_t j = 0; j < n; ++j) out(index[r], j) += s(r, j);
  }
  std::vector<std::uint32_t> idx(index.begin(), index.end());
  return src.graph->record(std::move(out), {src},
                           [src, idx = std::move(idx)](Graph& g, const Tensor64& go) {
                             Tensor64& gs = g.grad_ref(src);
                             const std::size_t n = go.cols();
                             for (std::size_t r = 0; r < idx.size(); ++r)
                               for (std::size_t j = 0; j < n; ++j) gs(r, j) += go(idx[r], j);
                           });
}

Var pick(Var a, std::span<const int> col) {
  const Tensor64& x = a.value();
  if (col.size() != x.rows())
    throw ShapeError("pick: " + std::to_string(col.size()) + " indices for " +
                     shape_string(x.shape()));
  Tensor64 out(x.rows(), 1);
  for (std::size_t r = 0; r < col.size(); ++r) {
    if (col[r] < 0) continue;
    if (static_cast<std::size_t>(col[r]) >= x.cols()) throw ShapeError("pick: column out of range");
    out[r] = x(r, static_cast<std::size_t>(col[r]));
  }
  std::vector<int> c(col.begin(), col.end());
  return a.graph->record(std::move(out), {a}, [a, c = std::move(c)](Graph& g, const Tensor64& go) {
    Tensor64& ga = g.grad_ref(a);
    for (std::size_t r = 0; r < c.size(); ++r)
      if (c[r] >= 0) ga(r, static_cast<std::size_t>(c[r])) += go[r];
  });
}

// ---- pointwise nonlinearities ------------------------------------------------

Var leaky_relu(Var a, double slope) {
  a.graph->mark_branches(a.value());
  return unary(a, [slope](double v) { return v > 0.0 ? v : slope * v; },
               [a, slope](Graph& g, const Tensor64& go) {
                 const Tensor64& x = g.value(a);
                 Tensor64& ga = g.grad_ref(a);
                 for (std::size_t i = 0; i < go.size(); ++i)
                   ga[i] += go[i] * (x[i] > 0.0 ? 1.0 : slope);
               });
}

Var elu(Var a, double alpha) {
  a.graph->mark_branches(a.value());
  return unary(a, [alpha](double v) { return v > 0.0 ? v : alpha * std::expm1(v); },
               [a, alpha](Graph& g, const Tensor64& go) {
                 const Tensor64& x = g.value(a);
                 Tensor64& ga = g.grad_ref(a);
                 for (std::size_t i = 0; i < go.size(); ++i)
                   ga[i] += go[i] * (x[i] > 0.0 ? 1.0 : alpha * std::exp(x[i]));
               });
}

Var relu(Var a) {
  a.graph->mark_branches(a.value());
  return unary(a, [](double v) { return v > 0.0 ? v : 0.0; }, [a](Graph& g, const Tensor64& go) {
    const Tensor64& x = g.value(a);
    Tensor64& ga = g.grad_ref(a);
    for (std::size_t i = 0; i < go.size(); ++i)
      if (x[i] > 0.0) ga[i] += go[i];
  });
}

Var sigmoid(Var a) {
  const Tensor64& x = a.value();
  Tensor64 out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  auto y = std::make_shared<Tensor64>(out);
  return a.graph->record(std::move(out), {a}, [a, y](Graph& g, const Tensor64& go) {
    Tensor64& ga = g.grad_ref(a);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * (*y)[i] * (1.0 - (*y)[i]);
  });
}

// ---- normalizers -----------------------------------------------------------

namespace {

void softmax_row(std::span<const double> in, std::span<double> out) {
  double mx = kNegInf;
  for (double v : in) mx = std::max(mx, v);
  if (mx == kNegInf) throw std::domain_error("softmax: row with every entry masked");
  double z = 0.0;
  for (std::size_t j = 0; j < in.size(); ++j) {
    out[j] = std::exp(in[j] - mx);
    z += out[j];
  }
  for (double& v : out) v /= z;
}

}  // namespace

Var softmax_rows(Var a) {
  const Tensor64& x = a.value();
  Tensor64 out(x.shape());
  for (std::size_t i = 0; i < x.rows(); ++i) softmax_row(x.row(i), out.row(i));
  auto y = std::make_shared<Tensor64>(out);
  return a.graph->record(std::move(out), {a}, [a, y](Graph& g, const Tensor64& go) {
    Tensor64& ga = g.grad_ref(a);
    for (std::size_t i = 0; i < go.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < go.cols(); ++j) dot += go(i, j) * (*y)(i, j);
      for (std::size_t j = 0; j < go.cols(); ++j) ga(i, j) += (*y)(i, j) * (go(i, j) - dot);
    }
  });
}

Var log_softmax_rows(Var a) {
  const Tensor64& x = a.value();
  Tensor64 out(x.shape());
  auto prob = std::make_shared<Tensor64>(x.shape());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = x.row(i);
    double mx = kNegInf;
    for (double v : r) mx = std::max(mx, v);
    if (mx == kNegInf) throw std::domain_error("log_softmax: row with every entry masked");
    double z = 0.0;
    for (double v : r) z += std::exp(v - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < r.size(); ++j) {
      out(i, j) = r[j] - lse;
      (*prob)(i, j) = std::exp(out(i, j));
    }
  }
  return a.graph->record(std::move(out), {a}, [a, prob](Graph& g, const Tensor64& go) {
    Tensor64& ga = g.grad_ref(a);
    for (std::size_t i = 0; i < go.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < go.cols(); ++j) s += go(i, j);
      for (std::size_t j = 0; j < go.cols(); ++j) {
        const double p = (*prob)(i, j);
        // masked entries carry p == 0 and an upstream gradient of 0
        ga(i, j) += go(i, j) - p * s;
      }
    }
  });
}

Var segment_softmax(Var scores, std::span<const std::size_t> offsets) {
  const Tensor64& x = scores.value();
  if (x.cols() != 1 || offsets.empty() || offsets.back() != x.rows())
    shape_fail("segment_softmax", x);
  Tensor64 out(x.shape());
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    const std::size_t b = offsets[s], e = offsets[s + 1];
    if (b == e) continue;
    softmax_row(x.values().subspan(b, e - b), out.values().subspan(b, e - b));
  }
  auto y = std::make_shared<Tensor64>(out);
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  return scores.graph->record(std::move(out), {scores},
                              [scores, y, off = std::move(off)](Graph& g, const Tensor64& go) {
                                Tensor64& gs = g.grad_ref(scores);
                                for (std::size_t s = 0; s + 1 < off.size(); ++s) {
                                  double dot = 0.0;
                                  for (std::size_t i = off[s]; i < off[s + 1]; ++i)
                                    dot += go[i] * (*y)[i];
                                  for (std::size_t i = off[s]; i < off[s + 1]; ++i)
                                    gs[i] += (*y)[i] * (go[i] - dot);
                                }
                              });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  require_same_graph(x, gain);
  require_same_graph(x, bias);
  const Tensor64& v = x.value();
  const std::size_t m = v.rows(), n = v.cols();
  if (gain.value().size() != n || bias.value().size() != n)
    shape_fail("layer_norm", v, gain.value());
  auto xhat = std::make_shared<Tensor64>(m, n);
  auto inv_std = std::make_shared<std::vector<double>>(m);
  Tensor64 out(m, n);
  const Tensor64& gv = gain.value();
  const Tensor64& bv = bias.value();
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += v(i, j);
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (v(i, j) - mu) * (v(i, j) - mu);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (std::size_t j = 0; j < n; ++j) {
      (*xhat)(i, j) = (v(i, j) - mu) * is;
      out(i, j) = (*xhat)(i, j) * gv[j] + bv[j];
    }
  }
  return x.graph->record(
      std::move(out), {x, gain, bias}, [x, gain, bias, xhat, inv_std](Graph& g, const Tensor64& go) {
        const std::size_t m = go.rows(), n = go.cols();
        const Tensor64& gv = g.value(gain);
        if (g.requires_grad(gain)) {
          Tensor64& gg = g.grad_ref(gain);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gg[j] += go(i, j) * (*xhat)(i, j);
        }
        if (g.requires_grad(bias)) {
          Tensor64& gb = g.grad_ref(bias);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gb[j] += go(i, j);
        }
        if (g.requires_grad(x)) {
          Tensor64& gx = g.grad_ref(x);
          const double dn = static_cast<double>(n);
          for (std::size_t i = 0; i < m; ++i) {
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              const double dxh = go(i, j) * gv[j];
              s1 += dxh;
              s2 += dxh * (*xhat)(i, j);
            }
            for (std::size_t j = 0; j < n; ++j) {
              const double dxh = go(i, j) * gv[j];
              gx(i, j) += (*inv_std)[i] * (dxh - s1 / dn - (*xhat)(i, j) * s2 / dn);
            }
          }
        }
      });
}

Var dropout(Var x, double p) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: probability must be in [0,1)");
  Graph& graph = *x.graph;
  if (!graph.training() || p == 0.0) return x;
  const Tensor64& v = x.value();
  auto keep = std::make_shared<std::vector<double>>(v.size());
  std::bernoulli_distribution coin(1.0 - p);
  const double s = 1.0 / (1.0 - p);
  Tensor64 out(v.shape());
  for (std::size_t i = 0; i < v.size(); ++i) {
    (*keep)[i] = coin(graph.rng()) ? s : 0.0;
    out[i] = v[i] * (*keep)[i];
  }
  return graph.record(std::move(out), {x}, [x, keep](Graph& g, const Tensor64& go) {
    Tensor64& gx = g.grad_ref(x);
    for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * (*keep)[i];
  });
}

Var masked_fill(Var a, std::span<const std::uint8_t> mask, double value) {
  const Tensor64& x = a.value();
  if (mask.size() != x.size())
    throw ShapeError("masked_fill: mask of " + std::to_string(mask.size()) + " for " +
                     shape_string(x.shape()));
  Tensor64 out = x;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (mask[i]) out[i] = value;
  std::vector<std::uint8_t> m(mask.begin(), mask.end());
  return a.graph->record(std::move(out), {a}, [a, m = std::move(m)](Graph& g, const Tensor64& go) {
    Tensor64& ga = g.grad_ref(a);
    for (std::size_t i = 0; i < go.size(); ++i)
      if (!m[i]) ga[i] += go[i];
  });
}

// ---- reductions -------------------------------------------------------------

Var rowwise_dot(Var a, Var b) {
  require_same_graph(a, b);
  const Tensor64& x = a.value();
  const Tensor64& y = b.value();
  if (!x.same_shape(y)) shape_fail("rowwise_dot", x, y);
  Tensor64 out(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) acc += x(i, j) * y(i, j);
    out[i] = acc;
  }
  return a.graph->record(std::move(out), {a, b}, [a, b](Graph& g, const Tensor64& go) {
    const Tensor64& x = g.value(a);
    const Tensor64& y = g.value(b);
    if (g.requires_grad(a)) {
      Tensor64& ga = g.grad_ref(a);
      for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) ga(i, j) += go[i] * y(i, j);
    }
    if (g.requires_grad(b)) {
      Tensor64& gb = g.grad_ref(b);
      for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) gb(i, j) += go[i] * x(i, j);
    }
  });
}

Var sum(Var a) {
  double acc = 0.0;
  for (double v : a.value().values()) acc += v;
  return a.graph->record(Tensor64::scalar(acc), {a}, [a](Graph& g, const Tensor64& go) {
    Tensor64& ga = g.grad_ref(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[0];
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var cross_entropy(Var logits, std::span<const int> targets) {
  return scale(sum(pick(log_softmax_rows(logits), targets)), -1.0);
}

Var bce_with_logits(Var s, std::span<const double> labels) {
  const Tensor64& x = s.value();
  if (x.cols() != 1 || labels.size() != x.rows())
    throw ShapeError("bce_with_logits: " + std::to_string(labels.size()) + " labels for " +
                     shape_string(x.shape()));
  if (labels.empty()) throw ShapeError("bce_with_logits: no pairs");
  // -[y log σ(s) + (1-y) log(1-σ(s))] = softplus(s) - y s
  double acc = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double v = x[i];
    const double softplus = std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
    acc += softplus - labels[i] * v;
  }
  const double n = static_cast<double>(labels.size());
  std::vector<double> y(labels.begin(), labels.end());
  return s.graph->record(Tensor64::scalar(acc / n), {s},
                         [s, y = std::move(y), n](Graph& g, const Tensor64& go) {
                           const Tensor64& x = g.value(s);
                           Tensor64& gs = g.grad_ref(s);
                           for (std::size_t i = 0; i < y.size(); ++i) {
                             const double v = x[i];
                             const double sig = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                                         : std::exp(v) / (1.0 + std::exp(v));
                             gs[i] += go[0] * (sig - y[i]) / n;
                           }
                         });
}

}  // namespace ad
}  // namespace getad
