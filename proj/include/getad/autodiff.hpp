#pragma once

// Reverse-mode differentiation over dense rank-2 tensors.
//
// A Graph is a tape: every primitive appends a node holding its forward value
// and a closure that pushes the output gradient into its inputs. Nodes are
// appended in dependency order, so backward() walks the tape in reverse.
// Values live in 64-bit precision on the tape; parameters are stored in
// 32-bit (see ParamSet) and widened when bound.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "getad/tensor.hpp"

namespace getad::ad {

class Graph;

struct Var {
  Graph* graph = nullptr;
  std::uint32_t id = 0;

  const Tensor64& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

class Graph {
 public:
  using Backward = std::function<void(Graph&, const Tensor64& out_grad)>;

  explicit Graph(bool training = false, std::uint64_t seed = 0)
      : training_(training), rng_(seed) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var variable(Tensor64 value);
  Var constant(Tensor64 value);

  /// Records a derived node. The closure is dropped when no input needs
  /// a gradient.
  Var record(Tensor64 value, std::initializer_list<Var> inputs, Backward backward);
  Var record(Tensor64 value, std::span<const Var> inputs, Backward backward);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every reachable node.
  void backward(Var loss);

  const Tensor64& value(Var v) const { return nodes_[v.id].value; }
  /// Gradient accumulated into v; zeros if nothing reached it.
  Tensor64 grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Accumulation target for a backward closure.
  Tensor64& grad_ref(Var v);

  /// Piecewise ops fold the branch each input element takes into this
  /// signature; equal signatures mean the same smooth piece was evaluated.
  void mark_branches(const Tensor64& x);
  std::uint64_t branch_signature() const { return branch_sig_; }

  bool training() const { return training_; }
  std::mt19937_64& rng() { return rng_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor64 value;
    Tensor64 grad;
    Backward backward;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  bool training_;
  std::mt19937_64 rng_;
  std::uint64_t branch_sig_ = 0xcbf29ce484222325ULL;
};

inline const Tensor64& Var::value() const { return graph->value(*this); }

// ---- primitives -----------------------------------------------------------

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// a (m x n) + bias (1 x n) broadcast over rows.
Var add_row(Var a, Var bias);
Var scale(Var a, double s);
Var mul(Var a, Var b);
/// a (m x n) scaled row-wise by c (m x 1).
Var mul_col(Var a, Var c);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var slice_rows(Var a, std::size_t begin, std::size_t count);
Var reshape(Var a, std::size_t rows, std::size_t cols);

/// Embedding lookup: out[r] = table[index[r]].
Var gather_rows(Var table, std::span<const std::uint32_t> index);
/// Adjoint of gather_rows: out[index[r]] += src[r], out has n_rows rows.
Var scatter_add_rows(Var src, std::span<const std::uint32_t> index, std::size_t n_rows);
/// out[r] = a(r, col[r]); rows with col < 0 yield 0 and receive no gradient.
Var pick(Var a, std::span<const int> col);

Var leaky_relu(Var a, double negative_slope = 0.01);
Var elu(Var a, double alpha = 1.0);
Var relu(Var a);
Var sigmoid(Var a);

/// Row-wise softmax with max subtraction; -inf entries get probability 0.
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
/// Softmax over contiguous row groups of a column vector:
/// group g spans rows [offsets[g], offsets[g+1]).
Var segment_softmax(Var scores, std::span<const std::size_t> offsets);

/// Per-row normalization over features followed by gain and bias (1 x n).
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
/// Inverted dropout; identity outside training or when p == 0.
Var dropout(Var x, double p);
/// Entries with mask != 0 are replaced by value and receive no gradient.
Var masked_fill(Var a, std::span<const std::uint8_t> mask, double value);

/// Inner product of matching rows: (m x n, m x n) -> m x 1.
Var rowwise_dot(Var a, Var b);
Var sum(Var a);
Var mean(Var a);

/// Sum over rows of -log_softmax(logits)[target]; targets < 0 are ignored.
Var cross_entropy(Var logits, std::span<const int> targets);
/// Mean binary cross-entropy of logits s (m x 1) against labels in {0,1}.
Var bce_with_logits(Var s, std::span<const double> labels);

}  // namespace getad::ad
