#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "getad/autodiff.hpp"
#include "getad/tensor.hpp"

namespace getad {

/// Named learnable tensors in 32-bit storage, kept in insertion order so that
/// checkpoints and optimizer state line up deterministically.
class ParamSet {
 public:
  Tensor& add(const std::string& name, Tensor value);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);

  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::vector<std::pair<std::string, Tensor>>& entries() { return entries_; }

  bool operator==(const ParamSet& o) const { return entries_ == o.entries_; }

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Glorot-uniform initialization of a rows x cols matrix.
Tensor glorot(std::size_t rows, std::size_t cols, std::mt19937_64& rng);
Tensor normal_init(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng);

/// Binds parameters onto a graph on first use. Overrides substitute 64-bit
/// values for named parameters (used by the finite-difference harness).
class Binder {
 public:
  Binder(ad::Graph& graph, const ParamSet& params, bool trainable = true)
      : graph_(graph), params_(params), trainable_(trainable) {}

  ad::Var operator()(const std::string& name);
  void override_value(const std::string& name, Tensor64 value);
  /// Makes `name` resolve to an existing node instead of the stored value.
  void use(const std::string& name, ad::Var v);

  ad::Graph& graph() { return graph_; }
  const ParamSet& params() const { return params_; }
  const std::map<std::string, ad::Var>& bound() const { return bound_; }

 private:
  ad::Graph& graph_;
  const ParamSet& params_;
  bool trainable_;
  std::map<std::string, ad::Var> bound_;
  std::unordered_map<std::string, Tensor64> overrides_;
};

}  // namespace getad
