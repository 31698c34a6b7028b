#include "getad/params.hpp"

#include <cmath>
#include <stdexcept>

namespace getad {

Tensor& ParamSet::add(const std::string& name, Tensor value) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.emplace_back(name, std::move(value));
  return entries_.back().second;
}

const Tensor& ParamSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return entries_[it->second].second;
}

Tensor& ParamSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return entries_[it->second].second;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : entries_) n += t.size();
  return n;
}

Tensor glorot(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor t(rows, cols);
  for (auto& v : t.values()) v = static_cast<float>(u(rng));
  return t;
}

Tensor normal_init(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, stddev);
  Tensor t(rows, cols);
  for (auto& v : t.values()) v = static_cast<float>(n(rng));
  return t;
}

ad::Var Binder::operator()(const std::string& name) {
  if (auto it = bound_.find(name); it != bound_.end()) return it->second;
  Tensor64 value;
  if (auto ov = overrides_.find(name); ov != overrides_.end()) {
    value = ov->second;
  } else {
    value = params_.at(name).cast<double>();
  }
  ad::Var v = trainable_ ? graph_.variable(std::move(value)) : graph_.constant(std::move(value));
  bound_.emplace(name, v);
  return v;
}

void Binder::override_value(const std::string& name, Tensor64 value) {
  if (!params_.at(name).same_shape(value.cast<float>()))
    throw ShapeError("override for '" + name + "' has shape " + shape_string(value.shape()));
  overrides_[name] = std::move(value);
}

void Binder::use(const std::string& name, ad::Var v) {
  if (!params_.at(name).same_shape(v.value().cast<float>()))
    throw ShapeError("binding for '" + name + "' has shape " + shape_string(v.value().shape()));
  bound_[name] = v;
}

}  // namespace getad
