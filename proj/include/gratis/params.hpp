#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gratis/tensor.hpp"

namespace gratis {

struct Parameter {
  std::string name;
  Tensor value;  // leaf, requires_grad
};

/// Insertion-ordered registry of named learnable tensors.
class ParameterStore {
 public:
  /// Registers a leaf and marks it trainable. Names must be unique.
  Tensor add(std::string name, Tensor value);
  Tensor get(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::span<const Parameter> all() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t element_count() const;

  /// Parameters whose name starts with one of the prefixes, in registry order.
  std::vector<Parameter> with_prefix(std::span<const std::string> prefixes) const;

  void zero_grad();

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

using Rng = std::mt19937_64;

/// Glorot-uniform matrix [fan_in × fan_out].
Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng);
Tensor uniform(Shape shape, double lo, double hi, Rng& rng);
Tensor normal(Shape shape, double mean, double stddev, Rng& rng);

}  // namespace gratis
