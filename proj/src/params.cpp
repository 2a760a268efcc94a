#include "gratis/params.hpp"

#include <cmath>

#include "gratis/error.hpp"

namespace gratis {

Tensor ParameterStore::add(std::string name, Tensor value) {
  if (index_.contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
  if (!value.is_leaf()) throw ContractError("parameter '" + name + "' must be a leaf tensor");
  value.set_requires_grad(true);
  index_.emplace(name, params_.size());
  params_.push_back({std::move(name), value});
  return value;
}

Tensor ParameterStore::get(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ContractError("unknown parameter '" + std::string(name) + "'");
  return params_[it->second].value;
}

bool ParameterStore::contains(std::string_view name) const {
  return index_.contains(std::string(name));
}

std::size_t ParameterStore::element_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

std::vector<Parameter> ParameterStore::with_prefix(std::span<const std::string> prefixes) const {
  std::vector<Parameter> out;
  for (const auto& p : params_) {
    for (const auto& pre : prefixes) {
      if (p.name.starts_with(pre)) {
        out.push_back(p);
        break;
      }
    }
  }
  return out;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.value.zero_grad();
}

Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform({fan_in, fan_out}, -a, a, rng);
}

Tensor uniform(Shape shape, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> data(shape_numel(shape));
  for (auto& x : data) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(data));
}

Tensor normal(Shape shape, double mean, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(mean, stddev);
  std::vector<double> data(shape_numel(shape));
  for (auto& x : data) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(data));
}

}  // namespace gratis
