#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gratis/params.hpp"

namespace gratis {

struct GradCheckEntry {
  std::string name;
  std::size_t elements = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::vector<std::size_t> nan_elements;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;

  double max_rel_error() const;
  bool has_nan() const;
  std::size_t elements() const;
};

/// Compares the reverse-mode gradient of `loss` against central differences
/// (f(p+ε) − f(p−ε)) / 2ε, element by element. Relative error is
/// |a − n| / max(|a|, |n|, 1e-8). `loss` must be deterministic.
GradCheckReport grad_check(const std::function<Tensor()>& loss, std::span<const Parameter> params,
                           double epsilon = 1e-5);

}  // namespace gratis
