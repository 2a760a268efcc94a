#include "gratis/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "gratis/error.hpp"

namespace gratis {

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.max_rel_error);
  return m;
}

bool GradCheckReport::has_nan() const {
  return std::any_of(entries.begin(), entries.end(),
                     [](const GradCheckEntry& e) { return !e.nan_elements.empty(); });
}

std::size_t GradCheckReport::elements() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.elements;
  return n;
}

GradCheckReport grad_check(const std::function<Tensor()>& loss, std::span<const Parameter> params,
                           double epsilon) {
  if (!(epsilon > 0.0)) throw ContractError("grad_check: epsilon must be positive");

  for (const auto& p : params) Tensor(p.value).zero_grad();
  loss().backward();
  std::vector<std::vector<double>> analytic;
  for (const auto& p : params) {
    if (p.value.has_grad()) {
      auto g = p.value.grad();
      analytic.emplace_back(g.begin(), g.end());
    } else {
      analytic.emplace_back(p.value.numel(), 0.0);
    }
  }

  NoGradGuard no_grad;
  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor value = params[k].value;
    auto data = value.mutable_data();
    GradCheckEntry entry;
    entry.name = params[k].name;
    entry.elements = data.size();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + epsilon;
      const double up = loss().item();
      data[i] = saved - epsilon;
      const double down = loss().item();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = analytic[k][i];
      if (std::isnan(a) || std::isnan(numeric)) {
        entry.nan_elements.push_back(i);
        continue;
      }
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      if (i == 0 || rel > entry.max_rel_error) {
        entry.max_rel_error = rel;
        entry.worst_index = i;
        entry.worst_analytic = a;
        entry.worst_numeric = numeric;
      }
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace gratis
