#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "gratis/error.hpp"
#include "gratis/kernels.hpp"
#include "gratis/tensor.hpp"

namespace gratis {

using detail::make_result;
using detail::TensorImpl;

namespace {

TensorImpl& parent(TensorImpl& self, std::size_t k) { return *self.parents[k]; }

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(fmt::format("{}: shape mismatch {} vs {}", op, shape_str(a.shape()),
                                     shape_str(b.shape())));
  }
}

void require_rank(const char* op, const Tensor& a, std::size_t rank) {
  if (a.rank() != rank) {
    throw DimensionError(fmt::format("{}: expected rank {}, got shape {}", op, rank,
                                     shape_str(a.shape())));
  }
}

// Splits a shape around `axis` into (outer, length, inner) extents.
struct AxisSplit {
  std::size_t outer = 1, length = 1, inner = 1;
};

AxisSplit split_axis(const char* op, const Shape& s, std::size_t axis) {
  if (axis >= s.size()) {
    throw DimensionError(fmt::format("{}: axis {} out of range for shape {}", op, axis, shape_str(s)));
  }
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.length = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
  auto in = a.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return make_result(a.shape(), std::move(out), {a}, [deriv](TensorImpl& self) {
    auto& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * deriv(p.data[i], self.data[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](TensorImpl& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      auto& p = parent(self, k);
      if (!p.requires_grad) continue;
      auto g = p.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](TensorImpl& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      auto& p = parent(self, k);
      if (!p.requires_grad) continue;
      const double sign = k == 0 ? 1.0 : -1.0;
      auto g = p.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](TensorImpl& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    if (pa.requires_grad) {
      auto g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.data[i];
    }
    if (pb.requires_grad) {
      auto g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.data[i];
    }
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same_shape("div", a, b);
  auto x = a.data(), y = b.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] / y[i];
  return make_result(a.shape(), std::move(out), {a, b}, [](TensorImpl& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    if (pa.requires_grad) {
      auto g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / pb.data[i];
    }
    if (pb.requires_grad) {
      auto g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i] * self.data[i] / pb.data[i];
    }
  });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary(
      a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError(fmt::format("matmul: inner dimensions differ for {} x {}",
                                     shape_str(a.shape()), shape_str(b.shape())));
  }
  std::vector<double> out(m * n);
  kernels::parallel::gemm({.m = m, .n = n, .k = k, .a = a.data().data(), .b = b.data().data(),
                           .c = out.data()});
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](TensorImpl& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    if (pa.requires_grad) {
      kernels::parallel::gemm({.trans_b = kernels::Trans::Yes, .m = m, .n = k, .k = n,
                               .a = self.grad.data(), .b = pb.data.data(),
                               .c = pa.grad_buffer().data(), .accumulate = true});
    }
    if (pb.requires_grad) {
      kernels::parallel::gemm({.trans_a = kernels::Trans::Yes, .m = k, .n = n, .k = m,
                               .a = pa.data.data(), .b = self.grad.data(),
                               .c = pb.grad_buffer().data(), .accumulate = true});
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank("transpose", a, 2);
  return permute(a, {1, 0});
}

Tensor permute(const Tensor& a, const std::vector<std::size_t>& axes) {
  const auto& s = a.shape();
  const std::size_t r = s.size();
  if (axes.size() != r) throw DimensionError("permute: axes length must equal rank");
  std::vector<bool> used(r, false);
  for (auto ax : axes) {
    if (ax >= r || used[ax]) throw ContractError("permute: axes must be a permutation");
    used[ax] = true;
  }
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = s[axes[i]];
  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t i = r; i-- > 1;) in_strides[i - 1] = in_strides[i] * s[i];

  // src_index[o] = flat input offset feeding output offset o.
  const std::size_t n = a.numel();
  std::vector<std::size_t> src(n);
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t o = 0; o < n; ++o) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < r; ++i) off += idx[i] * in_strides[axes[i]];
    src[o] = off;
    for (std::size_t i = r; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  auto in = a.data();
  std::vector<double> out(n);
  for (std::size_t o = 0; o < n; ++o) out[o] = in[src[o]];
  return make_result(std::move(out_shape), std::move(out), {a},
                     [src = std::move(src)](TensorImpl& self) {
                       auto& p = parent(self, 0);
                       if (!p.requires_grad) return;
                       auto g = p.grad_buffer();
                       for (std::size_t o = 0; o < src.size(); ++o) g[src[o]] += self.grad[o];
                     });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError(fmt::format("reshape: cannot view {} as {}", shape_str(a.shape()),
                                     shape_str(shape)));
  }
  return make_result(std::move(shape), a.to_vector(), {a}, [](TensorImpl& self) {
    auto& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  const Shape& s0 = parts.front().shape();
  Shape out_shape = s0;
  if (axis >= s0.size()) throw DimensionError("concat: axis out of range");
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    bool ok = s.size() == s0.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == s0[i];
    if (!ok) {
      throw DimensionError(fmt::format("concat: incompatible shapes {} and {}", shape_str(s0),
                                       shape_str(s)));
    }
    out_shape[axis] += s[axis];
  }
  const auto split = split_axis("concat", out_shape, axis);
  std::vector<std::size_t> widths;
  for (const auto& p : parts) widths.push_back(p.dim(axis) * split.inner);
  const std::size_t row = split.length * split.inner;

  std::vector<double> out(shape_numel(out_shape));
  std::size_t col = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto in = parts[k].data();
    for (std::size_t o = 0; o < split.outer; ++o) {
      std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(o * widths[k]), widths[k],
                  out.begin() + static_cast<std::ptrdiff_t>(o * row + col));
    }
    col += widths[k];
  }
  return make_result(std::move(out_shape), std::move(out), parts,
                     [widths, row, outer = split.outer](TensorImpl& self) {
                       std::size_t col = 0;
                       for (std::size_t k = 0; k < widths.size(); ++k) {
                         auto& p = parent(self, k);
                         if (p.requires_grad) {
                           auto g = p.grad_buffer();
                           for (std::size_t o = 0; o < outer; ++o) {
                             for (std::size_t c = 0; c < widths[k]; ++c) {
                               g[o * widths[k] + c] += self.grad[o * row + col + c];
                             }
                           }
                         }
                         col += widths[k];
                       }
                     });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.data()) s += x;
  return make_result({}, {s}, {a}, [](TensorImpl& self) {
    auto& p = parent(self, 0);
    if (!p.requires_grad) return;
    for (auto& g : p.grad_buffer()) g += self.grad[0];
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor sum(const Tensor& a, std::size_t axis) {
  const auto sp = split_axis("sum", a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  auto in = a.data();
  std::vector<double> out(sp.outer * sp.inner, 0.0);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t l = 0; l < sp.length; ++l) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        out[o * sp.inner + i] += in[(o * sp.length + l) * sp.inner + i];
      }
    }
  }
  return make_result(std::move(out_shape), std::move(out), {a}, [sp](TensorImpl& self) {
    auto& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto g = p.grad_buffer();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t l = 0; l < sp.length; ++l) {
        for (std::size_t i = 0; i < sp.inner; ++i) {
          g[(o * sp.length + l) * sp.inner + i] += self.grad[o * sp.inner + i];
        }
      }
    }
  });
}

Tensor mean(const Tensor& a, std::size_t axis) {
  return scale(sum(a, axis), 1.0 / static_cast<double>(a.dim(axis)));
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  const auto sp = split_axis("softmax", a.shape(), axis);
  auto in = a.data();
  std::vector<double> out(in.size());
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      const std::size_t base = o * sp.length * sp.inner + i;
      double mx = -INFINITY;
      for (std::size_t l = 0; l < sp.length; ++l) mx = std::max(mx, in[base + l * sp.inner]);
      double z = 0.0;
      for (std::size_t l = 0; l < sp.length; ++l) {
        out[base + l * sp.inner] = std::exp(in[base + l * sp.inner] - mx);
        z += out[base + l * sp.inner];
      }
      for (std::size_t l = 0; l < sp.length; ++l) out[base + l * sp.inner] /= z;
    }
  }
  return make_result(a.shape(), std::move(out), {a}, [sp](TensorImpl& self) {
    auto& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto g = p.grad_buffer();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        const std::size_t base = o * sp.length * sp.inner + i;
        double dot = 0.0;
        for (std::size_t l = 0; l < sp.length; ++l) {
          dot += self.grad[base + l * sp.inner] * self.data[base + l * sp.inner];
        }
        for (std::size_t l = 0; l < sp.length; ++l) {
          const std::size_t at = base + l * sp.inner;
          g[at] += self.data[at] * (self.grad[at] - dot);
        }
      }
    }
  });
}

Tensor log_softmax(const Tensor& a, std::size_t axis) {
  const auto sp = split_axis("log_softmax", a.shape(), axis);
  auto in = a.data();
  std::vector<double> out(in.size());
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      const std::size_t base = o * sp.length * sp.inner + i;
      double mx = -INFINITY;
      for (std::size_t l = 0; l < sp.length; ++l) mx = std::max(mx, in[base + l * sp.inner]);
      double z = 0.0;
      for (std::size_t l = 0; l < sp.length; ++l) z += std::exp(in[base + l * sp.inner] - mx);
      const double lz = mx + std::log(z);
      for (std::size_t l = 0; l < sp.length; ++l) {
        out[base + l * sp.inner] = in[base + l * sp.inner] - lz;
      }
    }
  }
  return make_result(a.shape(), std::move(out), {a}, [sp](TensorImpl& self) {
    auto& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto g = p.grad_buffer();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        const std::size_t base = o * sp.length * sp.inner + i;
        double gsum = 0.0;
        for (std::size_t l = 0; l < sp.length; ++l) gsum += self.grad[base + l * sp.inner];
        for (std::size_t l = 0; l < sp.length; ++l) {
          const std::size_t at = base + l * sp.inner;
          g[at] += self.grad[at] - std::exp(self.data[at]) * gsum;
        }
      }
    }
  });
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> indices) {
  require_rank("gather_rows", a, 2);
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (indices.empty()) throw ContractError("gather_rows: empty index list");
  for (auto r : indices) {
    if (r != kNoIndex && r >= m) {
      throw DimensionError(fmt::format("gather_rows: row {} out of range for {}", r,
                                       shape_str(a.shape())));
    }
  }
  auto in = a.data();
  std::vector<double> out(indices.size() * n, 0.0);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] == kNoIndex) continue;
    std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(indices[r] * n), n,
                out.begin() + static_cast<std::ptrdiff_t>(r * n));
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return make_result({indices.size(), n}, std::move(out), {a},
                     [idx = std::move(idx), n](TensorImpl& self) {
                       auto& p = parent(self, 0);
                       if (!p.requires_grad) return;
                       auto g = p.grad_buffer();
                       for (std::size_t r = 0; r < idx.size(); ++r) {
                         if (idx[r] == kNoIndex) continue;
                         for (std::size_t c = 0; c < n; ++c) g[idx[r] * n + c] += self.grad[r * n + c];
                       }
                     });
}

Tensor scatter_add_rows(const Tensor& a, std::span<const std::size_t> index, std::size_t n_rows) {
  require_rank("scatter_add_rows", a, 2);
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (index.size() != m) throw DimensionError("scatter_add_rows: index length must equal row count");
  for (auto r : index) {
    if (r >= n_rows) throw DimensionError("scatter_add_rows: destination row out of range");
  }
  auto in = a.data();
  std::vector<double> out(n_rows * n, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) out[index[r] * n + c] += in[r * n + c];
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return make_result({n_rows, n}, std::move(out), {a}, [idx = std::move(idx), n](TensorImpl& self) {
    auto& p = parent(self, 0);
    if (!p.requires_grad) return;
    auto g = p.grad_buffer();
    for (std::size_t r = 0; r < idx.size(); ++r) {
      for (std::size_t c = 0; c < n; ++c) g[r * n + c] += self.grad[idx[r] * n + c];
    }
  });
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
  require_rank("add_bias", a, 2);
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (bias.numel() != n) {
    throw DimensionError(fmt::format("add_bias: bias {} does not match {}", shape_str(bias.shape()),
                                     shape_str(a.shape())));
  }
  auto x = a.data(), b = bias.data();
  std::vector<double> out(m * n);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] = x[r * n + c] + b[c];
  }
  return make_result({m, n}, std::move(out), {a, bias}, [m, n](TensorImpl& self) {
    auto& pa = parent(self, 0);
    auto& pb = parent(self, 1);
    if (pa.requires_grad) {
      auto g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      auto g = pb.grad_buffer();
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) g[c] += self.grad[r * n + c];
      }
    }
  });
}

Tensor scale_rows(const Tensor& a, const Tensor& w) {
  require_rank("scale_rows", a, 2);
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (w.numel() != m) {
    throw DimensionError(fmt::format("scale_rows: {} weights for {} rows", w.numel(), m));
  }
  auto x = a.data(), s = w.data();
  std::vector<double> out(m * n);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] = x[r * n + c] * s[r];
  }
  return make_result({m, n}, std::move(out), {a, w}, [m, n](TensorImpl& self) {
    auto& pa = parent(self, 0);
    auto& pw = parent(self, 1);
    if (pa.requires_grad) {
      auto g = pa.grad_buffer();
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) g[r * n + c] += self.grad[r * n + c] * pw.data[r];
      }
    }
    if (pw.requires_grad) {
      auto g = pw.grad_buffer();
      for (std::size_t r = 0; r < m; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < n; ++c) acc += self.grad[r * n + c] * pa.data[r * n + c];
        g[r] += acc;
      }
    }
  });
}

Tensor segment_softmax(const Tensor& logits, std::span<const std::size_t> segment,
                       std::size_t n_segments) {
  const std::size_t e = logits.numel();
  if (segment.size() != e) throw DimensionError("segment_softmax: one segment id per logit");
  for (auto s : segment) {
    if (s >= n_segments) throw DimensionError("segment_softmax: segment id out of range");
  }
  auto x = logits.data();
  std::vector<double> mx(n_segments, -INFINITY), z(n_segments, 0.0), out(e);
  for (std::size_t i = 0; i < e; ++i) mx[segment[i]] = std::max(mx[segment[i]], x[i]);
  for (std::size_t i = 0; i < e; ++i) {
    out[i] = std::exp(x[i] - mx[segment[i]]);
    z[segment[i]] += out[i];
  }
  for (std::size_t i = 0; i < e; ++i) out[i] /= z[segment[i]];
  std::vector<std::size_t> seg(segment.begin(), segment.end());
  return make_result(logits.shape(), std::move(out), {logits},
                     [seg = std::move(seg), n_segments](TensorImpl& self) {
                       auto& p = parent(self, 0);
                       if (!p.requires_grad) return;
                       std::vector<double> dot(n_segments, 0.0);
                       for (std::size_t i = 0; i < seg.size(); ++i) dot[seg[i]] += self.grad[i] * self.data[i];
                       auto g = p.grad_buffer();
                       for (std::size_t i = 0; i < seg.size(); ++i) {
                         g[i] += self.data[i] * (self.grad[i] - dot[seg[i]]);
                       }
                     });
}

}  // namespace gratis
