#pragma once

// Dense row-major float64 tensors with tape-free reverse-mode differentiation.
//
// A Tensor is a cheap handle to shared storage. Every op below returns a new
// tensor; when grad mode is on and any input requires a gradient, the result
// records its inputs and a backward closure. Calling backward() on a scalar
// walks the recorded graph in reverse topological order.
//
// Broadcasting is deliberately absent. The only mixed-shape ops are the
// explicitly named ones (add_bias, scale_rows, scatter_add_rows, ...).

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace gratis {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  // Reads this node's grad and accumulates into parents that require grad.
  std::function<void(TensorImpl&)> backward;

  std::span<double> grad_buffer();  // allocates zeros on first use
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // Direct writes bypass the recorded graph; meant for leaves (optimizers,
  // initializers, finite-difference probes).
  std::span<double> mutable_data();
  std::vector<double> to_vector() const;

  double item() const;
  double at(std::size_t i) const;
  double at(std::size_t i, std::size_t j) const;
  double at(std::size_t i, std::size_t j, std::size_t k) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);
  bool is_leaf() const;

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Reverse pass from a scalar. Leaf gradients accumulate across calls.
  void backward() const;

  /// Copy of the values with no history.
  Tensor detach() const;

  const detail::TensorImpl* id() const noexcept { return impl_.get(); }

  // Used by op implementations.
  const std::shared_ptr<detail::TensorImpl>& impl() const noexcept { return impl_; }
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Thread-local switch disabling graph recording for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

inline constexpr std::size_t kNoIndex = std::numeric_limits<std::size_t>::max();

// ---- elementwise (identical shapes) ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);

// ---- scalar with tensor ----
Tensor add_scalar(const Tensor& a, double s);
Tensor scale(const Tensor& a, double s);

// ---- nonlinearities ----
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope = 0.2);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);

// ---- linear algebra / layout ----
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);  // rank 2
Tensor permute(const Tensor& a, const std::vector<std::size_t>& axes);
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

// ---- reductions ----
Tensor sum(const Tensor& a);  // rank-0 result
Tensor mean(const Tensor& a);
Tensor sum(const Tensor& a, std::size_t axis);  // axis removed
Tensor mean(const Tensor& a, std::size_t axis);

// ---- normalization ----
/// Max-subtracted softmax along one axis.
Tensor softmax(const Tensor& a, std::size_t axis);
Tensor log_softmax(const Tensor& a, std::size_t axis);

// ---- row-structured ops on rank-2 tensors ----
/// out[r] = a[indices[r]]; kNoIndex yields a zero row.
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> indices);
/// out[index[r]] += a[r]; out has n_rows rows.
Tensor scatter_add_rows(const Tensor& a, std::span<const std::size_t> index, std::size_t n_rows);
/// a[m×n] + b[1×n] added to every row.
Tensor add_bias(const Tensor& a, const Tensor& bias);
/// Row r of a[m×n] multiplied by w[r]; w has m entries.
Tensor scale_rows(const Tensor& a, const Tensor& w);
/// Softmax of a length-E vector within groups given by segment[e] < n_segments.
Tensor segment_softmax(const Tensor& logits, std::span<const std::size_t> segment,
                       std::size_t n_segments);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

namespace detail {

/// Builds an op result; records history only when some input needs a gradient.
Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                   std::function<void(TensorImpl&)> backward);

}  // namespace detail

}  // namespace gratis
