// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dgcn {

/// Raised for contract violations anywhere in the library (bad shapes,
/// malformed files, non-finite values).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient reaches this tensor
  bool requires_grad = false;
};

/// Dense row-major double tensor with shared ownership. Copies alias the
/// same storage; use clone() for a deep copy.
///
/// Rank is 1 or 2 for everything the model needs. Row-wise primitives treat
/// a rank-1 tensor of length n as a single row of n columns.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  /// Row vector [1, n].
  static Tensor row(std::vector<double> data, bool requires_grad = false);
  static Tensor identity(std::size_t n);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t size() const { return impl_->data.size(); }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return impl_->data; }
  /// Direct write access; used by optimizers and finite-difference checks.
  /// Never mutate a tensor that is already recorded on a live tape.
  std::span<double> mutable_data() { return impl_->data; }
  double item() const;
  double at(std::size_t r, std::size_t c) const { return impl_->data[r * cols() + c]; }
  double operator[](std::size_t i) const { return impl_->data[i]; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool on) { impl_->requires_grad = on; }
  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const double> grad() const { return impl_->grad; }
  std::span<double> mutable_grad();
  void zero_grad();

  Tensor clone() const;
  /// Same values, cut off from the tape.
  Tensor detach() const;

  TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& handle() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

/// One recorded operation. `backward` receives the gradient of the output
/// and adds contributions into the gradients of the inputs.
struct TapeEntry {
  std::string op;
  std::vector<Tensor> inputs;
  Tensor output;
  std::function<void(std::span<const double> grad_out)> backward;
};

/// Ordered record of operations for reverse-mode differentiation. Entries
/// are appended in execution order, so inputs always precede their
/// consumers. Each thread has its own active tape.
class Tape {
 public:
  void record(TapeEntry entry) { entries_.push_back(std::move(entry)); }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<TapeEntry>& entries() const { return entries_; }
  void clear() { entries_.clear(); }

 private:
  std::vector<TapeEntry> entries_;
};

Tape& active_tape();

/// Disables recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Runs the active tape backwards from a scalar loss, accumulating into the
/// grad buffer of every requires_grad tensor it reaches, then clears the tape.
void backward(const Tensor& loss);

/// Maximum over all entries of |analytic - numeric| / max(1, |analytic|, |numeric|)
/// using central differences. `f` must rebuild the computation from `params`.
double grad_check(const std::function<Tensor()>& f, std::span<Tensor> params,
                  double eps = 1e-5);

// ---------------------------------------------------------------------------
// Primitives. Each records itself on the active tape when any input requires
// a gradient. Shape errors name the primitive and the offending shapes.
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
/// a + b where b has a's shape, or b is a row [1, cols] / [cols] broadcast
/// over a's rows, or b is a single element.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// Elementwise product of equal shapes.
Tensor mul(const Tensor& a, const Tensor& b);
/// a times the single element of s.
Tensor scale_by(const Tensor& a, const Tensor& s);
Tensor scale(const Tensor& a, double c);
/// 1 - a, elementwise.
Tensor one_minus(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
/// relu'(0) is taken as 0.
Tensor relu(const Tensor& a);
/// Row-wise softmax over the last axis.
Tensor softmax(const Tensor& a);
Tensor log_softmax(const Tensor& a);
/// Row-wise softmax restricted to entries where mask != 0; masked entries
/// come out as exactly 0. Every row needs at least one unmasked entry.
Tensor masked_softmax(const Tensor& a, std::span<const unsigned char> mask);
/// axis 0 stacks rows, axis 1 joins columns.
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);
Tensor transpose(const Tensor& a);
Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count);
/// Gathers rows by index (embedding lookup); repeated indices accumulate.
Tensor select_rows(const Tensor& a, std::span<const std::size_t> indices);
/// out[i] = a[i, index[i]]; returns shape [rows].
Tensor pick(const Tensor& a, std::span<const std::size_t> index);
/// Max over sliding windows along axis 0, per column. The final window may
/// be partial. Ties go to the first index.
Tensor max_pool_rows(const Tensor& a, std::size_t window, std::size_t stride);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum_squares(const Tensor& a);

/// Elementwise map with a caller-provided derivative; for extensions and tests.
Tensor map_unary(const Tensor& a, const std::function<double(double)>& f,
                 const std::function<double(double)>& df, const std::string& name);

}  // namespace dgcn
