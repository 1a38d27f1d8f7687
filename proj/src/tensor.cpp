// SPDX-License-Identifier: Apache-2.0
#include "dgcn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace dgcn {

namespace {

thread_local Tape g_tape;
thread_local bool g_grad_enabled = true;

std::size_t product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void check_shape(const Shape& shape) {
  if (shape.empty() || shape.size() > 2) {
    throw Error("tensor: rank must be 1 or 2, got " + shape_str(shape));
  }
  for (auto d : shape) {
    if (d == 0) throw Error("tensor: zero-sized dimension in " + shape_str(shape));
  }
}

void require_finite(const std::string& op, const Tensor& t) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) {
      throw Error(op + ": non-finite input of shape " + shape_str(t.shape()));
    }
  }
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw Error(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
              shape_str(b.shape()));
}

std::vector<double>& grad_buffer(const Tensor& t) {
  auto* impl = t.impl();
  if (impl->grad.empty()) impl->grad.assign(impl->data.size(), 0.0);
  return impl->grad;
}

bool any_requires_grad(std::initializer_list<const Tensor*> ts) {
  if (!g_grad_enabled) return false;
  for (const auto* t : ts) {
    if (t->requires_grad()) return true;
  }
  return false;
}

Tensor make_output(Shape shape, std::vector<double> data) {
  return Tensor::from(std::move(shape), std::move(data));
}

void record(const std::string& op, std::vector<Tensor> inputs, Tensor& out,
            std::function<void(std::span<const double>)> bw) {
  out.set_requires_grad(true);
  g_tape.record(TapeEntry{op, std::move(inputs), out, std::move(bw)});
}

}  // namespace

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  check_shape(shape);
  auto n = product(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  check_shape(shape);
  if (product(shape) != data.size()) {
    throw Error("tensor: shape " + shape_str(shape) + " does not match " +
                std::to_string(data.size()) + " values");
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

Tensor Tensor::row(std::vector<double> data, bool requires_grad) {
  auto n = data.size();
  return from({1, n}, std::move(data), requires_grad);
}

Tensor Tensor::identity(std::size_t n) {
  auto t = zeros({n, n});
  for (std::size_t i = 0; i < n; ++i) t.mutable_data()[i * n + i] = 1.0;
  return t;
}

std::size_t Tensor::rows() const { return rank() == 1 ? 1 : impl_->shape[0]; }
std::size_t Tensor::cols() const { return impl_->shape.back(); }

double Tensor::item() const {
  if (size() != 1) throw Error("item: tensor of shape " + shape_str(shape()) + " is not a scalar");
  return impl_->data[0];
}

std::span<double> Tensor::mutable_grad() { return grad_buffer(*this); }

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  auto t = from(shape(), impl_->data, requires_grad());
  t.impl_->grad = impl_->grad;
  return t;
}

Tensor Tensor::detach() const { return from(shape(), impl_->data, false); }

// ---------------------------------------------------------------------------
// Tape control
// ---------------------------------------------------------------------------

Tape& active_tape() { return g_tape; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw Error("backward: loss must be a scalar, got " +
                (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  }
  if (!loss.requires_grad()) throw Error("backward: loss does not depend on any trainable tensor");
  auto& tape = g_tape;
  if (tape.empty()) {
    // Loss is itself a leaf.
    grad_buffer(loss)[0] += 1.0;
    return;
  }
  // Intermediate outputs start from zero on every pass. Leaves receive this
  // pass's gradient computed from zero and then added to what they held.
  std::unordered_set<TensorImpl*> outputs;
  for (const auto& e : tape.entries()) {
    e.output.impl()->grad.clear();
    outputs.insert(e.output.impl());
  }
  std::unordered_map<TensorImpl*, std::vector<double>> held;
  for (const auto& e : tape.entries()) {
    for (const auto& in : e.inputs) {
      auto* impl = in.impl();
      if (outputs.count(impl) || held.count(impl) || impl->grad.empty()) continue;
      held.emplace(impl, std::move(impl->grad));
      impl->grad.clear();
    }
  }
  grad_buffer(loss)[0] += 1.0;
  const auto& entries = tape.entries();
  for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
    const auto& g = it->output.impl()->grad;
    if (g.empty()) continue;
    it->backward(g);
  }
  for (auto& [impl, old] : held) {
    if (impl->grad.empty()) {
      impl->grad = std::move(old);
      continue;
    }
    for (std::size_t k = 0; k < old.size(); ++k) impl->grad[k] = old[k] + impl->grad[k];
  }
  tape.clear();
}

double grad_check(const std::function<Tensor()>& f, std::span<Tensor> params, double eps) {
  if (!(eps > 0)) throw Error("grad_check: eps must be positive");
  for (auto& p : params) p.zero_grad();
  active_tape().clear();
  auto loss = f();
  if (!std::isfinite(loss.item())) throw Error("grad_check: function returned a non-finite value");
  backward(loss);

  NoGradGuard guard;
  double worst = 0.0;
  for (auto& p : params) {
    std::vector<double> analytic(p.size(), 0.0);
    if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), analytic.begin());
    auto values = p.mutable_data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + eps;
      const double up = f().item();
      values[i] = orig - eps;
      const double down = f().item();
      values[i] = orig;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw Error("grad_check: function returned a non-finite value");
      }
      const double numeric = (up - down) / (2 * eps);
      const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
      worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Primitives
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) shape_error("matmul", a, b);
  require_finite("matmul", a);
  require_finite("matmul", b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      const double* brow = B.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  auto result = make_output({m, n}, std::move(out));
  if (any_requires_grad({&a, &b})) {
    record("matmul", {a, b}, result, [a, b, m, k, n](std::span<const double> g) {
      auto A = a.data();
      auto B = b.data();
      if (a.requires_grad()) {
        auto& ga = grad_buffer(a);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            const double* brow = B.data() + p * n;
            const double* grow = g.data() + i * n;
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
            ga[i * k + p] += acc;
          }
        }
      }
      if (b.requires_grad()) {
        auto& gb = grad_buffer(b);
        for (std::size_t i = 0; i < m; ++i) {
          const double* grow = g.data() + i * n;
          for (std::size_t p = 0; p < k; ++p) {
            const double av = A[i * k + p];
            if (av == 0.0) continue;
            double* gbrow = gb.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
          }
        }
      }
    });
  }
  return result;
}

namespace {

enum class Broadcast { same, row, scalar };

Broadcast broadcast_kind(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::same;
  if (b.size() == 1) return Broadcast::scalar;
  if (b.rows() == 1 && b.cols() == a.cols() && b.size() == a.cols()) return Broadcast::row;
  shape_error(op, a, b);
}

Tensor add_impl(const char* op, const Tensor& a, const Tensor& b, double sign) {
  const auto kind = broadcast_kind(op, a, b);
  require_finite(op, a);
  require_finite(op, b);
  const std::size_t n = a.size(), c = a.cols();
  std::vector<double> out(a.data().begin(), a.data().end());
  auto B = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double bv = kind == Broadcast::same ? B[i] : kind == Broadcast::row ? B[i % c] : B[0];
    out[i] += sign * bv;
  }
  auto result = make_output(a.shape(), std::move(out));
  if (any_requires_grad({&a, &b})) {
    record(op, {a, b}, result, [a, b, kind, n, c, sign](std::span<const double> g) {
      if (a.requires_grad()) {
        auto& ga = grad_buffer(a);
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto& gb = grad_buffer(b);
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t j = kind == Broadcast::same ? i : kind == Broadcast::row ? i % c : 0;
          gb[j] += sign * g[i];
        }
      }
    });
  }
  return result;
}

Tensor unary(const std::string& op, const Tensor& a, const std::function<double(double)>& f,
             std::function<double(double x, double y)> dfdx) {
  require_finite(op, a);
  std::vector<double> out(a.size());
  auto A = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(A[i]);
  auto result = make_output(a.shape(), std::move(out));
  if (any_requires_grad({&a})) {
    std::weak_ptr<TensorImpl> weak_out = result.handle();
    record(op, {a}, result, [a, weak_out, dfdx = std::move(dfdx)](std::span<const double> g) {
      auto out = weak_out.lock();
      auto& ga = grad_buffer(a);
      auto A = a.data();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * dfdx(A[i], out->data[i]);
    });
  }
  return result;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return add_impl("add", a, b, 1.0); }
Tensor sub(const Tensor& a, const Tensor& b) { return add_impl("sub", a, b, -1.0); }

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("mul", a, b);
  require_finite("mul", a);
  require_finite("mul", b);
  std::vector<double> out(a.size());
  auto A = a.data();
  auto B = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * B[i];
  auto result = make_output(a.shape(), std::move(out));
  if (any_requires_grad({&a, &b})) {
    record("mul", {a, b}, result, [a, b](std::span<const double> g) {
      auto A = a.data();
      auto B = b.data();
      if (a.requires_grad()) {
        auto& ga = grad_buffer(a);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * B[i];
      }
      if (b.requires_grad()) {
        auto& gb = grad_buffer(b);
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * A[i];
      }
    });
  }
  return result;
}

Tensor scale_by(const Tensor& a, const Tensor& s) {
  if (s.size() != 1) shape_error("scale_by", a, s);
  require_finite("scale_by", a);
  require_finite("scale_by", s);
  const double c = s[0];
  std::vector<double> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= c;
  auto result = make_output(a.shape(), std::move(out));
  if (any_requires_grad({&a, &s})) {
    record("scale_by", {a, s}, result, [a, s](std::span<const double> g) {
      auto A = a.data();
      if (a.requires_grad()) {
        auto& ga = grad_buffer(a);
        const double c = s[0];
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * c;
      }
      if (s.requires_grad()) {
        double acc = 0.0;
        for (std::size_t i = 0; i < A.size(); ++i) acc += g[i] * A[i];
        grad_buffer(s)[0] += acc;
      }
    });
  }
  return result;
}

Tensor scale(const Tensor& a, double c) {
  return unary("scale", a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Tensor one_minus(const Tensor& a) {
  return unary("one_minus", a, [](double x) { return 1.0 - x; }, [](double, double) { return -1.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      "sigmoid", a,
      [](double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
  return unary("relu", a, [](double x) { return x > 0 ? x : 0.0; },
               [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor map_unary(const Tensor& a, const std::function<double(double)>& f,
                 const std::function<double(double)>& df, const std::string& name) {
  return unary(name, a, f, [df](double x, double) { return df(x); });
}

Tensor masked_softmax(const Tensor& a, std::span<const unsigned char> mask) {
  if (!mask.empty() && mask.size() != a.size()) {
    throw Error("masked_softmax: mask of " + std::to_string(mask.size()) +
                " entries for shape " + shape_str(a.shape()));
  }
  require_finite("softmax", a);
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(a.size(), 0.0);
  auto A = a.data();
  for (std::size_t i = 0; i < r; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) {
      if (mask.empty() || mask[i * c + j]) mx = std::max(mx, A[i * c + j]);
    }
    if (!std::isfinite(mx)) throw Error("masked_softmax: row " + std::to_string(i) + " is fully masked");
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      if (mask.empty() || mask[i * c + j]) {
        out[i * c + j] = std::exp(A[i * c + j] - mx);
        z += out[i * c + j];
      }
    }
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= z;
  }
  auto result = make_output(a.shape(), std::move(out));
  if (any_requires_grad({&a})) {
    std::weak_ptr<TensorImpl> weak_out = result.handle();
    record("softmax", {a}, result, [a, weak_out, r, c](std::span<const double> g) {
      auto y = weak_out.lock();
      auto& ga = grad_buffer(a);
      for (std::size_t i = 0; i < r; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * y->data[i * c + j];
        for (std::size_t j = 0; j < c; ++j) {
          ga[i * c + j] += y->data[i * c + j] * (g[i * c + j] - dot);
        }
      }
    });
  }
  return result;
}

Tensor softmax(const Tensor& a) { return masked_softmax(a, {}); }

Tensor log_softmax(const Tensor& a) {
  require_finite("log_softmax", a);
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(a.size());
  auto A = a.data();
  for (std::size_t i = 0; i < r; ++i) {
    double mx = A[i * c];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, A[i * c + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(A[i * c + j] - mx);
    const double lz = mx + std::log(z);
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = A[i * c + j] - lz;
  }
  auto result = make_output(a.shape(), std::move(out));
  if (any_requires_grad({&a})) {
    std::weak_ptr<TensorImpl> weak_out = result.handle();
    record("log_softmax", {a}, result, [a, weak_out, r, c](std::span<const double> g) {
      auto y = weak_out.lock();
      auto& ga = grad_buffer(a);
      for (std::size_t i = 0; i < r; ++i) {
        double gs = 0.0;
        for (std::size_t j = 0; j < c; ++j) gs += g[i * c + j];
        for (std::size_t j = 0; j < c; ++j) {
          ga[i * c + j] += g[i * c + j] - std::exp(y->data[i * c + j]) * gs;
        }
      }
    });
  }
  return result;
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw Error("concat: no inputs");
  if (axis > 1) throw Error("concat: axis must be 0 or 1");
  for (const auto& p : parts) require_finite("concat", p);
  const bool rank1 = axis == 1 && std::all_of(parts.begin(), parts.end(),
                                              [](const Tensor& t) { return t.rank() == 1; });
  std::vector<double> out;
  Shape shape;
  if (axis == 0) {
    const std::size_t c = parts[0].cols();
    std::size_t r = 0;
    for (const auto& p : parts) {
      if (p.cols() != c) shape_error("concat", parts[0], p);
      r += p.rows();
      out.insert(out.end(), p.data().begin(), p.data().end());
    }
    shape = {r, c};
  } else {
    const std::size_t r = parts[0].rows();
    std::size_t c = 0;
    for (const auto& p : parts) {
      if (p.rows() != r) shape_error("concat", parts[0], p);
      c += p.cols();
    }
    out.resize(r * c);
    std::size_t off = 0;
    for (const auto& p : parts) {
      const std::size_t pc = p.cols();
      for (std::size_t i = 0; i < r; ++i) {
        std::copy_n(p.data().begin() + i * pc, pc, out.begin() + i * c + off);
      }
      off += pc;
    }
    shape = rank1 ? Shape{c} : Shape{r, c};
  }
  auto result = make_output(shape, std::move(out));
  bool needs = false;
  if (grad_enabled()) {
    for (const auto& p : parts) needs = needs || p.requires_grad();
  }
  if (needs) {
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    const std::size_t total_cols = result.cols();
    record("concat", inputs, result, [inputs, axis, total_cols](std::span<const double> g) {
      std::size_t off = 0;
      for (const auto& p : inputs) {
        if (axis == 0) {
          if (p.requires_grad()) {
            auto& gp = grad_buffer(p);
            for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[off + i];
          }
          off += p.size();
        } else {
          const std::size_t pc = p.cols();
          if (p.requires_grad()) {
            auto& gp = grad_buffer(p);
            for (std::size_t i = 0; i < p.rows(); ++i) {
              for (std::size_t j = 0; j < pc; ++j) gp[i * pc + j] += g[i * total_cols + off + j];
            }
          }
          off += pc;
        }
      }
    });
  }
  return result;
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor transpose(const Tensor& a) {
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(a.size());
  auto A = a.data();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = A[i * c + j];
  }
  auto result = make_output({c, r}, std::move(out));
  if (any_requires_grad({&a})) {
    record("transpose", {a}, result, [a, r, c](std::span<const double> g) {
      auto& ga = grad_buffer(a);
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
      }
    });
  }
  return result;
}

Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count) {
  if (count == 0 || start + count > a.rows()) {
    throw Error("slice_rows: rows [" + std::to_string(start) + ", " + std::to_string(start + count) +
                ") out of range for shape " + shape_str(a.shape()));
  }
  const std::size_t c = a.cols();
  std::vector<double> out(a.data().begin() + start * c, a.data().begin() + (start + count) * c);
  auto result = make_output({count, c}, std::move(out));
  if (any_requires_grad({&a})) {
    record("slice_rows", {a}, result, [a, start, c](std::span<const double> g) {
      auto& ga = grad_buffer(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[start * c + i] += g[i];
    });
  }
  return result;
}

Tensor select_rows(const Tensor& a, std::span<const std::size_t> indices) {
  if (indices.empty()) throw Error("select_rows: empty index list");
  const std::size_t c = a.cols();
  std::vector<double> out;
  out.reserve(indices.size() * c);
  for (auto idx : indices) {
    if (idx >= a.rows()) {
      throw Error("select_rows: index " + std::to_string(idx) + " out of range for shape " +
                  shape_str(a.shape()));
    }
    out.insert(out.end(), a.data().begin() + idx * c, a.data().begin() + (idx + 1) * c);
  }
  auto result = make_output({indices.size(), c}, std::move(out));
  if (any_requires_grad({&a})) {
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    record("select_rows", {a}, result, [a, idx, c](std::span<const double> g) {
      auto& ga = grad_buffer(a);
      for (std::size_t r = 0; r < idx.size(); ++r) {
        for (std::size_t j = 0; j < c; ++j) ga[idx[r] * c + j] += g[r * c + j];
      }
    });
  }
  return result;
}

Tensor pick(const Tensor& a, std::span<const std::size_t> index) {
  const std::size_t r = a.rows(), c = a.cols();
  if (index.size() != r) {
    throw Error("pick: " + std::to_string(index.size()) + " indices for shape " + shape_str(a.shape()));
  }
  std::vector<double> out(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (index[i] >= c) throw Error("pick: column " + std::to_string(index[i]) + " out of range");
    out[i] = a.data()[i * c + index[i]];
  }
  auto result = make_output({r}, std::move(out));
  if (any_requires_grad({&a})) {
    std::vector<std::size_t> idx(index.begin(), index.end());
    record("pick", {a}, result, [a, idx, c](std::span<const double> g) {
      auto& ga = grad_buffer(a);
      for (std::size_t i = 0; i < idx.size(); ++i) ga[i * c + idx[i]] += g[i];
    });
  }
  return result;
}

Tensor max_pool_rows(const Tensor& a, std::size_t window, std::size_t stride) {
  if (window == 0 || stride == 0) throw Error("max_pool_rows: window and stride must be positive");
  require_finite("max_pool_rows", a);
  const std::size_t r = a.rows(), c = a.cols();
  const std::size_t out_rows = r <= window ? 1 : (r - window + stride - 1) / stride + 1;
  std::vector<double> out(out_rows * c);
  std::vector<std::size_t> argmax(out_rows * c);
  auto A = a.data();
  for (std::size_t o = 0; o < out_rows; ++o) {
    const std::size_t begin = o * stride;
    const std::size_t end = std::min(begin + window, r);
    for (std::size_t j = 0; j < c; ++j) {
      std::size_t best = begin;
      for (std::size_t i = begin + 1; i < end; ++i) {
        if (A[i * c + j] > A[best * c + j]) best = i;
      }
      out[o * c + j] = A[best * c + j];
      argmax[o * c + j] = best;
    }
  }
  auto result = make_output({out_rows, c}, std::move(out));
  if (any_requires_grad({&a})) {
    record("max_pool_rows", {a}, result, [a, argmax, c](std::span<const double> g) {
      auto& ga = grad_buffer(a);
      for (std::size_t k = 0; k < argmax.size(); ++k) ga[argmax[k] * c + k % c] += g[k];
    });
  }
  return result;
}

Tensor sum(const Tensor& a) {
  require_finite("sum", a);
  double s = 0.0;
  for (double v : a.data()) s += v;
  auto result = Tensor::scalar(s);
  if (any_requires_grad({&a})) {
    record("sum", {a}, result, [a](std::span<const double> g) {
      auto& ga = grad_buffer(a);
      for (auto& v : ga) v += g[0];
    });
  }
  return result;
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor sum_squares(const Tensor& a) {
  require_finite("sum_squares", a);
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  auto result = Tensor::scalar(s);
  if (any_requires_grad({&a})) {
    record("sum_squares", {a}, result, [a](std::span<const double> g) {
      auto& ga = grad_buffer(a);
      auto A = a.data();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += 2.0 * A[i] * g[0];
    });
  }
  return result;
}

}  // namespace dgcn
