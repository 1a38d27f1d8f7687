// SPDX-License-Identifier: Apache-2.0
#include "dgcn/gru.hpp"

#include <cmath>

namespace dgcn {

namespace {

GruDirection declare_direction(ParamStore& store, const std::string& prefix, std::size_t input,
                               std::size_t hidden) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  GruDirection d;
  d.W_z = store.add(prefix + "W_z", {input, hidden}, bound);
  d.W_r = store.add(prefix + "W_r", {input, hidden}, bound);
  d.W_h = store.add(prefix + "W_h", {input, hidden}, bound);
  d.U_z = store.add(prefix + "U_z", {hidden, hidden}, bound);
  d.U_r = store.add(prefix + "U_r", {hidden, hidden}, bound);
  d.U_h = store.add(prefix + "U_h", {hidden, hidden}, bound);
  d.b_z = store.add(prefix + "b_z", {1, hidden}, bound);
  d.b_r = store.add(prefix + "b_r", {1, hidden}, bound);
  d.b_h = store.add(prefix + "b_h", {1, hidden}, bound);
  return d;
}

// Gate update given the input projections x W_z, x W_r, x W_h.
Tensor step(const Tensor& xz, const Tensor& xr, const Tensor& xh, const Tensor& h,
            const GruDirection& p) {
  const Tensor z = sigmoid(add(add(xz, matmul(h, p.U_z)), p.b_z));
  const Tensor r = sigmoid(add(add(xr, matmul(h, p.U_r)), p.b_r));
  const Tensor c = tanh(add(add(xh, matmul(mul(r, h), p.U_h)), p.b_h));
  return add(mul(one_minus(z), h), mul(z, c));
}

std::vector<Tensor> run(const Tensor& inputs, const GruDirection& p, bool reverse) {
  const std::size_t n = inputs.rows();
  const Tensor xz = matmul(inputs, p.W_z);
  const Tensor xr = matmul(inputs, p.W_r);
  const Tensor xh = matmul(inputs, p.W_h);
  std::vector<Tensor> states(n);
  Tensor h = Tensor::zeros({1, p.hidden()});
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t t = reverse ? n - 1 - k : k;
    h = step(slice_rows(xz, t, 1), slice_rows(xr, t, 1), slice_rows(xh, t, 1), h, p);
    states[t] = h;
  }
  return states;
}

}  // namespace

GruParams GruParams::declare(ParamStore& store, std::size_t input, std::size_t hidden,
                             const std::string& prefix) {
  if (input == 0 || hidden == 0) throw Error("gru: sizes must be positive");
  return GruParams{declare_direction(store, prefix + "fwd.", input, hidden),
                   declare_direction(store, prefix + "bwd.", input, hidden)};
}

Tensor gru_cell(const Tensor& x, const Tensor& h, const GruDirection& p) {
  return step(matmul(x, p.W_z), matmul(x, p.W_r), matmul(x, p.W_h), h, p);
}

Tensor encode_sequence(const Tensor& inputs, const GruParams& params) {
  if (inputs.rank() != 2 || inputs.cols() != params.fwd.W_z.rows()) {
    throw Error("gru: input shape " + shape_str(inputs.shape()) + " does not match input size " +
                std::to_string(params.fwd.W_z.rows()));
  }
  const auto fwd = run(inputs, params.fwd, false);
  const auto bwd = run(inputs, params.bwd, true);
  std::vector<Tensor> rows;
  rows.reserve(fwd.size());
  for (std::size_t i = 0; i < fwd.size(); ++i) rows.push_back(concat({fwd[i], bwd[i]}, 1));
  return concat(rows, 0);
}

}  // namespace dgcn
