// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "dgcn/params.hpp"

namespace dgcn {

/// One direction of a GRU, row-vector convention: input weights are
/// [input, hidden], recurrent weights [hidden, hidden], biases [1, hidden].
struct GruDirection {
  Tensor W_z, W_r, W_h;
  Tensor U_z, U_r, U_h;
  Tensor b_z, b_r, b_h;

  std::size_t hidden() const { return U_z.rows(); }
};

struct GruParams {
  GruDirection fwd, bwd;

  std::size_t hidden() const { return fwd.hidden(); }
  /// Registers both directions under `prefix` + "fwd." / "bwd.", initialised
  /// from U(-1/sqrt(hidden), 1/sqrt(hidden)).
  static GruParams declare(ParamStore& store, std::size_t input, std::size_t hidden,
                           const std::string& prefix = "gru.");
};

/// z = sigmoid(x W_z + h U_z + b_z)
/// r = sigmoid(x W_r + h U_r + b_r)
/// c = tanh(x W_h + (r * h) U_h + b_h)
/// h' = (1 - z) * h + z * c
Tensor gru_cell(const Tensor& x, const Tensor& h, const GruDirection& p);

/// Bidirectional pass over rows of `inputs` ([N, D]) from zero initial
/// states. Row i of the result is [forward state after u_1..u_i,
/// backward state after u_N..u_i], shape [N, 2 * hidden].
Tensor encode_sequence(const Tensor& inputs, const GruParams& params);

}  // namespace dgcn
