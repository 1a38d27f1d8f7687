// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "dgcn/data.hpp"
#include "dgcn/params.hpp"

namespace dgcn {

struct ClassifierParams {
  LabelMode head = LabelMode::classification;
  Tensor W_beta;      // [dim, dim]
  Tensor W_l, b_l;    // [dim, hidden], [1, hidden]
  Tensor W_out, b_out;  // softmax or regression output layer

  std::size_t outputs() const { return W_out.cols(); }

  static ClassifierParams declare(ParamStore& store, std::size_t input, std::size_t hidden,
                                  std::size_t outputs, LabelMode head,
                                  const std::string& prefix = "clf.");
};

/// beta[i, :] = softmax_j(h_i^T W_beta h_j) over the whole conversation.
Tensor attention_weights(const Tensor& h, const Tensor& W_beta);
/// h~ = beta h, with beta from attention_weights.
Tensor attend_pool(const Tensor& h, const Tensor& W_beta);
/// Concatenates [g_i, h2_i] per row, then pools.
Tensor attend_pool(const Tensor& g, const Tensor& h2, const Tensor& W_beta);

/// Pre-softmax scores W_out ReLU(W_l h~ + b_l) + b_out, any head.
Tensor output_layer(const Tensor& pooled, const ClassifierParams& params);

/// First index of the maximum.
std::size_t argmax(std::span<const double> values);

struct Classification {
  Tensor probs;                         // [n, classes]
  std::vector<std::size_t> predicted;   // lowest index on ties
};

Classification classify(const Tensor& pooled, const ClassifierParams& params);
/// Unbounded linear outputs, [n, attributes].
Tensor regress(const Tensor& pooled, const ClassifierParams& params);

}  // namespace dgcn
