// SPDX-License-Identifier: Apache-2.0
#include "dgcn/classifier.hpp"

#include <algorithm>
#include <cmath>

namespace dgcn {

ClassifierParams ClassifierParams::declare(ParamStore& store, std::size_t input, std::size_t hidden,
                                           std::size_t outputs, LabelMode head,
                                           const std::string& prefix) {
  if (input == 0 || hidden == 0 || outputs == 0) throw Error("classifier: sizes must be positive");
  const double bi = 1.0 / std::sqrt(static_cast<double>(input));
  const double bh = 1.0 / std::sqrt(static_cast<double>(hidden));
  ClassifierParams p;
  p.head = head;
  p.W_beta = store.add(prefix + "W_beta", {input, input}, bi);
  p.W_l = store.add(prefix + "W_l", {input, hidden}, bi);
  p.b_l = store.add(prefix + "b_l", {1, hidden}, 0.0);
  const std::string out = head == LabelMode::classification ? "smax" : "reg";
  p.W_out = store.add(prefix + "W_" + out, {hidden, outputs}, bh);
  p.b_out = store.add(prefix + "b_" + out, {1, outputs}, 0.0);
  return p;
}

Tensor attention_weights(const Tensor& h, const Tensor& W_beta) {
  return softmax(matmul(matmul(h, W_beta), transpose(h)));
}

Tensor attend_pool(const Tensor& h, const Tensor& W_beta) { return matmul(attention_weights(h, W_beta), h); }

Tensor attend_pool(const Tensor& g, const Tensor& h2, const Tensor& W_beta) {
  if (g.rows() != h2.rows()) {
    throw Error("attend_pool: " + std::to_string(g.rows()) + " sequential rows vs " +
                std::to_string(h2.rows()) + " speaker rows");
  }
  return attend_pool(concat({g, h2}, 1), W_beta);
}

Tensor output_layer(const Tensor& pooled, const ClassifierParams& params) {
  const Tensor hidden = relu(add(matmul(pooled, params.W_l), params.b_l));
  return add(matmul(hidden, params.W_out), params.b_out);
}

std::size_t argmax(std::span<const double> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

Classification classify(const Tensor& pooled, const ClassifierParams& params) {
  if (params.head != LabelMode::classification) throw Error("classify: model has a regression head");
  Classification out;
  out.probs = softmax(output_layer(pooled, params));
  const std::size_t c = out.probs.cols();
  for (std::size_t i = 0; i < out.probs.rows(); ++i) {
    out.predicted.push_back(argmax(out.probs.data().subspan(i * c, c)));
  }
  return out;
}

Tensor regress(const Tensor& pooled, const ClassifierParams& params) {
  if (params.head != LabelMode::regression) throw Error("regress: model has a classification head");
  return output_layer(pooled, params);
}

}  // namespace dgcn
