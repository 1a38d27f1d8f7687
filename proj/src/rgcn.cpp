// SPDX-License-Identifier: Apache-2.0
#include "dgcn/rgcn.hpp"

#include <cmath>
#include <map>
#include <set>

namespace dgcn {

RgcnParams RgcnParams::declare(ParamStore& store, std::size_t input, std::size_t num_relations,
                               const RgcnConfig& config, const std::string& prefix) {
  if (input == 0 || num_relations == 0 || config.out1 == 0 || config.out2 == 0) {
    throw Error("rgcn: sizes must be positive");
  }
  const double b1 = 1.0 / std::sqrt(static_cast<double>(input));
  const double b2 = 1.0 / std::sqrt(static_cast<double>(config.out1));
  RgcnParams p;
  for (std::size_t r = 0; r < num_relations; ++r) {
    p.W_rel.push_back(store.add(prefix + "W_rel." + std::to_string(r), {input, config.out1}, b1));
    if (config.learned_normalizer) {
      p.norm_shift.push_back(store.add(prefix + "norm." + std::to_string(r), {1}, 0.0));
    }
  }
  p.W_self1 = store.add(prefix + "W_self1", {input, config.out1}, b1);
  p.W_nbr2 = store.add(prefix + "W_nbr2", {config.out1, config.out2}, b2);
  p.W_self2 = store.add(prefix + "W_self2", {config.out1, config.out2}, b2);
  return p;
}

Tensor relation_coefficients(const DialogueGraph& graph, std::size_t relation) {
  const std::size_t n = graph.n;
  std::vector<std::size_t> count(n, 0);
  for (const auto& e : graph.edges) {
    if (e.i != e.j && e.relation == relation) ++count[e.i];
  }
  auto c = Tensor::zeros({n, n});
  auto data = c.mutable_data();
  for (const auto& e : graph.edges) {
    if (e.i != e.j && e.relation == relation) data[e.i * n + e.j] = 1.0 / static_cast<double>(count[e.i]);
  }
  return c;
}

Tensor rgcn_step1(const DialogueGraph& graph, const Tensor& alpha, const Tensor& g,
                  const RgcnParams& params) {
  const std::size_t n = graph.n;
  if (g.rows() != n || alpha.rows() != n || alpha.cols() != n) {
    throw Error("rgcn_step1: graph of " + std::to_string(n) + " vertices with features " +
                shape_str(g.shape()) + " and weights " + shape_str(alpha.shape()));
  }
  std::set<std::size_t> relations;
  for (const auto& e : graph.edges) {
    if (e.i == e.j) continue;
    if (e.relation >= params.W_rel.size()) {
      throw Error("rgcn_step1: no parameters for relation id " + std::to_string(e.relation));
    }
    relations.insert(e.relation);
  }
  Tensor total = matmul(mul(alpha, Tensor::identity(n)), matmul(g, params.W_self1));
  for (auto r : relations) {
    Tensor msg = matmul(matmul(mul(alpha, relation_coefficients(graph, r)), g), params.W_rel[r]);
    if (!params.norm_shift.empty()) {
      msg = scale_by(msg, add(params.norm_shift[r], Tensor::scalar(1.0)));
    }
    total = add(total, msg);
  }
  return relu(total);
}

Tensor rgcn_step1(const DialogueGraph& graph, const Tensor& g, const RgcnParams& params) {
  auto alpha = Tensor::zeros({graph.n, graph.n});
  auto data = alpha.mutable_data();
  for (const auto& e : graph.edges) data[e.i * graph.n + e.j] = e.weight;
  return rgcn_step1(graph, alpha, g, params);
}

Tensor rgcn_step2(const DialogueGraph& graph, const Tensor& h1, const RgcnParams& params) {
  const std::size_t n = graph.n;
  if (h1.rows() != n) {
    throw Error("rgcn_step2: " + std::to_string(h1.rows()) + " rows for a graph of " +
                std::to_string(n) + " vertices");
  }
  auto adj = Tensor::zeros({n, n});
  auto data = adj.mutable_data();
  for (const auto& e : graph.edges) {
    if (e.i != e.j) data[e.i * n + e.j] = 1.0;
  }
  return relu(add(matmul(matmul(adj, h1), params.W_nbr2), matmul(h1, params.W_self2)));
}

}  // namespace dgcn
