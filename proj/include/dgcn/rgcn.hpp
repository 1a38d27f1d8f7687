// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "dgcn/graph.hpp"
#include "dgcn/params.hpp"

namespace dgcn {

struct RgcnConfig {
  std::size_t out1 = 100;
  std::size_t out2 = 100;
  /// Learn a per-relation factor on top of the fixed 1/|N_i^r| normaliser.
  bool learned_normalizer = false;
};

/// Row-vector convention: every matrix maps [1, in] rows to [1, out].
struct RgcnParams {
  std::vector<Tensor> W_rel;  // one [in, out1] per relation id
  Tensor W_self1;             // [in, out1]
  Tensor W_nbr2;              // [out1, out2]
  Tensor W_self2;             // [out1, out2]
  std::vector<Tensor> norm_shift;  // learned normaliser offsets, [1] each

  static RgcnParams declare(ParamStore& store, std::size_t input, std::size_t num_relations,
                            const RgcnConfig& config, const std::string& prefix = "rgcn.");
};

/// h1_i = ReLU( sum_r sum_{j in N_i^r, j != i} alpha_ij / |N_i^r| * g_j W_r
///              + alpha_ii * g_i W_self1 )
/// `alpha` is the [n, n] edge-weight matrix (see edge_attention).
Tensor rgcn_step1(const DialogueGraph& graph, const Tensor& alpha, const Tensor& g,
                  const RgcnParams& params);
/// Variant reading alpha from the graph's stored edge weights.
Tensor rgcn_step1(const DialogueGraph& graph, const Tensor& g, const RgcnParams& params);

/// h2_i = ReLU( sum_{j in N_i, j != i} h1_j W_nbr2 + h1_i W_self2 ), N_i being
/// the union of i's neighbours over all relations; no edge weights.
Tensor rgcn_step2(const DialogueGraph& graph, const Tensor& h1, const RgcnParams& params);

/// [n, n] constant with 1/|N_i^r| at every non-self edge (i, j) of relation r.
Tensor relation_coefficients(const DialogueGraph& graph, std::size_t relation);

}  // namespace dgcn
