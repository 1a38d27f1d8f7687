// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "dgcn/classifier.hpp"
#include "dgcn/cnn.hpp"
#include "dgcn/graph.hpp"
#include "dgcn/gru.hpp"
#include "dgcn/rgcn.hpp"
#include "json.hpp"

namespace dgcn {

struct Ablation {
  /// Replace the GRU with a learned linear projection of u_i.
  bool no_sequential = false;
  /// Skip the graph; the classifier sees h_i = g_i.
  bool no_speaker = false;
  bool drop_speaker_rel = false;
  bool drop_temporal_rel = false;

  bool operator==(const Ablation&) const = default;
};

struct ModelConfig {
  LabelMode mode = LabelMode::classification;
  std::size_t outputs = 6;     // classes or regression attributes
  std::size_t input_dim = 100; // D_m
  std::size_t gru_hidden = 100;
  RgcnConfig rgcn;
  std::size_t clf_hidden = 100;
  Window window;
  Ablation ablation;
  std::size_t max_roles = 8;
  /// Encode tokens with a CNN that trains jointly with the rest.
  bool end_to_end = false;
  CnnConfig cnn;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

/// Intermediate values of one forward pass over a conversation.
struct ForwardPass {
  DialogueGraph graph;  // structure only; weights live in `alpha`
  Tensor u;       // [n, D_m]
  Tensor g;       // [n, 2H]
  Tensor alpha;   // [n, n], undefined when the graph is skipped
  Tensor h1, h2;  // undefined when the graph is skipped
  Tensor pooled;  // h~, [n, dim]
  Tensor outputs; // logits or regression values
};

class DialogueGcn {
 public:
  DialogueGcn(ModelConfig config, SpeakerRegistry registry,
              std::shared_ptr<const EmbeddingTable> embeddings = nullptr);

  const ModelConfig& config() const { return config_; }
  const SpeakerRegistry& registry() const { return registry_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  RelationScheme relation_scheme() const;
  const std::shared_ptr<const EmbeddingTable>& embeddings() const { return embeddings_; }

  void initialize(std::uint64_t seed);
  void initialize(std::mt19937_64& rng) { params_.initialize(rng); }

  /// Utterance vectors u_i, from precomputed features or the joint CNN.
  Tensor utterance_inputs(const Conversation& conv) const;
  ForwardPass forward(const Conversation& conv) const;

  /// Sum over utterances of the per-utterance loss: negative log-likelihood,
  /// or mean squared / absolute error across attributes.
  Tensor loss_sum(const Conversation& conv, const ForwardPass& pass, bool absolute_error = false) const;

  void save(const std::filesystem::path& path) const;
  static DialogueGcn load(const std::filesystem::path& path,
                          std::shared_ptr<const EmbeddingTable> embeddings = nullptr);

  // Submodules, for tests and diagnostics.
  const std::optional<CnnParams>& cnn() const { return cnn_; }
  const GruParams& gru() const { return gru_; }
  const Tensor& edge_weights() const { return W_e_; }
  const RgcnParams& rgcn() const { return rgcn_; }
  const ClassifierParams& classifier() const { return clf_; }
  const Tensor& projection() const { return proj_w_; }

 private:
  ModelConfig config_;
  SpeakerRegistry registry_;
  std::shared_ptr<const EmbeddingTable> embeddings_;
  ParamStore params_;
  std::optional<CnnParams> cnn_;
  GruParams gru_;
  Tensor proj_w_, proj_b_;
  Tensor W_e_;
  RgcnParams rgcn_;
  ClassifierParams clf_;
};

}  // namespace dgcn
