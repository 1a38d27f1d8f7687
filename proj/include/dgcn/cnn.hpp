// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "dgcn/data.hpp"
#include "dgcn/params.hpp"

namespace dgcn {

struct CnnConfig {
  std::vector<std::size_t> filter_widths{3, 4, 5};
  std::size_t maps_per_width = 50;
  std::size_t pool_window = 2;
  std::size_t out_dim = 100;
  std::size_t embed_dim = 300;

  std::size_t max_width() const;
  void validate() const;
};

/// Convolution kernels are stored as [width * embed_dim, maps] so that an
/// unfolded window row times the kernel gives one output position.
struct CnnParams {
  std::vector<Tensor> kernels;
  std::vector<Tensor> biases;
  Tensor fc_w, fc_b;
  Tensor head_w, head_b;  // only for utterance-level pretraining

  /// Registers everything under `prefix` ("cnn." by default). The softmax
  /// head is only registered when head_classes > 0.
  static CnnParams declare(ParamStore& store, const CnnConfig& config, std::size_t head_classes,
                           const std::string& prefix = "cnn.");
};

/// Embedding row indices for a token list: trailing pad tokens are dropped,
/// then the list is padded up to the widest filter.
std::vector<std::size_t> token_indices(const std::vector<std::string>& tokens,
                                       const EmbeddingTable& table, const CnnConfig& config);

/// Concatenated per-map maxima before the fully connected layer,
/// shape [1, widths * maps].
Tensor cnn_pooled(const std::vector<std::string>& tokens, const EmbeddingTable& table,
                  const CnnParams& params, const CnnConfig& config);

/// Utterance feature vector, shape [1, out_dim]: embed, convolve per width,
/// max-pool (window pool_window, stride pool_window), ReLU, max over the
/// remaining positions, concatenate, fully connected.
Tensor encode_utterance(const std::vector<std::string>& tokens, const EmbeddingTable& table,
                        const CnnParams& params, const CnnConfig& config);

struct PretrainOptions {
  std::size_t epochs = 10;
  double lr = 1e-3;
  std::size_t batch_utterances = 32;
  std::uint64_t seed = 1;
};

/// Fits the CNN plus its softmax head on per-utterance labels with Adam.
/// Returns training accuracy after the last epoch.
double pretrain_cnn(const std::vector<Conversation>& train, LabelMode mode,
                    std::size_t num_classes, const EmbeddingTable& table, ParamStore& store,
                    const CnnParams& params, const CnnConfig& config,
                    const PretrainOptions& options);

/// Runs the frozen encoder over every tokenised utterance and stores the
/// result in Utterance::features.
void attach_cnn_features(std::vector<Conversation>& convs, const EmbeddingTable& table,
                         const CnnParams& params, const CnnConfig& config);

/// Feature cache: JSONL of {"id", "utterance_index", "features"}; doubles are
/// written with round-trip precision.
void save_feature_cache(const std::filesystem::path& path, const std::vector<Conversation>& convs);
/// Fills Utterance::features from a cache; every utterance must be covered.
void load_feature_cache(const std::filesystem::path& path, std::vector<Conversation>& convs);

}  // namespace dgcn
