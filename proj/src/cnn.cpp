// SPDX-License-Identifier: Apache-2.0
#include "dgcn/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "json.hpp"

namespace dgcn {

std::size_t CnnConfig::max_width() const {
  return filter_widths.empty() ? 0 : *std::max_element(filter_widths.begin(), filter_widths.end());
}

void CnnConfig::validate() const {
  if (filter_widths.empty()) throw Error("cnn: at least one filter width is required");
  for (auto w : filter_widths) {
    if (w == 0) throw Error("cnn: filter widths must be positive");
  }
  if (maps_per_width == 0 || pool_window == 0 || out_dim == 0 || embed_dim == 0) {
    throw Error("cnn: all sizes must be positive");
  }
}

CnnParams CnnParams::declare(ParamStore& store, const CnnConfig& config, std::size_t head_classes,
                             const std::string& prefix) {
  config.validate();
  CnnParams p;
  for (auto w : config.filter_widths) {
    const auto fan_in = w * config.embed_dim;
    const std::string base = prefix + "conv" + std::to_string(w);
    p.kernels.push_back(store.add(base + ".W", {fan_in, config.maps_per_width},
                                  1.0 / std::sqrt(static_cast<double>(fan_in))));
    p.biases.push_back(store.add(base + ".b", {1, config.maps_per_width}, 0.0));
  }
  const auto pooled = config.filter_widths.size() * config.maps_per_width;
  p.fc_w = store.add(prefix + "fc.W", {pooled, config.out_dim}, 1.0 / std::sqrt(static_cast<double>(pooled)));
  p.fc_b = store.add(prefix + "fc.b", {1, config.out_dim}, 0.0);
  if (head_classes > 0) {
    p.head_w = store.add(prefix + "head.W", {config.out_dim, head_classes},
                         1.0 / std::sqrt(static_cast<double>(config.out_dim)));
    p.head_b = store.add(prefix + "head.b", {1, head_classes}, 0.0);
  }
  return p;
}

std::vector<std::size_t> token_indices(const std::vector<std::string>& tokens,
                                       const EmbeddingTable& table, const CnnConfig& config) {
  std::size_t end = tokens.size();
  while (end > 0 && tokens[end - 1] == EmbeddingTable::kPadToken) --end;
  std::vector<std::size_t> idx;
  idx.reserve(std::max(end, config.max_width()));
  for (std::size_t i = 0; i < end; ++i) idx.push_back(table.index_of(tokens[i]));
  while (idx.size() < config.max_width()) idx.push_back(table.pad_index());
  return idx;
}

Tensor cnn_pooled(const std::vector<std::string>& tokens, const EmbeddingTable& table,
                  const CnnParams& params, const CnnConfig& config) {
  if (table.dim() != config.embed_dim) {
    throw Error("cnn: embedding dimension " + std::to_string(table.dim()) + " does not match config " +
                std::to_string(config.embed_dim));
  }
  const auto idx = token_indices(tokens, table, config);
  const Tensor embedded = select_rows(table.matrix(), idx);  // [T, E]
  const std::size_t len = idx.size();
  std::vector<Tensor> per_width;
  for (std::size_t k = 0; k < config.filter_widths.size(); ++k) {
    const std::size_t w = config.filter_widths[k];
    const std::size_t positions = len - w + 1;
    std::vector<Tensor> shifted;
    shifted.reserve(w);
    for (std::size_t s = 0; s < w; ++s) shifted.push_back(slice_rows(embedded, s, positions));
    const Tensor windows = concat(shifted, 1);  // [positions, w*E]
    const Tensor conv = add(matmul(windows, params.kernels[k]), params.biases[k]);
    const Tensor pooled = relu(max_pool_rows(conv, config.pool_window, config.pool_window));
    per_width.push_back(max_pool_rows(pooled, pooled.rows(), pooled.rows()));
  }
  return concat(per_width, 1);
}

Tensor encode_utterance(const std::vector<std::string>& tokens, const EmbeddingTable& table,
                        const CnnParams& params, const CnnConfig& config) {
  return add(matmul(cnn_pooled(tokens, table, params, config), params.fc_w), params.fc_b);
}

namespace {

std::vector<std::pair<const std::vector<std::string>*, std::size_t>> utterance_pool(
    const std::vector<Conversation>& convs) {
  std::vector<std::pair<const std::vector<std::string>*, std::size_t>> out;
  for (const auto& c : convs) {
    for (const auto& u : c.utterances) {
      if (!u.tokens) throw Error("cnn: utterance in '" + c.id + "' has no tokens");
      out.emplace_back(&*u.tokens, std::get<std::size_t>(u.label));
    }
  }
  return out;
}

}  // namespace

double pretrain_cnn(const std::vector<Conversation>& train, LabelMode mode,
                    std::size_t num_classes, const EmbeddingTable& table, ParamStore& store,
                    const CnnParams& params, const CnnConfig& config,
                    const PretrainOptions& options) {
  if (mode != LabelMode::classification) {
    throw Error("cnn pretraining needs categorical labels; regression data trains the encoder end to end");
  }
  if (!params.head_w.defined() || params.head_w.cols() != num_classes) {
    throw Error("cnn pretraining needs a softmax head with " + std::to_string(num_classes) + " classes");
  }
  const auto pool = utterance_pool(train);
  if (pool.empty()) throw Error("cnn pretraining: no utterances");
  std::mt19937_64 rng(options.seed);
  Adam adam(AdamConfig{.lr = options.lr});
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch = std::max<std::size_t>(1, options.batch_utterances);

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      store.zero_grad();
      std::vector<Tensor> feats;
      std::vector<std::size_t> labels;
      for (std::size_t k = start; k < end; ++k) {
        const auto& [toks, label] = pool[order[k]];
        feats.push_back(encode_utterance(*toks, table, params, config));
        labels.push_back(label);
      }
      const Tensor logits = add(matmul(concat(feats, 0), params.head_w), params.head_b);
      const Tensor loss = scale(sum(pick(log_softmax(logits), labels)),
                                -1.0 / static_cast<double>(labels.size()));
      backward(loss);
      adam.step(store);
    }
  }

  NoGradGuard no_grad;
  std::size_t correct = 0;
  for (const auto& [toks, label] : pool) {
    const Tensor logits = add(matmul(encode_utterance(*toks, table, params, config), params.head_w),
                              params.head_b);
    const auto d = logits.data();
    const auto pred = static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
    correct += pred == label;
  }
  return static_cast<double>(correct) / static_cast<double>(pool.size());
}

void attach_cnn_features(std::vector<Conversation>& convs, const EmbeddingTable& table,
                         const CnnParams& params, const CnnConfig& config) {
  NoGradGuard no_grad;
  for (auto& c : convs) {
    for (auto& u : c.utterances) {
      if (!u.tokens) continue;
      const auto f = encode_utterance(*u.tokens, table, params, config);
      u.features = std::vector<double>(f.data().begin(), f.data().end());
    }
  }
}

void save_feature_cache(const std::filesystem::path& path, const std::vector<Conversation>& convs) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& c : convs) {
    for (std::size_t i = 0; i < c.utterances.size(); ++i) {
      const auto& f = c.utterances[i].features;
      if (!f) throw Error("feature cache: utterance " + std::to_string(i) + " of '" + c.id + "' has no features");
      nlohmann::json j{{"id", c.id}, {"utterance_index", i}, {"features", *f}};
      out << j.dump() << '\n';
    }
  }
}

void load_feature_cache(const std::filesystem::path& path, std::vector<Conversation>& convs) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::map<std::pair<std::string, std::size_t>, std::vector<double>> cache;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      cache[{j.at("id").get<std::string>(), j.at("utterance_index").get<std::size_t>()}] =
          j.at("features").get<std::vector<double>>();
    } catch (const std::exception& e) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  for (auto& c : convs) {
    for (std::size_t i = 0; i < c.utterances.size(); ++i) {
      auto it = cache.find({c.id, i});
      if (it == cache.end()) {
        throw Error("feature cache has no entry for utterance " + std::to_string(i) + " of '" + c.id + "'");
      }
      c.utterances[i].features = it->second;
    }
  }
}

}  // namespace dgcn
