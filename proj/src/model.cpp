// SPDX-License-Identifier: Apache-2.0
#include "dgcn/model.hpp"

#include <cmath>
#include <fstream>

namespace dgcn {

namespace {

constexpr const char* kCheckpointFormat = "dialoguegcn-checkpoint";
constexpr int kCheckpointVersion = 1;

}  // namespace

nlohmann::json ModelConfig::to_json() const {
  return {{"mode", dgcn::to_string(mode)},
          {"outputs", outputs},
          {"input_dim", input_dim},
          {"gru_hidden", gru_hidden},
          {"rgcn_out1", rgcn.out1},
          {"rgcn_out2", rgcn.out2},
          {"learned_normalizer", rgcn.learned_normalizer},
          {"clf_hidden", clf_hidden},
          {"window", {window.past, window.future}},
          {"no_sequential", ablation.no_sequential},
          {"no_speaker", ablation.no_speaker},
          {"drop_speaker_rel", ablation.drop_speaker_rel},
          {"drop_temporal_rel", ablation.drop_temporal_rel},
          {"max_roles", max_roles},
          {"end_to_end", end_to_end},
          {"cnn",
           {{"filter_widths", cnn.filter_widths},
            {"maps_per_width", cnn.maps_per_width},
            {"pool_window", cnn.pool_window},
            {"out_dim", cnn.out_dim},
            {"embed_dim", cnn.embed_dim}}}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.mode = parse_label_mode(j.at("mode").get<std::string>());
  c.outputs = j.at("outputs").get<std::size_t>();
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.gru_hidden = j.at("gru_hidden").get<std::size_t>();
  c.rgcn.out1 = j.at("rgcn_out1").get<std::size_t>();
  c.rgcn.out2 = j.at("rgcn_out2").get<std::size_t>();
  c.rgcn.learned_normalizer = j.at("learned_normalizer").get<bool>();
  c.clf_hidden = j.at("clf_hidden").get<std::size_t>();
  c.window = Window{j.at("window")[0].get<std::size_t>(), j.at("window")[1].get<std::size_t>()};
  c.ablation.no_sequential = j.at("no_sequential").get<bool>();
  c.ablation.no_speaker = j.at("no_speaker").get<bool>();
  c.ablation.drop_speaker_rel = j.at("drop_speaker_rel").get<bool>();
  c.ablation.drop_temporal_rel = j.at("drop_temporal_rel").get<bool>();
  c.max_roles = j.at("max_roles").get<std::size_t>();
  c.end_to_end = j.at("end_to_end").get<bool>();
  const auto& jc = j.at("cnn");
  c.cnn.filter_widths = jc.at("filter_widths").get<std::vector<std::size_t>>();
  c.cnn.maps_per_width = jc.at("maps_per_width").get<std::size_t>();
  c.cnn.pool_window = jc.at("pool_window").get<std::size_t>();
  c.cnn.out_dim = jc.at("out_dim").get<std::size_t>();
  c.cnn.embed_dim = jc.at("embed_dim").get<std::size_t>();
  return c;
}

DialogueGcn::DialogueGcn(ModelConfig config, SpeakerRegistry registry,
                         std::shared_ptr<const EmbeddingTable> embeddings)
    : config_(std::move(config)), registry_(std::move(registry)), embeddings_(std::move(embeddings)) {
  auto& c = config_;
  if (c.end_to_end) {
    if (!embeddings_) throw Error("end-to-end training needs an embedding table");
    if (embeddings_->dim() != c.cnn.embed_dim) {
      throw Error("embedding table has dimension " + std::to_string(embeddings_->dim()) + " but the CNN expects " +
                  std::to_string(c.cnn.embed_dim));
    }
    c.input_dim = c.cnn.out_dim;
    cnn_ = CnnParams::declare(params_, c.cnn, 0);
  }
  const std::size_t seq_dim = 2 * c.gru_hidden;
  if (c.ablation.no_sequential) {
    proj_w_ = params_.add("proj.W", {c.input_dim, seq_dim}, 1.0 / std::sqrt(static_cast<double>(c.input_dim)));
    proj_b_ = params_.add("proj.b", {1, seq_dim}, 0.0);
  } else {
    gru_ = GruParams::declare(params_, c.input_dim, c.gru_hidden);
  }
  std::size_t clf_input = seq_dim;
  if (!c.ablation.no_speaker) {
    W_e_ = params_.add("edge.W_e", {seq_dim, seq_dim}, 1.0 / std::sqrt(static_cast<double>(seq_dim)));
    rgcn_ = RgcnParams::declare(params_, seq_dim, relation_scheme().count(), c.rgcn);
    clf_input += c.rgcn.out2;
  }
  clf_ = ClassifierParams::declare(params_, clf_input, c.clf_hidden, c.outputs, c.mode);
}

RelationScheme DialogueGcn::relation_scheme() const {
  return RelationScheme{registry_.size(), config_.ablation.drop_speaker_rel, config_.ablation.drop_temporal_rel};
}

void DialogueGcn::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  params_.initialize(rng);
}

Tensor DialogueGcn::utterance_inputs(const Conversation& conv) const {
  if (conv.utterances.empty()) throw Error("conversation '" + conv.id + "' has no utterances");
  if (cnn_) {
    std::vector<Tensor> rows;
    for (const auto& u : conv.utterances) {
      if (!u.tokens) throw Error("end-to-end model needs tokens (conversation '" + conv.id + "')");
      rows.push_back(encode_utterance(*u.tokens, *embeddings_, *cnn_, config_.cnn));
    }
    return concat(rows, 0);
  }
  std::vector<double> data;
  data.reserve(conv.size() * config_.input_dim);
  for (std::size_t i = 0; i < conv.size(); ++i) {
    const auto& f = conv.utterances[i].features;
    if (!f) throw Error("utterance " + std::to_string(i) + " of '" + conv.id + "' has no features");
    if (f->size() != config_.input_dim) {
      throw Error("utterance " + std::to_string(i) + " of '" + conv.id + "' has " +
                  std::to_string(f->size()) + " features, model expects " + std::to_string(config_.input_dim));
    }
    data.insert(data.end(), f->begin(), f->end());
  }
  return Tensor::from({conv.size(), config_.input_dim}, std::move(data));
}

ForwardPass DialogueGcn::forward(const Conversation& conv) const {
  ForwardPass p;
  p.u = utterance_inputs(conv);
  p.g = config_.ablation.no_sequential ? add(matmul(p.u, proj_w_), proj_b_) : encode_sequence(p.u, gru_);
  Tensor h = p.g;
  if (!config_.ablation.no_speaker) {
    const auto& ab = config_.ablation;
    p.graph = build_structure(registry_.roles(conv), config_.window, RelationScheme{registry_.size()});
    if (ab.drop_speaker_rel || ab.drop_temporal_rel) {
      p.graph = collapse_relations(p.graph, ab.drop_speaker_rel, ab.drop_temporal_rel);
    }
    p.alpha = edge_attention(p.g, W_e_, p.graph);
    p.h1 = rgcn_step1(p.graph, p.alpha, p.g, rgcn_);
    p.h2 = rgcn_step2(p.graph, p.h1, rgcn_);
    h = concat({p.g, p.h2}, 1);
  }
  p.pooled = attend_pool(h, clf_.W_beta);
  p.outputs = output_layer(p.pooled, clf_);
  return p;
}

Tensor DialogueGcn::loss_sum(const Conversation& conv, const ForwardPass& pass, bool absolute_error) const {
  if (config_.mode == LabelMode::classification) {
    std::vector<std::size_t> labels;
    labels.reserve(conv.size());
    for (const auto& u : conv.utterances) {
      const auto y = std::get<std::size_t>(u.label);
      if (y >= config_.outputs) throw Error("label " + std::to_string(y) + " out of range in '" + conv.id + "'");
      labels.push_back(y);
    }
    return scale(sum(pick(log_softmax(pass.outputs), labels)), -1.0);
  }
  std::vector<double> target;
  for (const auto& u : conv.utterances) {
    const auto& y = std::get<std::vector<double>>(u.label);
    if (y.size() != config_.outputs) throw Error("regression label size mismatch in '" + conv.id + "'");
    target.insert(target.end(), y.begin(), y.end());
  }
  const Tensor diff = sub(pass.outputs, Tensor::from({conv.size(), config_.outputs}, std::move(target)));
  const double per_attr = 1.0 / static_cast<double>(config_.outputs);
  if (absolute_error) {
    const auto abs_diff = map_unary(
        diff, [](double x) { return std::abs(x); },
        [](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }, "abs");
    return scale(sum(abs_diff), per_attr);
  }
  return scale(sum_squares(diff), per_attr);
}

void DialogueGcn::save(const std::filesystem::path& path) const {
  nlohmann::json tensors = nlohmann::json::object();
  for (const auto& name : params_.names()) {
    const auto& t = params_.get(name);
    tensors[name] = {{"shape", t.shape()}, {"data", std::vector<double>(t.data().begin(), t.data().end())}};
  }
  nlohmann::json j{{"format", kCheckpointFormat},
                   {"version", kCheckpointVersion},
                   {"config", config_.to_json()},
                   {"registry", registry_.to_json()},
                   {"tensors", std::move(tensors)}};
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out << j.dump() << '\n';
}

DialogueGcn DialogueGcn::load(const std::filesystem::path& path,
                              std::shared_ptr<const EmbeddingTable> embeddings) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    throw Error("checkpoint " + path.string() + ": " + e.what());
  }
  if (j.value("format", std::string()) != kCheckpointFormat || j.value("version", 0) != kCheckpointVersion) {
    throw Error(path.string() + " is not a version " + std::to_string(kCheckpointVersion) + " checkpoint");
  }
  DialogueGcn model(ModelConfig::from_json(j.at("config")), SpeakerRegistry::from_json(j.at("registry")),
                    std::move(embeddings));
  const auto& tensors = j.at("tensors");
  for (const auto& name : model.params_.names()) {
    if (!tensors.contains(name)) throw Error("checkpoint is missing tensor '" + name + "'");
    const auto shape = tensors[name].at("shape").get<Shape>();
    auto values = tensors[name].at("data").get<std::vector<double>>();
    Tensor t = model.params_.get(name);
    if (shape != t.shape()) {
      throw Error("checkpoint tensor '" + name + "' has shape " + shape_str(shape) + ", expected " +
                  shape_str(t.shape()));
    }
    if (values.size() != t.size()) {
      throw Error("checkpoint tensor '" + name + "' holds " + std::to_string(values.size()) + " values, expected " +
                  std::to_string(t.size()));
    }
    std::copy(values.begin(), values.end(), t.mutable_data().begin());
  }
  return model;
}

}  // namespace dgcn
