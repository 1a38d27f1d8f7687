// SPDX-License-Identifier: Apache-2.0
#include "dgcn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include "dgcn/classifier.hpp"

namespace dgcn {

namespace {

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

void require_finite_params(const ParamStore& params) {
  for (const auto& name : params.names()) {
    for (double v : params.get(name).data()) {
      if (!std::isfinite(v)) throw Error("non-finite value in parameter '" + name + "'");
    }
  }
}

bool all_have_features(const DatasetSplit& split) {
  for (const auto* part : {&split.train, &split.val, &split.test}) {
    for (const auto& c : *part) {
      for (const auto& u : c.utterances) {
        if (!u.features) return false;
      }
    }
  }
  return true;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(adam.lr > 0.0)) throw Error("learning rate must be positive");
  if (!(l2 >= 0.0)) throw Error("l2 weight must be non-negative");
  if (batch == 0) throw Error("batch must hold at least one dialogue");
  if (model.gru_hidden == 0) throw Error("gru_hidden must be positive");
}

Tensor compute_loss(const std::vector<const Conversation*>& batch, const DialogueGcn& model, double l2,
                    bool absolute_error) {
  if (batch.empty()) throw Error("compute_loss: empty batch");
  require_finite_params(model.params());
  std::size_t utterances = 0;
  Tensor total;
  for (const auto* conv : batch) {
    const Tensor s = model.loss_sum(*conv, model.forward(*conv), absolute_error);
    total = total.defined() ? add(total, s) : s;
    utterances += conv->size();
  }
  Tensor loss = scale(total, 1.0 / static_cast<double>(utterances));
  if (l2 > 0.0) loss = add(loss, scale(model.params().squared_norm(), l2));
  if (!std::isfinite(loss.item())) throw Error("non-finite value in tensor 'loss'");
  return loss;
}

Tensor compute_loss(const std::vector<Conversation>& batch, const DialogueGcn& model, double l2,
                    bool absolute_error) {
  std::vector<const Conversation*> ptrs;
  for (const auto& c : batch) ptrs.push_back(&c);
  return compute_loss(ptrs, model, l2, absolute_error);
}

void adam_step(const Tensor& loss, DialogueGcn& model, Adam& optimizer) {
  model.params().zero_grad();
  backward(loss);
  optimizer.step(model.params());
}

// ---------------------------------------------------------------------------

std::string metrics_csv_header() { return "epoch,split,loss,acc,wf1,mae"; }

std::string to_csv(const EpochRecord& r) {
  std::ostringstream os;
  os << r.epoch << ',' << r.split << ',' << std::setprecision(10) << r.loss << ',' << r.acc << ',' << r.wf1
     << ',' << r.mae;
  return os.str();
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& log) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << metrics_csv_header() << '\n';
  for (const auto& r : log) out << to_csv(r) << '\n';
}

Evaluation evaluate(const DialogueGcn& model, const std::vector<Conversation>& convs, bool absolute_error) {
  if (convs.empty()) throw Error("evaluate: no conversations");
  NoGradGuard no_grad;
  Evaluation ev;
  const bool classification = model.config().mode == LabelMode::classification;
  std::vector<std::size_t> preds, golds;
  std::vector<std::vector<double>> values, targets;
  double loss = 0.0;
  std::size_t utterances = 0;
  for (const auto& conv : convs) {
    const auto pass = model.forward(conv);
    loss += model.loss_sum(conv, pass, absolute_error).item();
    utterances += conv.size();
    const Tensor out = classification ? softmax(pass.outputs) : pass.outputs;
    const std::size_t k = out.cols();
    for (std::size_t i = 0; i < conv.size(); ++i) {
      Prediction p;
      p.id = conv.id;
      p.utterance_index = i;
      const auto row = out.data().subspan(i * k, k);
      if (classification) {
        p.probs.assign(row.begin(), row.end());
        p.label = argmax(row);
        p.gold = std::get<std::size_t>(conv.utterances[i].label);
        preds.push_back(p.label);
        golds.push_back(p.gold);
      } else {
        p.values.assign(row.begin(), row.end());
        p.targets = std::get<std::vector<double>>(conv.utterances[i].label);
        values.push_back(p.values);
        targets.push_back(p.targets);
      }
      ev.predictions.push_back(std::move(p));
    }
  }
  ev.loss = loss / static_cast<double>(utterances);
  if (classification) {
    ev.report = score_classification(preds, golds, model.config().outputs);
  } else {
    ev.report.mae = score_regression(values, targets);
  }
  return ev;
}

void write_predictions(const std::filesystem::path& path, const std::vector<Prediction>& preds) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& p : preds) {
    nlohmann::json j{{"id", p.id}, {"utterance_index", p.utterance_index}};
    if (p.probs.empty()) {
      j["pred"] = p.values;
      j["gold"] = p.targets;
    } else {
      j["pred"] = p.label;
      j["gold"] = p.gold;
      j["probs"] = p.probs;
    }
    out << j.dump() << '\n';
  }
}

double selection_score(const MetricsReport& report) {
  return report.mae.empty() ? report.weighted_f1 : -report.mean_mae();
}

// ---------------------------------------------------------------------------

std::optional<double> prepare_dataset(Dataset& dataset, TrainConfig& config,
                                      const std::shared_ptr<const EmbeddingTable>& embeddings) {
  auto& split = dataset.split;
  if (split.train.empty()) throw Error("dataset has no training conversations");
  split.validate();
  auto& m = config.model;
  m.mode = dataset.mode;
  m.outputs = dataset.num_outputs();
  if (m.outputs == 0) throw Error("dataset declares no classes or attributes");

  const bool has_features = all_have_features(split);
  if (dataset.mode == LabelMode::regression && !has_features) m.end_to_end = true;
  if (m.end_to_end) {
    if (!embeddings) throw Error("token input needs --embeddings");
    m.cnn.embed_dim = embeddings->dim();
    m.input_dim = m.cnn.out_dim;
    return std::nullopt;
  }
  if (has_features) {
    m.input_dim = split.train.front().utterances.front().features->size();
    return std::nullopt;
  }
  if (!embeddings) throw Error("utterances have no features; supply --embeddings to pretrain the CNN encoder");
  m.cnn.embed_dim = embeddings->dim();
  m.cnn.validate();
  ParamStore store;
  const auto cnn = CnnParams::declare(store, m.cnn, m.outputs);
  std::mt19937_64 rng(config.pretrain.seed);
  store.initialize(rng);
  const double acc =
      pretrain_cnn(split.train, dataset.mode, m.outputs, *embeddings, store, cnn, m.cnn, config.pretrain);
  for (auto* part : {&split.train, &split.val, &split.test}) attach_cnn_features(*part, *embeddings, cnn, m.cnn);
  m.input_dim = m.cnn.out_dim;
  return acc;
}

TrainResult train(Dataset& dataset, TrainConfig config, const std::shared_ptr<const EmbeddingTable>& embeddings,
                  std::ostream* progress) {
  prepare_dataset(dataset, config, embeddings);
  config.validate();
  const auto& split = dataset.split;
  auto registry = SpeakerRegistry::build({&split.train, &split.val, &split.test}, config.model.max_roles);

  TrainResult result;
  result.config = config;
  result.model = std::make_shared<DialogueGcn>(config.model, std::move(registry),
                                               config.model.end_to_end ? embeddings : nullptr);
  auto& model = *result.model;
  std::mt19937_64 rng(config.seed);
  model.initialize(rng);
  Adam optimizer(config.adam);

  const bool has_val = !split.val.empty();
  ParamStore best = model.params().clone();
  double best_score = -std::numeric_limits<double>::infinity();

  auto record = [&](std::size_t epoch) {
    for (const auto* part : {&split.train, &split.val}) {
      if (part->empty()) continue;
      const auto ev = evaluate(model, *part, config.absolute_error);
      EpochRecord r{epoch, part == &split.train ? "train" : "val", ev.loss, ev.report.accuracy,
                    ev.report.weighted_f1, ev.report.mean_mae()};
      result.log.push_back(r);
      if (progress) *progress << to_csv(r) << '\n';
      if (part == &split.val && selection_score(ev.report) > best_score) {
        best_score = selection_score(ev.report);
        best = model.params().clone();
        result.best_epoch = epoch;
      }
    }
  };

  record(0);
  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      std::vector<const Conversation*> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + config.batch); ++k) {
        batch.push_back(&split.train[order[k]]);
      }
      try {
        adam_step(compute_loss(batch, model, config.l2, config.absolute_error), model, optimizer);
      } catch (const Error& e) {
        active_tape().clear();
        if (has_val) model.params().assign(best);
        throw Error("training diverged in epoch " + std::to_string(epoch) + ": " + e.what() +
                    (has_val ? "; restored the best checkpoint from epoch " + std::to_string(result.best_epoch)
                             : std::string()));
      }
    }
    record(epoch);
  }
  if (has_val) {
    model.params().assign(best);
  } else {
    result.best_epoch = config.epochs;
  }
  return result;
}

// ---------------------------------------------------------------------------

void apply_setting(TrainConfig& config, const std::string& field, const std::string& value) {
  try {
    if (field == "lr") {
      config.adam.lr = std::stod(value);
    } else if (field == "l2") {
      config.l2 = std::stod(value);
    } else if (field == "window") {
      config.model.window = parse_window(value);
    } else if (field == "epochs") {
      config.epochs = std::stoul(value);
    } else if (field == "batch") {
      config.batch = std::stoul(value);
    } else if (field == "gru_hidden") {
      config.model.gru_hidden = std::stoul(value);
    } else if (field == "seed") {
      config.seed = std::stoull(value);
    } else {
      throw Error("unknown grid field '" + field + "'");
    }
  } catch (const std::logic_error&) {
    throw Error("bad value '" + value + "' for grid field '" + field + "'");
  }
}

std::string GridResult::to_text() const {
  std::ostringstream os;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    os << (k == best_index ? "* " : "  ");
    for (const auto& [f, v] : rows[k].point) os << f << '=' << v << "  ";
    os << "val=" << fmt(rows[k].val_score, 4) << "  test=" << fmt(rows[k].test_score, 4) << '\n';
  }
  return os.str();
}

std::string GridResult::to_csv() const {
  std::ostringstream os;
  if (rows.empty()) return os.str();
  for (const auto& [f, _] : rows.front().point) os << f << ',';
  os << "val_score,test_score,selected\n";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (const auto& [_, v] : rows[k].point) os << '"' << v << "\",";
    os << fmt(rows[k].val_score, 10) << ',' << fmt(rows[k].test_score, 10) << ',' << (k == best_index) << '\n';
  }
  return os.str();
}

GridResult grid_search(const Dataset& dataset, const TrainConfig& base, const Grid& grid,
                       const std::shared_ptr<const EmbeddingTable>& embeddings, std::ostream* progress) {
  if (grid.empty()) throw Error("grid search: empty grid");
  for (const auto& [field, values] : grid) {
    if (values.empty()) throw Error("grid search: no values for '" + field + "'");
    TrainConfig probe = base;
    for (const auto& v : values) apply_setting(probe, field, v);
  }
  Dataset prepared = dataset;
  TrainConfig resolved = base;
  prepare_dataset(prepared, resolved, embeddings);

  std::vector<std::pair<std::string, const std::vector<std::string>*>> axes;
  for (const auto& [field, values] : grid) axes.emplace_back(field, &values);
  std::vector<std::size_t> idx(axes.size(), 0);

  GridResult out;
  double best = -std::numeric_limits<double>::infinity();
  while (true) {
    GridRow row;
    TrainConfig cfg = resolved;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const auto& v = (*axes[a].second)[idx[a]];
      row.point[axes[a].first] = v;
      apply_setting(cfg, axes[a].first, v);
    }
    Dataset ds = prepared;
    auto res = train(ds, cfg, embeddings);
    const auto& sel = ds.split.val.empty() ? ds.split.train : ds.split.val;
    row.val_score = selection_score(evaluate(*res.model, sel, cfg.absolute_error).report);
    row.test_score = ds.split.test.empty()
                         ? std::nan("")
                         : selection_score(evaluate(*res.model, ds.split.test, cfg.absolute_error).report);
    if (progress) {
      for (const auto& [f, v] : row.point) *progress << f << '=' << v << ' ';
      *progress << "val=" << fmt(row.val_score, 4) << '\n';
    }
    if (row.val_score > best) {
      best = row.val_score;
      out.best = res.config;
      out.best_index = out.rows.size();
    }
    out.rows.push_back(std::move(row));

    std::size_t a = axes.size();
    while (a > 0) {
      --a;
      if (++idx[a] < axes[a].second->size()) break;
      idx[a] = 0;
      if (a == 0) return out;
    }
    if (axes.empty()) return out;
  }
}

// ---------------------------------------------------------------------------

std::string AblationTable::to_text() const {
  std::ostringstream os;
  auto block = [&](const char* title, const std::vector<AblationRow>& rows) {
    os << title << '\n' << std::left << std::setw(28) << "configuration" << std::setw(10) << "F1"
       << "accuracy\n";
    for (const auto& r : rows) {
      os << std::setw(28) << r.name << std::setw(10) << fmt(100.0 * r.f1, 4) << fmt(100.0 * r.acc, 4) << '\n';
    }
  };
  block("Contextual encoders", encoders);
  os << '\n';
  block("Edge relations", relations);
  return os.str();
}

std::string AblationTable::to_csv() const {
  std::ostringstream os;
  os << "table,configuration,f1,acc\n";
  for (const auto& r : encoders) os << "encoders," << r.name << ',' << fmt(r.f1, 10) << ',' << fmt(r.acc, 10) << '\n';
  for (const auto& r : relations) os << "relations," << r.name << ',' << fmt(r.f1, 10) << ',' << fmt(r.acc, 10) << '\n';
  return os.str();
}

AblationTable run_ablation_suite(const Dataset& dataset, const TrainConfig& base,
                                 const std::vector<std::uint64_t>& seeds,
                                 const std::shared_ptr<const EmbeddingTable>& embeddings, std::ostream* progress) {
  if (seeds.empty()) throw Error("ablation suite: no seeds");
  Dataset prepared = dataset;
  TrainConfig resolved = base;
  prepare_dataset(prepared, resolved, embeddings);
  const auto& scored = prepared.split.test.empty() ? prepared.split.val : prepared.split.test;
  if (scored.empty()) throw Error("ablation suite: dataset has no test or validation conversations");

  std::vector<std::pair<Ablation, AblationRow>> cache;
  auto run = [&](const std::string& name, Ablation ab) {
    for (const auto& [k, row] : cache) {
      if (k == ab) {
        auto copy = row;
        copy.name = name;
        return copy;
      }
    }
    AblationRow row{name, ab, 0.0, 0.0};
    for (auto seed : seeds) {
      TrainConfig cfg = resolved;
      cfg.model.ablation = ab;
      cfg.seed = seed;
      Dataset ds = prepared;
      auto res = train(ds, cfg, embeddings);
      const auto ev = evaluate(*res.model, scored, cfg.absolute_error);
      row.f1 += selection_score(ev.report);
      row.acc += ev.report.accuracy;
      if (progress) *progress << name << " seed " << seed << ": " << fmt(selection_score(ev.report), 4) << '\n';
    }
    row.f1 /= static_cast<double>(seeds.size());
    row.acc /= static_cast<double>(seeds.size());
    cache.emplace_back(ab, row);
    return row;
  };

  AblationTable t;
  t.encoders.push_back(run("sequential+speaker", {}));
  t.encoders.push_back(run("sequential only", {.no_speaker = true}));
  t.encoders.push_back(run("speaker only", {.no_sequential = true}));
  t.encoders.push_back(run("neither", {.no_sequential = true, .no_speaker = true}));
  t.relations.push_back(run("all relations", {}));
  t.relations.push_back(run("no temporal", {.drop_temporal_rel = true}));
  t.relations.push_back(run("no speaker", {.drop_speaker_rel = true}));
  t.relations.push_back(run("single relation", {.drop_speaker_rel = true, .drop_temporal_rel = true}));
  return t;
}

}  // namespace dgcn
