// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dgcn/metrics.hpp"
#include "dgcn/model.hpp"
#include "dgcn/params.hpp"

namespace dgcn {

struct TrainConfig {
  ModelConfig model;
  AdamConfig adam;
  double l2 = 1e-5;
  std::size_t epochs = 50;
  std::size_t batch = 1;  // dialogues per optimiser step
  std::uint64_t seed = 1;
  /// Regression loss: mean absolute instead of mean squared error.
  bool absolute_error = false;
  PretrainOptions pretrain;

  void validate() const;
};

/// Mean per-utterance loss over every utterance of the batch plus
/// l2 * (sum of squared parameters).
Tensor compute_loss(const std::vector<const Conversation*>& batch, const DialogueGcn& model, double l2,
                    bool absolute_error = false);
Tensor compute_loss(const std::vector<Conversation>& batch, const DialogueGcn& model, double l2,
                    bool absolute_error = false);

/// Backpropagates `loss` and applies one optimiser update.
void adam_step(const Tensor& loss, DialogueGcn& model, Adam& optimizer);

struct EpochRecord {
  std::size_t epoch = 0;
  std::string split;
  double loss = 0.0;
  double acc = 0.0;
  double wf1 = 0.0;
  double mae = 0.0;
};

std::string metrics_csv_header();
std::string to_csv(const EpochRecord& r);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& log);

struct Prediction {
  std::string id;
  std::size_t utterance_index = 0;
  std::size_t label = 0;                 // classification
  std::size_t gold = 0;
  std::vector<double> probs;             // classification
  std::vector<double> values, targets;   // regression
};

struct Evaluation {
  double loss = 0.0;  // mean per-utterance loss, without the L2 term
  MetricsReport report;
  std::vector<Prediction> predictions;
};

Evaluation evaluate(const DialogueGcn& model, const std::vector<Conversation>& convs,
                    bool absolute_error = false);
void write_predictions(const std::filesystem::path& path, const std::vector<Prediction>& preds);

/// Fills in input sizes and output head from the data. Token-only data gets
/// features from a pretrained CNN unless the config asks for end-to-end
/// encoding (always the case for regression). Returns the pretraining
/// accuracy when a CNN was pretrained.
std::optional<double> prepare_dataset(Dataset& dataset, TrainConfig& config,
                                      const std::shared_ptr<const EmbeddingTable>& embeddings);

struct TrainResult {
  std::shared_ptr<DialogueGcn> model;  // best-validation parameters
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  TrainConfig config;  // as resolved by prepare_dataset
};

/// Trains from a fresh initialisation. Selection uses validation weighted F1
/// (classification) or mean MAE (regression); with no validation split the
/// last epoch is kept. Epoch 0 records the initial parameters.
TrainResult train(Dataset& dataset, TrainConfig config,
                  const std::shared_ptr<const EmbeddingTable>& embeddings = nullptr,
                  std::ostream* progress = nullptr);

/// Higher is better: weighted F1, or negated mean MAE for regression.
double selection_score(const MetricsReport& report);

using Grid = std::map<std::string, std::vector<std::string>>;

struct GridRow {
  std::map<std::string, std::string> point;
  double val_score = 0.0;
  double test_score = 0.0;
};

struct GridResult {
  TrainConfig best;
  std::size_t best_index = 0;
  std::vector<GridRow> rows;

  std::string to_text() const;
  std::string to_csv() const;
};

/// Applies `field=value` to a config. Fields: lr, l2, window, epochs, batch,
/// gru_hidden, seed.
void apply_setting(TrainConfig& config, const std::string& field, const std::string& value);

/// Exhaustive search over the Cartesian product of `grid`. Rows appear in
/// lexicographic field order with the last field varying fastest.
GridResult grid_search(const Dataset& dataset, const TrainConfig& base, const Grid& grid,
                       const std::shared_ptr<const EmbeddingTable>& embeddings = nullptr,
                       std::ostream* progress = nullptr);

struct AblationRow {
  std::string name;
  Ablation ablation;
  double f1 = 0.0;   // mean test weighted F1 (or negated MAE) over seeds
  double acc = 0.0;
};

struct AblationTable {
  std::vector<AblationRow> encoders;   // both, sequential only, speaker only, neither
  std::vector<AblationRow> relations;  // full, no temporal, no speaker, single

  std::string to_text() const;
  std::string to_csv() const;
};

AblationTable run_ablation_suite(const Dataset& dataset, const TrainConfig& base,
                                 const std::vector<std::uint64_t>& seeds,
                                 const std::shared_ptr<const EmbeddingTable>& embeddings = nullptr,
                                 std::ostream* progress = nullptr);

}  // namespace dgcn
