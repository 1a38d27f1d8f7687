// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "dgcn/tensor.hpp"

namespace dgcn {

enum class LabelMode { classification, regression };

std::string to_string(LabelMode mode);
LabelMode parse_label_mode(const std::string& s);

/// Class index in classification mode, attribute vector in regression mode.
using Label = std::variant<std::size_t, std::vector<double>>;

struct Utterance {
  std::string speaker;
  std::optional<std::vector<std::string>> tokens;
  std::optional<std::vector<double>> features;
  Label label;

  bool operator==(const Utterance&) const = default;
};

struct Conversation {
  std::string id;
  std::vector<Utterance> utterances;

  std::size_t size() const { return utterances.size(); }
  /// Speakers interned to dense ids in order of first appearance.
  std::vector<std::size_t> speaker_ids() const;
  std::size_t num_speakers() const;

  bool operator==(const Conversation&) const = default;
};

struct DatasetSplit {
  std::vector<Conversation> train;
  std::vector<Conversation> val;
  std::vector<Conversation> test;

  /// Throws if a conversation id occurs in two splits.
  void validate() const;
};

struct Dataset {
  DatasetSplit split;
  LabelMode mode = LabelMode::classification;
  std::size_t num_classes = 0;          // classification
  std::vector<std::string> attributes;  // regression

  std::size_t num_outputs() const {
    return mode == LabelMode::classification ? num_classes : attributes.size();
  }
};

/// Parses JSONL conversations. Errors carry the 1-based line number.
std::vector<Conversation> load_conversations(const std::filesystem::path& path, LabelMode mode);
std::vector<Conversation> parse_conversations(std::istream& in, LabelMode mode,
                                              const std::string& source = "<stream>");
void save_conversations(const std::filesystem::path& path, const std::vector<Conversation>& convs);
std::string conversation_to_json_line(const Conversation& conv);

/// Loads the manifest and every split it references. Relative paths resolve
/// against the manifest's directory. A missing validation split is carved
/// from the last 10% of the training dialogues.
Dataset load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const Dataset& dataset,
                   const std::string& train_file, const std::string& val_file,
                   const std::string& test_file);

/// Lowercasing whitespace tokenizer.
std::vector<std::string> tokenize(const std::string& text);
std::string normalize_token(const std::string& token);

/// Word vectors plus two reserved rows: unknown (mean of all vectors) and
/// padding (zeros).
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::vector<std::string> words, std::vector<std::vector<double>> vectors);

  std::size_t dim() const { return dim_; }
  std::size_t rows() const { return matrix_.defined() ? matrix_.rows() : 0; }
  std::size_t unk_index() const { return words_.size(); }
  std::size_t pad_index() const { return words_.size() + 1; }
  std::size_t index_of(const std::string& token) const;
  const Tensor& matrix() const { return matrix_; }
  const std::vector<std::string>& words() const { return words_; }

  static inline const std::string kPadToken = "<pad>";

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
  Tensor matrix_;
};

/// Whitespace-separated `word v1 ... vd` lines. dim 0 takes the width of
/// the first line.
EmbeddingTable load_embeddings(const std::filesystem::path& path, std::size_t dim = 0);
void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table);

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

enum class SyntheticTask {
  /// Label is the tag token of the utterance itself.
  echo,
  /// Tokens are label-independent noise. Speaker identity s carries the
  /// hidden tag s mod num_classes, which never appears in any token; an
  /// utterance's label is the hidden tag of the previous utterance by another
  /// speaker (the next one when nobody else has spoken yet). A dialogue draws
  /// a tag k and casts identities k, k + C, k + 2C, ..., so the pool holds
  /// num_speakers * num_classes identities and speaker_pool is ignored.
  /// Dialogue tags are balanced across classes within each split.
  context,
  /// A speaker's first utterance is labelled by its own tag token; every later
  /// utterance of that speaker repeats the speaker's previous label.
  self_inertia,
};

std::string to_string(SyntheticTask task);
SyntheticTask parse_synthetic_task(const std::string& s);

struct SyntheticOptions {
  SyntheticTask task = SyntheticTask::echo;
  std::size_t train_dialogues = 20;
  std::size_t val_dialogues = 0;
  std::size_t test_dialogues = 0;
  std::size_t min_len = 6;
  std::size_t max_len = 12;
  std::size_t num_speakers = 2;  // per dialogue
  std::size_t speaker_pool = 0;  // distinct identities; 0 means num_classes
  std::size_t num_classes = 6;
  std::size_t noise_vocab = 24;
  std::size_t noise_tokens = 2;  // per utterance, besides the tag token
  std::size_t feature_dim = 32;  // 0 disables precomputed features
  std::uint64_t seed = 7;
};

/// Fixed random vectors for the synthetic vocabulary (independent of the
/// dataset seed, so features agree across generated splits).
EmbeddingTable synthetic_embeddings(const SyntheticOptions& options);

Dataset generate_synthetic(const SyntheticOptions& options);

}  // namespace dgcn
