// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "dgcn/data.hpp"
#include "dgcn/tensor.hpp"
#include "json.hpp"

namespace dgcn {

/// Edge label: speakers of the receiving utterance i and the neighbour j,
/// and whether i comes strictly before j. Self-edges have i_before_j false.
struct RelationKey {
  std::size_t speaker_i = 0;
  std::size_t speaker_j = 0;
  bool i_before_j = false;

  auto operator<=>(const RelationKey&) const = default;
};

RelationKey assign_relation(std::size_t i, std::size_t j, const std::vector<std::size_t>& speakers);

/// Number of relation types for M speakers: 2 M^2.
std::size_t count_relations(std::size_t num_speakers);

/// Maps relation keys to dense ids, optionally forgetting the speaker pair
/// and/or the temporal direction.
struct RelationScheme {
  std::size_t num_speakers = 1;
  bool drop_speaker = false;
  bool drop_temporal = false;

  std::size_t count() const;
  std::size_t id(const RelationKey& key) const;
};

/// Assigns each speaker of a conversation a role index shared across the
/// dataset. Small speaker sets keep one role per identity; larger ones fall
/// back to order of first appearance within each conversation, capped at
/// max_roles - 1.
class SpeakerRegistry {
 public:
  static SpeakerRegistry build(const std::vector<const std::vector<Conversation>*>& parts,
                               std::size_t max_roles = 8);
  static SpeakerRegistry from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  bool positional() const { return positional_; }
  std::size_t size() const { return positional_ ? max_roles_ : names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  std::vector<std::size_t> roles(const Conversation& conv) const;

 private:
  bool positional_ = false;
  std::size_t max_roles_ = 8;
  std::vector<std::string> names_;
};

struct Window {
  std::size_t past = 10;
  std::size_t future = 10;

  bool operator==(const Window&) const = default;
};

Window parse_window(const std::string& s);
std::string to_string(const Window& w);

struct Edge {
  std::size_t i = 0;  // receiving vertex
  std::size_t j = 0;  // neighbour
  RelationKey key;
  std::size_t relation = 0;
  double weight = 0.0;
};

struct DialogueGraph {
  std::size_t n = 0;
  Window window;
  RelationScheme scheme;
  std::vector<std::size_t> speakers;
  std::vector<Edge> edges;  // sorted by (i, j)

  std::size_t num_distinct_relations() const;
  /// Row-major [n, n] mask with 1 where edge (i, j) exists.
  std::vector<unsigned char> adjacency_mask() const;
};

/// Window edges with relation ids; weights left at zero.
DialogueGraph build_structure(const std::vector<std::size_t>& speakers, Window window,
                              RelationScheme scheme);

/// alpha[i, j] = softmax over i's neighbours of g_i^T W_e g_j, zero off the
/// window. Differentiable in both g and W_e. Shape [n, n].
Tensor edge_attention(const Tensor& g, const Tensor& W_e, const DialogueGraph& graph);

/// Structure plus attention weights evaluated from g and W_e.
DialogueGraph build_graph(const Tensor& g, const std::vector<std::size_t>& speakers, Window window,
                          const Tensor& W_e, RelationScheme scheme);

/// Same edges and weights with relation ids re-projected.
DialogueGraph collapse_relations(const DialogueGraph& graph, bool drop_speaker, bool drop_temporal);

/// {"vertices", "speakers", "window", "num_relations", "edges": [{src, dst, relation: [s_i, s_j, before], relation_id, weight}]}
nlohmann::json graph_to_json(const DialogueGraph& graph);

}  // namespace dgcn
