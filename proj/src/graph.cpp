// SPDX-License-Identifier: Apache-2.0
#include "dgcn/graph.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace dgcn {

RelationKey assign_relation(std::size_t i, std::size_t j, const std::vector<std::size_t>& speakers) {
  if (i >= speakers.size() || j >= speakers.size()) {
    throw Error("assign_relation: vertex out of range");
  }
  return RelationKey{speakers[i], speakers[j], i < j};
}

std::size_t count_relations(std::size_t num_speakers) {
  if (num_speakers == 0) throw Error("count_relations: need at least one speaker");
  return 2 * num_speakers * num_speakers;
}

std::size_t RelationScheme::count() const {
  const std::size_t speaker_part = drop_speaker ? 1 : num_speakers * num_speakers;
  return speaker_part * (drop_temporal ? 1 : 2);
}

std::size_t RelationScheme::id(const RelationKey& key) const {
  if (key.speaker_i >= num_speakers || key.speaker_j >= num_speakers) {
    throw Error("relation key names speaker " + std::to_string(std::max(key.speaker_i, key.speaker_j)) +
                " but the scheme has " + std::to_string(num_speakers));
  }
  const std::size_t speaker_part = drop_speaker ? 0 : key.speaker_i * num_speakers + key.speaker_j;
  return drop_temporal ? speaker_part : speaker_part * 2 + (key.i_before_j ? 0 : 1);
}

// ---------------------------------------------------------------------------

SpeakerRegistry SpeakerRegistry::build(const std::vector<const std::vector<Conversation>*>& parts,
                                       std::size_t max_roles) {
  if (max_roles == 0) throw Error("speaker registry: max_roles must be positive");
  std::set<std::string> names;
  for (const auto* part : parts) {
    for (const auto& c : *part) {
      for (const auto& u : c.utterances) names.insert(u.speaker);
    }
  }
  SpeakerRegistry reg;
  reg.max_roles_ = max_roles;
  if (names.size() > max_roles) {
    reg.positional_ = true;
  } else {
    reg.names_.assign(names.begin(), names.end());
  }
  if (reg.size() == 0) throw Error("speaker registry: no speakers");
  return reg;
}

std::vector<std::size_t> SpeakerRegistry::roles(const Conversation& conv) const {
  std::vector<std::size_t> out;
  out.reserve(conv.size());
  if (positional_) {
    for (auto id : conv.speaker_ids()) out.push_back(std::min(id, max_roles_ - 1));
    return out;
  }
  for (const auto& u : conv.utterances) {
    auto it = std::lower_bound(names_.begin(), names_.end(), u.speaker);
    if (it == names_.end() || *it != u.speaker) {
      throw Error("speaker '" + u.speaker + "' of conversation '" + conv.id + "' is not registered");
    }
    out.push_back(static_cast<std::size_t>(it - names_.begin()));
  }
  return out;
}

nlohmann::json SpeakerRegistry::to_json() const {
  return {{"positional", positional_}, {"max_roles", max_roles_}, {"names", names_}};
}

SpeakerRegistry SpeakerRegistry::from_json(const nlohmann::json& j) {
  SpeakerRegistry reg;
  reg.positional_ = j.at("positional").get<bool>();
  reg.max_roles_ = j.at("max_roles").get<std::size_t>();
  reg.names_ = j.at("names").get<std::vector<std::string>>();
  return reg;
}

// ---------------------------------------------------------------------------

Window parse_window(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw Error("window must look like P,F (got '" + s + "')");
  try {
    const long p = std::stol(s.substr(0, comma));
    const long f = std::stol(s.substr(comma + 1));
    if (p < 0 || f < 0) throw Error("negative window");
    return Window{static_cast<std::size_t>(p), static_cast<std::size_t>(f)};
  } catch (const std::exception&) {
    throw Error("window must look like P,F with non-negative integers (got '" + s + "')");
  }
}

std::string to_string(const Window& w) { return std::to_string(w.past) + "," + std::to_string(w.future); }

std::size_t DialogueGraph::num_distinct_relations() const {
  std::set<std::size_t> ids;
  for (const auto& e : edges) ids.insert(e.relation);
  return ids.size();
}

std::vector<unsigned char> DialogueGraph::adjacency_mask() const {
  std::vector<unsigned char> mask(n * n, 0);
  for (const auto& e : edges) mask[e.i * n + e.j] = 1;
  return mask;
}

DialogueGraph build_structure(const std::vector<std::size_t>& speakers, Window window,
                              RelationScheme scheme) {
  if (speakers.empty()) throw Error("build_graph: conversation has no utterances");
  DialogueGraph g;
  g.n = speakers.size();
  g.window = window;
  g.scheme = scheme;
  g.speakers = speakers;
  for (std::size_t i = 0; i < g.n; ++i) {
    const std::size_t lo = i >= window.past ? i - window.past : 0;
    const std::size_t hi = std::min(g.n - 1, i + window.future);
    for (std::size_t j = lo; j <= hi; ++j) {
      Edge e;
      e.i = i;
      e.j = j;
      e.key = assign_relation(i, j, speakers);
      e.relation = scheme.id(e.key);
      g.edges.push_back(e);
    }
  }
  return g;
}

Tensor edge_attention(const Tensor& g, const Tensor& W_e, const DialogueGraph& graph) {
  if (g.rows() != graph.n) {
    throw Error("edge_attention: " + std::to_string(g.rows()) + " feature rows for a graph of " +
                std::to_string(graph.n) + " vertices");
  }
  const Tensor scores = matmul(matmul(g, W_e), transpose(g));
  const auto mask = graph.adjacency_mask();
  return masked_softmax(scores, mask);
}

DialogueGraph build_graph(const Tensor& g, const std::vector<std::size_t>& speakers, Window window,
                          const Tensor& W_e, RelationScheme scheme) {
  auto graph = build_structure(speakers, window, scheme);
  NoGradGuard no_grad;
  const Tensor alpha = edge_attention(g, W_e, graph);
  for (auto& e : graph.edges) e.weight = alpha.at(e.i, e.j);
  return graph;
}

DialogueGraph collapse_relations(const DialogueGraph& graph, bool drop_speaker, bool drop_temporal) {
  DialogueGraph out = graph;
  out.scheme.drop_speaker = drop_speaker;
  out.scheme.drop_temporal = drop_temporal;
  for (auto& e : out.edges) e.relation = out.scheme.id(e.key);
  return out;
}

nlohmann::json graph_to_json(const DialogueGraph& graph) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : graph.edges) {
    edges.push_back({{"src", e.j},
                     {"dst", e.i},
                     {"relation", {e.key.speaker_i, e.key.speaker_j, e.key.i_before_j}},
                     {"relation_id", e.relation},
                     {"weight", e.weight}});
  }
  return {{"vertices", graph.n},
          {"speakers", graph.speakers},
          {"window", {graph.window.past, graph.window.future}},
          {"num_relations", graph.num_distinct_relations()},
          {"edges", std::move(edges)}};
}

}  // namespace dgcn
