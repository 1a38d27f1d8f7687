// SPDX-License-Identifier: Apache-2.0
// Shared fixtures for the unit and acceptance tests.
#pragma once

#include <random>
#include <string>
#include <vector>

#include "dgcn/trainer.hpp"

namespace dgcn::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = true) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

/// Utterances with features and class labels; speakers given by name.
inline Conversation feature_conversation(const std::string& id, const std::vector<std::string>& speakers,
                                         std::size_t dim, std::size_t classes, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Conversation c;
  c.id = id;
  for (std::size_t i = 0; i < speakers.size(); ++i) {
    Utterance u;
    u.speaker = speakers[i];
    std::vector<double> f(dim);
    for (auto& x : f) x = dist(rng);
    u.features = f;
    u.label = static_cast<std::size_t>(rng() % classes);
    c.utterances.push_back(u);
  }
  return c;
}

/// Small model dimensions so that exhaustive checks stay fast.
inline ModelConfig small_config(std::size_t input_dim, std::size_t classes) {
  ModelConfig m;
  m.input_dim = input_dim;
  m.outputs = classes;
  m.gru_hidden = 3;
  m.rgcn.out1 = 4;
  m.rgcn.out2 = 3;
  m.clf_hidden = 4;
  return m;
}

inline SpeakerRegistry registry_for(const std::vector<Conversation>& convs, std::size_t max_roles = 8) {
  return SpeakerRegistry::build({&convs}, max_roles);
}

}  // namespace dgcn::testing
