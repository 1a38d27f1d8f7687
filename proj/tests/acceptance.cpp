// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "support.hpp"

using namespace dgcn;
using dgcn::testing::feature_conversation;
using dgcn::testing::random_tensor;
using dgcn::testing::registry_for;
using dgcn::testing::small_config;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// 1, 2, 5: graph structure

using Pair = std::pair<std::size_t, std::size_t>;

Outcome relation_fixture() {
  // p1 p2 p1 p2 p1, pairs 1-based as (i, j).
  const std::map<RelationKey, std::set<Pair>> expected{
      {{0, 0, true}, {{1, 3}, {1, 5}, {3, 5}}},
      {{0, 0, false}, {{1, 1}, {3, 1}, {3, 3}, {5, 1}, {5, 3}, {5, 5}}},
      {{1, 1, true}, {{2, 4}}},
      {{1, 1, false}, {{2, 2}, {4, 2}, {4, 4}}},
      {{0, 1, true}, {{1, 2}, {1, 4}, {3, 4}}},
      {{0, 1, false}, {{3, 2}, {5, 2}, {5, 4}}},
      {{1, 0, true}, {{2, 3}, {2, 5}, {4, 5}}},
      {{1, 0, false}, {{2, 1}, {4, 1}, {4, 3}}},
  };
  const auto g = build_structure({0, 1, 0, 1, 0}, Window{10, 10}, RelationScheme{2});
  std::map<RelationKey, std::set<Pair>> got;
  std::map<std::size_t, std::set<Pair>> by_id;
  for (const auto& e : g.edges) {
    got[e.key].insert({e.i + 1, e.j + 1});
    by_id[e.relation].insert({e.i + 1, e.j + 1});
  }
  std::set<std::set<Pair>> want_groups, id_groups;
  for (const auto& [_, s] : expected) want_groups.insert(s);
  for (const auto& [_, s] : by_id) id_groups.insert(s);
  const bool ok = got == expected && id_groups == want_groups && g.num_distinct_relations() == 8;
  return {ok, std::to_string(g.num_distinct_relations()) + " relations, " + std::to_string(g.edges.size()) + " edges"};
}

Outcome relation_count() {
  bool ok = count_relations(1) == 2 && count_relations(2) == 8 && count_relations(3) == 18;
  std::mt19937_64 rng(2);
  std::size_t max_seen = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t m = 1 + rng() % 3, n = 1 + rng() % 30;
    std::vector<std::size_t> speakers(n);
    for (auto& s : speakers) s = rng() % m;
    const auto g = build_structure(speakers, Window{rng() % 12, rng() % 12}, RelationScheme{m});
    ok = ok && g.num_distinct_relations() <= count_relations(m);
    for (const auto& e : g.edges) ok = ok && e.relation < count_relations(m);
    if (m == 3) max_seen = std::max(max_seen, g.num_distinct_relations());
  }
  return {ok, "2/8/18; at most " + std::to_string(max_seen) + " ids seen with 3 speakers"};
}

Outcome zero_window() {
  std::mt19937_64 rng(5);
  bool ok = true;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng() % 40;
    std::vector<std::size_t> speakers(n);
    for (auto& s : speakers) s = rng() % 3;
    const auto g = build_structure(speakers, Window{0, 0}, RelationScheme{3});
    ok = ok && g.edges.size() == n;
    for (const auto& e : g.edges) ok = ok && e.i == e.j;
  }
  return {ok, "N self-loops for 50 conversations"};
}

// ---------------------------------------------------------------------------
// 3: edge weights

Outcome edge_normalisation() {
  std::mt19937_64 rng(3);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 30;
    std::vector<std::string> names(n);
    for (auto& s : names) s = "s" + std::to_string(rng() % 3);
    const std::vector<Conversation> convs{feature_conversation("c", names, 6, 3, rng)};
    auto cfg = small_config(6, 3);
    cfg.window = Window{rng() % 12, rng() % 12};
    DialogueGcn model(cfg, registry_for(convs));
    model.initialize(rng());
    NoGradGuard guard;
    const auto alpha = model.forward(convs[0]).alpha;
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0;
      for (std::size_t j = 0; j < n; ++j) row += alpha.at(i, j);
      worst = std::max(worst, std::abs(row - 1.0));
    }
  }
  return {worst <= 1e-6, "max |sum - 1| = " + fmt(worst)};
}

// ---------------------------------------------------------------------------
// 4: gradients

Outcome full_gradient() {
  std::mt19937_64 rng(4);
  std::vector<std::string> words{"a", "b", "c", "d", "e"};
  std::vector<std::vector<double>> vecs;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t w = 0; w < words.size(); ++w) {
    std::vector<double> v(4);
    for (auto& x : v) x = normal(rng);
    vecs.push_back(v);
  }
  auto table = std::make_shared<EmbeddingTable>(words, vecs);
  Conversation conv;
  conv.id = "toy";
  conv.utterances.push_back(Utterance{"p1", std::vector<std::string>{"a", "c", "d", "b"}, std::nullopt, std::size_t{0}});
  conv.utterances.push_back(Utterance{"p2", std::vector<std::string>{"e", "b", "a"}, std::nullopt, std::size_t{2}});
  conv.utterances.push_back(Utterance{"p1", std::vector<std::string>{"d", "d", "c", "a", "e"}, std::nullopt, std::size_t{1}});
  const std::vector<Conversation> convs{conv};

  auto cfg = small_config(0, 3);
  cfg.end_to_end = true;
  cfg.cnn.filter_widths = {2, 3};
  cfg.cnn.maps_per_width = 2;
  cfg.cnn.out_dim = 3;
  cfg.cnn.embed_dim = 4;
  DialogueGcn model(cfg, registry_for(convs), table);
  model.initialize(4);
  // Nudge zero-initialised biases away from ReLU kinks.
  for (const auto& name : model.params().names()) {
    auto t = model.params().get(name);
    for (auto& v : t.mutable_data()) {
      if (v == 0.0) v = 0.05;
    }
  }
  auto params = model.params().tensors();
  std::set<std::string> groups;
  for (const auto& name : model.params().names()) groups.insert(name.substr(0, name.find('.')));
  auto f = [&] { return compute_loss(convs, model, 1e-3); };
  const double err = grad_check(f, params, 1e-5);
  const bool all_groups = groups.count("cnn") && groups.count("gru") && groups.count("edge") &&
                          groups.count("rgcn") && groups.count("clf");
  return {err < 1e-4 && all_groups,
          "max relative error " + fmt(err) + " over " + std::to_string(params.size()) + " tensors"};
}

// ---------------------------------------------------------------------------
// 6: locality

Outcome locality() {
  std::mt19937_64 rng(6);
  std::size_t checked = 0;
  bool ok = true;
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 8 + rng() % 20;
    const std::size_t w = rng() % 4;
    std::vector<std::string> names(n);
    for (auto& s : names) s = "s" + std::to_string(rng() % 2);
    const std::vector<Conversation> convs{feature_conversation("c", names, 5, 3, rng)};
    auto cfg = small_config(5, 3);
    cfg.window = Window{w, w};
    // Per-utterance projection so a perturbation stays at its own vertex
    // until the graph layers.
    cfg.ablation.no_sequential = true;
    DialogueGcn model(cfg, registry_for(convs));
    model.initialize(rng());
    NoGradGuard guard;
    const auto base = model.forward(convs[0]).h2;
    const std::size_t j = rng() % n;
    auto moved = convs[0];
    for (auto& v : *moved.utterances[j].features) v += 0.5;
    const auto h2 = model.forward(moved).h2;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t dist = i > j ? i - j : j - i;
      if (dist <= 2 * w) continue;
      ++checked;
      for (std::size_t k = 0; k < h2.cols(); ++k) ok = ok && h2.at(i, k) == base.at(i, k);
    }
  }
  return {ok && checked > 0, std::to_string(checked) + " distant rows bit-identical"};
}

// ---------------------------------------------------------------------------
// 7, 12: echo task

TrainConfig compact(std::size_t input_dim, std::size_t classes) {
  TrainConfig cfg;
  cfg.model.input_dim = input_dim;
  cfg.model.outputs = classes;
  cfg.model.gru_hidden = 8;
  cfg.model.rgcn = RgcnConfig{32, 32, false};
  cfg.model.clf_hidden = 32;
  return cfg;
}

Outcome echo_overfit() {
  SyntheticOptions o;
  o.train_dialogues = 20;
  const auto ds = generate_synthetic(o);
  auto cfg = compact(o.feature_dim, o.num_classes);
  cfg.model.gru_hidden = 16;
  DialogueGcn model(cfg.model, registry_for(ds.split.train));
  model.initialize(1);
  Adam opt(AdamConfig{1e-2});
  std::mt19937_64 rng(1);
  std::vector<std::size_t> order(ds.split.train.size());
  std::iota(order.begin(), order.end(), 0);
  double acc = 0;
  std::size_t epoch = 0;
  while (epoch < 200 && acc < 0.95) {
    ++epoch;
    std::shuffle(order.begin(), order.end(), rng);
    for (auto k : order) adam_step(compute_loss({&ds.split.train[k]}, model, cfg.l2), model, opt);
    acc = evaluate(model, ds.split.train).report.accuracy;
  }
  return {acc >= 0.95, "train accuracy " + fmt(acc) + " after " + std::to_string(epoch) + " epochs"};
}

Outcome determinism() {
  SyntheticOptions o;
  o.train_dialogues = 10;
  o.val_dialogues = 3;
  const auto dir = std::filesystem::temp_directory_path() / "dgcn_acceptance";
  std::filesystem::create_directories(dir);
  std::vector<std::string> csv;
  for (int run = 0; run < 2; ++run) {
    auto ds = generate_synthetic(o);
    auto cfg = compact(o.feature_dim, o.num_classes);
    cfg.adam.lr = 1e-2;
    cfg.epochs = 10;
    const auto result = train(ds, cfg);
    const auto path = dir / ("metrics_" + std::to_string(run) + ".csv");
    write_metrics_csv(path, result.log);
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    csv.push_back(ss.str());
  }
  return {csv[0] == csv[1] && !csv[0].empty(), std::to_string(csv[0].size()) + " bytes, identical"};
}

// ---------------------------------------------------------------------------
// 8, 9: context task

struct ContextRuns {
  Dataset data;
  std::map<std::tuple<std::uint64_t, std::size_t, bool>, MetricsReport> cache;

  ContextRuns() {
    SyntheticOptions o;
    o.task = SyntheticTask::context;
    o.num_speakers = 2;
    o.num_classes = 8;
    o.train_dialogues = 100;
    o.test_dialogues = 30;
    data = generate_synthetic(o);
  }

  const MetricsReport& run(std::uint64_t seed, std::size_t window, bool single_relation) {
    const auto key = std::make_tuple(seed, window, single_relation);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto cfg = compact(32, 8);
    cfg.model.max_roles = 16;
    cfg.model.window = Window{window, window};
    cfg.model.ablation.drop_speaker_rel = single_relation;
    cfg.model.ablation.drop_temporal_rel = single_relation;
    cfg.adam.lr = 3e-3;
    cfg.epochs = 15;
    cfg.seed = seed;
    auto ds = data;
    const auto result = train(ds, cfg);
    return cache[key] = evaluate(*result.model, ds.split.test).report;
  }
};

ContextRuns& context_runs() {
  static ContextRuns runs;
  return runs;
}

Outcome context_separation() {
  auto& runs = context_runs();
  double full = 0, zero = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    full += runs.run(seed, 10, false).accuracy / 3;
    zero += runs.run(seed, 0, false).accuracy / 3;
  }
  const double chance = 1.0 / 8;
  return {full >= 0.90 && zero <= chance + 0.10,
          "window 10,10 accuracy " + fmt(full) + ", window 0,0 accuracy " + fmt(zero) + " (chance " + fmt(chance) + ")"};
}

Outcome relation_ablation() {
  auto& runs = context_runs();
  double full = 0, single = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    full += runs.run(seed, 10, false).weighted_f1 / 5;
    single += runs.run(seed, 10, true).weighted_f1 / 5;
  }
  return {full >= single, "weighted F1 all relations " + fmt(full) + ", single relation " + fmt(single)};
}

// ---------------------------------------------------------------------------
// 10, 11: loss and metrics

Outcome loss_identities() {
  std::mt19937_64 rng(10);
  const std::vector<Conversation> convs{feature_conversation("a", {"x", "y", "x"}, 5, 6, rng),
                                        feature_conversation("b", {"y", "x", "y", "y"}, 5, 6, rng)};
  DialogueGcn model(small_config(5, 6), registry_for(convs));
  model.initialize(10);
  NoGradGuard guard;
  double norm = 0;
  for (const auto& t : model.params().tensors()) {
    for (double v : t.data()) norm += v * v;
  }
  const double lambda = 0.03;
  const double decay_err =
      std::abs(compute_loss(convs, model, lambda).item() - compute_loss(convs, model, 0.0).item() - lambda * norm);
  auto W = model.classifier().W_out;
  auto b = model.classifier().b_out;
  for (auto& v : W.mutable_data()) v = 0.0;
  for (auto& v : b.mutable_data()) v = 0.0;
  const double uniform_err = std::abs(compute_loss(convs, model, 0.0).item() - std::log(6.0));
  return {uniform_err <= 1e-9 && decay_err <= 1e-9,
          "|L - ln 6| = " + fmt(uniform_err) + ", |dL - lambda |theta|^2| = " + fmt(decay_err)};
}

Outcome metric_oracle() {
  std::mt19937_64 rng(11);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t classes = 2 + rng() % 7, n = 1 + rng() % 60;
    std::vector<std::size_t> p(n), g(n);
    for (std::size_t k = 0; k < n; ++k) {
      p[k] = rng() % classes;
      g[k] = rng() % classes;
    }
    double correct = 0, weighted = 0;
    for (std::size_t k = 0; k < n; ++k) correct += p[k] == g[k];
    for (std::size_t c = 0; c < classes; ++c) {
      double tp = 0, fp = 0, fn = 0;
      for (std::size_t k = 0; k < n; ++k) {
        tp += p[k] == c && g[k] == c;
        fp += p[k] == c && g[k] != c;
        fn += p[k] != c && g[k] == c;
      }
      weighted += tp > 0 ? (tp + fn) * 2 * tp / (2 * tp + fp + fn) : 0.0;
    }
    const auto r = score_classification(p, g, classes);
    worst = std::max(worst, std::abs(r.accuracy - correct / n));
    worst = std::max(worst, std::abs(r.weighted_f1 - weighted / n));
  }
  return {worst <= 1e-12, "max deviation " + fmt(worst)};
}

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Outcome()> check;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "relation fixture", 1, relation_fixture},
      {2, "relation count", 1, relation_count},
      {3, "edge-weight normalisation", 5, edge_normalisation},
      {4, "gradient correctness", 60, full_gradient},
      {5, "window (0,0) structure", 1, zero_window},
      {6, "locality", 5, locality},
      {7, "echo overfit", 120, echo_overfit},
      {8, "context separation", 600, context_separation},
      {9, "relation ablation trend", 1800, relation_ablation},
      {10, "loss identities", 1, loss_identities},
      {11, "metric oracle", 5, metric_oracle},
      {12, "determinism", 240, determinism},
  };
  std::set<int> wanted;
  for (int a = 1; a < argc; ++a) wanted.insert(std::atoi(argv[a]));

  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.check();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = out.pass && in_time;
    failures += !pass;
    std::printf("%s  %2d %-26s %s (%.2f s of %.0f s)\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                out.detail.c_str(), secs, c.budget_s);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
