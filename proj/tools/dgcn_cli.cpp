// SPDX-License-Identifier: Apache-2.0
// Command-line front end: data generation, CNN pretraining, training,
// evaluation, ablations, grid search and graph inspection.
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "dgcn/trainer.hpp"

namespace fs = std::filesystem;
using namespace dgcn;

namespace {

struct Options {
  std::string manifest;
  std::string embeddings;
  std::string features;
  std::string checkpoint;
  std::string window = "10,10";
  std::uint64_t seed = 1;
  bool no_sequential = false;
  bool no_speaker = false;
  bool drop_speaker_rel = false;
  bool drop_temporal_rel = false;
  bool end_to_end = false;
  bool learned_normalizer = false;
  std::string out = ".";

  std::size_t epochs = 50;
  double lr = 1e-4;
  double l2 = 1e-5;
  std::size_t batch = 1;
  std::size_t gru_hidden = 100;
  std::size_t gcn_hidden = 100;
  std::size_t clf_hidden = 100;
  std::size_t max_roles = 8;
  bool mae_loss = false;
  std::size_t pretrain_epochs = 10;
  double pretrain_lr = 1e-3;
  std::size_t seeds = 5;
  std::vector<std::string> grid;
  std::string split = "test";
  std::string conversation;
  bool quiet = false;

  SyntheticOptions synth;
  std::string task = "echo";
};

void add_data_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--manifest", o.manifest, "Dataset manifest (JSON)")->required();
  cmd->add_option("--embeddings", o.embeddings, "Word vectors, one `word v1 ... vd` per line");
  cmd->add_option("--features", o.features, "Feature cache written by pretrain-cnn or train");
}

void add_model_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--window", o.window, "Context window P,F")->capture_default_str();
  cmd->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  cmd->add_flag("--no-sequential", o.no_sequential, "Replace the GRU with a linear projection");
  cmd->add_flag("--no-speaker", o.no_speaker, "Skip the graph encoder");
  cmd->add_flag("--drop-speaker-rel", o.drop_speaker_rel, "Ignore speakers in relation types");
  cmd->add_flag("--drop-temporal-rel", o.drop_temporal_rel, "Ignore temporal order in relation types");
  cmd->add_flag("--end-to-end", o.end_to_end, "Train the CNN jointly instead of pretraining it");
  cmd->add_option("--epochs", o.epochs)->capture_default_str();
  cmd->add_option("--lr", o.lr)->capture_default_str();
  cmd->add_option("--l2", o.l2)->capture_default_str();
  cmd->add_option("--batch", o.batch, "Dialogues per update")->capture_default_str();
  cmd->add_option("--gru-hidden", o.gru_hidden)->capture_default_str();
  cmd->add_option("--gcn-hidden", o.gcn_hidden)->capture_default_str();
  cmd->add_option("--clf-hidden", o.clf_hidden)->capture_default_str();
  cmd->add_flag("--learned-normalizer", o.learned_normalizer, "Learn a per-relation scale on the 1/|N_i^r| factor");
  cmd->add_option("--max-roles", o.max_roles, "Speakers kept as distinct identities before falling back to positional roles")
      ->capture_default_str();
  cmd->add_flag("--mae-loss", o.mae_loss, "Absolute instead of squared error for regression");
  cmd->add_option("--pretrain-epochs", o.pretrain_epochs)->capture_default_str();
  cmd->add_option("--pretrain-lr", o.pretrain_lr)->capture_default_str();
  cmd->add_flag("--quiet", o.quiet, "No per-epoch progress");
}

TrainConfig make_config(const Options& o) {
  TrainConfig c;
  c.model.window = parse_window(o.window);
  c.model.ablation = {o.no_sequential, o.no_speaker, o.drop_speaker_rel, o.drop_temporal_rel};
  c.model.end_to_end = o.end_to_end;
  c.model.gru_hidden = o.gru_hidden;
  c.model.rgcn.out1 = o.gcn_hidden;
  c.model.rgcn.out2 = o.gcn_hidden;
  c.model.rgcn.learned_normalizer = o.learned_normalizer;
  c.model.clf_hidden = o.clf_hidden;
  c.model.max_roles = o.max_roles;
  c.adam.lr = o.lr;
  c.l2 = o.l2;
  c.epochs = o.epochs;
  c.batch = o.batch;
  c.seed = o.seed;
  c.absolute_error = o.mae_loss;
  c.pretrain.epochs = o.pretrain_epochs;
  c.pretrain.lr = o.pretrain_lr;
  c.pretrain.seed = o.seed;
  return c;
}

std::shared_ptr<const EmbeddingTable> load_table(const Options& o) {
  if (o.embeddings.empty()) return nullptr;
  return std::make_shared<const EmbeddingTable>(load_embeddings(o.embeddings));
}

Dataset load_dataset(const Options& o) {
  Dataset ds = load_manifest(o.manifest);
  if (!o.features.empty()) {
    for (auto* part : {&ds.split.train, &ds.split.val, &ds.split.test}) load_feature_cache(o.features, *part);
  }
  return ds;
}

std::vector<Conversation> all_conversations(const Dataset& ds) {
  std::vector<Conversation> all = ds.split.train;
  all.insert(all.end(), ds.split.val.begin(), ds.split.val.end());
  all.insert(all.end(), ds.split.test.begin(), ds.split.test.end());
  return all;
}

std::vector<std::string> class_names(const Dataset& ds) {
  return ds.mode == LabelMode::regression ? ds.attributes : std::vector<std::string>{};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

const std::vector<Conversation>& pick_split(const Dataset& ds, const std::string& name) {
  if (name == "train") return ds.split.train;
  if (name == "val") return ds.split.val;
  if (name == "test") return ds.split.test;
  throw Error("unknown split '" + name + "' (expected train, val or test)");
}

int cmd_gen_synthetic(Options& o) {
  o.synth.task = parse_synthetic_task(o.task);
  o.synth.seed = o.seed;
  const Dataset ds = generate_synthetic(o.synth);
  fs::create_directories(o.out);
  const fs::path dir(o.out);
  save_conversations(dir / "train.jsonl", ds.split.train);
  const bool has_val = !ds.split.val.empty();
  if (has_val) save_conversations(dir / "val.jsonl", ds.split.val);
  save_conversations(dir / "test.jsonl", ds.split.test);
  save_manifest(dir / "manifest.json", ds, "train.jsonl", has_val ? "val.jsonl" : "", "test.jsonl");
  save_embeddings(dir / "embeddings.txt", synthetic_embeddings(o.synth));
  std::cout << "wrote " << ds.split.train.size() << '/' << ds.split.val.size() << '/' << ds.split.test.size()
            << " dialogues to " << dir.string() << '\n';
  return 0;
}

int cmd_pretrain(const Options& o) {
  Dataset ds = load_dataset(o);
  TrainConfig cfg = make_config(o);
  cfg.model.end_to_end = false;
  const auto acc = prepare_dataset(ds, cfg, load_table(o));
  if (!acc) throw Error("nothing to pretrain: every utterance already has features");
  fs::create_directories(o.out);
  const auto path = fs::path(o.out) / "features.jsonl";
  save_feature_cache(path, all_conversations(ds));
  std::cout << "cnn train accuracy " << *acc << "\nfeatures written to " << path.string() << '\n';
  return 0;
}

int cmd_train(const Options& o) {
  Dataset ds = load_dataset(o);
  const auto table = load_table(o);
  const bool had_cache = !o.features.empty();
  auto result = train(ds, make_config(o), table, o.quiet ? nullptr : &std::cerr);
  fs::create_directories(o.out);
  const fs::path dir(o.out);
  result.model->save(dir / "model.json");
  write_metrics_csv(dir / "metrics.csv", result.log);
  if (!had_cache && !result.config.model.end_to_end) {
    save_feature_cache(dir / "features.jsonl", all_conversations(ds));
  }
  std::cout << "best epoch " << result.best_epoch << '\n';
  if (!ds.split.test.empty()) {
    const auto ev = evaluate(*result.model, ds.split.test, result.config.absolute_error);
    write_predictions(dir / "predictions.jsonl", ev.predictions);
    const auto text = ev.report.to_text(class_names(ds));
    write_text(dir / "report.txt", text);
    std::cout << "test\n" << text;
  }
  return 0;
}

int cmd_eval(const Options& o) {
  if (o.checkpoint.empty()) throw Error("eval needs --checkpoint");
  Dataset ds = load_dataset(o);
  const auto table = load_table(o);
  auto model = DialogueGcn::load(o.checkpoint, table);
  const auto& convs = pick_split(ds, o.split);
  if (!model.config().end_to_end) {
    for (const auto& c : convs) {
      for (const auto& u : c.utterances) {
        if (!u.features) throw Error("utterances have no features; pass the --features cache written by train");
      }
    }
  }
  const auto ev = evaluate(model, convs, o.mae_loss);
  fs::create_directories(o.out);
  write_predictions(fs::path(o.out) / "predictions.jsonl", ev.predictions);
  std::cout << o.split << " loss " << ev.loss << '\n' << ev.report.to_text(class_names(ds));
  return 0;
}

int cmd_ablate(const Options& o) {
  if (o.seeds == 0) throw Error("--seeds must be positive");
  const Dataset ds = load_dataset(o);
  std::vector<std::uint64_t> seeds;
  for (std::size_t k = 0; k < o.seeds; ++k) seeds.push_back(o.seed + k);
  const auto t = run_ablation_suite(ds, make_config(o), seeds, load_table(o), o.quiet ? nullptr : &std::cerr);
  fs::create_directories(o.out);
  write_text(fs::path(o.out) / "ablation.txt", t.to_text());
  write_text(fs::path(o.out) / "ablation.csv", t.to_csv());
  std::cout << t.to_text();
  return 0;
}

int cmd_grid(const Options& o) {
  Grid grid;
  for (const auto& axis : o.grid) {
    const auto eq = axis.find('=');
    if (eq == std::string::npos) throw Error("--set expects field=v1|v2|..., got '" + axis + "'");
    auto& values = grid[axis.substr(0, eq)];
    std::stringstream ss(axis.substr(eq + 1));
    for (std::string v; std::getline(ss, v, '|');) {
      if (!v.empty()) values.push_back(v);
    }
  }
  if (o.grid.empty()) grid["window"] = {"0,0", "4,4", "8,8", "10,10"};
  const Dataset ds = load_dataset(o);
  const auto res = grid_search(ds, make_config(o), grid, load_table(o), o.quiet ? nullptr : &std::cerr);
  fs::create_directories(o.out);
  write_text(fs::path(o.out) / "grid.txt", res.to_text());
  write_text(fs::path(o.out) / "grid.csv", res.to_csv());
  std::cout << res.to_text();
  return 0;
}

int cmd_dump_graph(const Options& o) {
  const Dataset ds = load_dataset(o);
  const auto all = all_conversations(ds);
  const Conversation* conv = all.empty() ? nullptr : &all.front();
  if (!o.conversation.empty()) {
    conv = nullptr;
    for (const auto& c : all) {
      if (c.id == o.conversation) conv = &c;
    }
    if (!conv) throw Error("no conversation '" + o.conversation + "'");
  }
  if (!conv) throw Error("dataset has no conversations");

  const Window window = parse_window(o.window);
  DialogueGraph graph;
  if (o.checkpoint.empty()) {
    // Without a model, attention is uniform over each neighbourhood.
    const auto reg = SpeakerRegistry::build({&ds.split.train, &ds.split.val, &ds.split.test}, o.max_roles);
    const auto roles = reg.roles(*conv);
    graph = build_graph(Tensor::zeros({conv->size(), 1}), roles, window, Tensor::zeros({1, 1}),
                        RelationScheme{reg.size(), o.drop_speaker_rel, o.drop_temporal_rel});
  } else {
    const auto model = DialogueGcn::load(o.checkpoint, load_table(o));
    NoGradGuard no_grad;
    const auto pass = model.forward(*conv);
    if (!pass.alpha.defined()) throw Error("checkpoint was trained without the graph encoder");
    graph = pass.graph;
    for (auto& e : graph.edges) e.weight = pass.alpha.at(e.i, e.j);
    const auto beta = attention_weights(concat({pass.g, pass.h2}, 1), model.classifier().W_beta);
    fs::create_directories(o.out);
    std::ofstream csv(fs::path(o.out) / "attention.csv");
    csv << "kind,i,j,value\n" << std::setprecision(10);
    for (const auto& e : graph.edges) csv << "alpha," << e.i << ',' << e.j << ',' << e.weight << '\n';
    for (std::size_t i = 0; i < beta.rows(); ++i) {
      for (std::size_t j = 0; j < beta.cols(); ++j) csv << "beta," << i << ',' << j << ',' << beta.at(i, j) << '\n';
    }
  }
  auto j = graph_to_json(graph);
  j["id"] = conv->id;
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dgcn: speaker-aware graph model for labelling utterances in dialogues"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen-synthetic", "Write a synthetic dataset, manifest and embeddings");
  gen->add_option("--task", o.task, "echo, context or self_inertia")->capture_default_str();
  gen->add_option("--seed", o.seed)->capture_default_str();
  gen->add_option("--train", o.synth.train_dialogues)->capture_default_str();
  gen->add_option("--val", o.synth.val_dialogues)->capture_default_str();
  gen->add_option("--test", o.synth.test_dialogues)->capture_default_str();
  gen->add_option("--classes", o.synth.num_classes)->capture_default_str();
  gen->add_option("--speakers", o.synth.num_speakers, "Speakers per dialogue")->capture_default_str();
  gen->add_option("--speaker-pool", o.synth.speaker_pool, "Distinct speakers (0: one per class)");
  gen->add_option("--min-len", o.synth.min_len)->capture_default_str();
  gen->add_option("--max-len", o.synth.max_len)->capture_default_str();
  gen->add_option("--feature-dim", o.synth.feature_dim, "0 writes tokens only")->capture_default_str();
  gen->add_option("--out", o.out)->capture_default_str();

  auto* pre = app.add_subcommand("pretrain-cnn", "Pretrain the utterance CNN and cache its features");
  add_data_flags(pre, o);
  add_model_flags(pre, o);
  pre->add_option("--out", o.out)->capture_default_str();

  auto* tr = app.add_subcommand("train", "Train a model and score the test split");
  add_data_flags(tr, o);
  add_model_flags(tr, o);
  tr->add_option("--out", o.out)->capture_default_str();

  auto* ev = app.add_subcommand("eval", "Score a checkpoint");
  add_data_flags(ev, o);
  ev->add_option("--checkpoint", o.checkpoint)->required();
  ev->add_option("--split", o.split, "train, val or test")->capture_default_str();
  ev->add_flag("--mae-loss", o.mae_loss, "Report absolute-error loss for regression");
  ev->add_option("--out", o.out)->capture_default_str();

  auto* ab = app.add_subcommand("ablate", "Encoder and relation ablation tables");
  add_data_flags(ab, o);
  add_model_flags(ab, o);
  ab->add_option("--seeds", o.seeds, "Seeds per configuration, starting at --seed")->capture_default_str();
  ab->add_option("--out", o.out)->capture_default_str();

  auto* gr = app.add_subcommand("grid", "Exhaustive hyperparameter search");
  add_data_flags(gr, o);
  add_model_flags(gr, o);
  gr->add_option("--set", o.grid, "field=v1|v2|... (lr, l2, window, epochs, batch, gru_hidden, seed)");
  gr->add_option("--out", o.out)->capture_default_str();

  auto* dg = app.add_subcommand("dump-graph", "Print one conversation's graph as JSON");
  add_data_flags(dg, o);
  dg->add_option("--window", o.window, "Context window P,F (the checkpoint's own window when one is given)")
      ->capture_default_str();
  dg->add_option("--max-roles", o.max_roles, "Speakers kept as distinct identities")->capture_default_str();
  dg->add_option("--conversation", o.conversation, "Conversation id (default: first)");
  dg->add_option("--checkpoint", o.checkpoint, "Use learned attention and write attention.csv");
  dg->add_flag("--drop-speaker-rel", o.drop_speaker_rel);
  dg->add_flag("--drop-temporal-rel", o.drop_temporal_rel);
  dg->add_option("--out", o.out, "Directory for attention.csv")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*gen) return cmd_gen_synthetic(o);
    if (*pre) return cmd_pretrain(o);
    if (*tr) return cmd_train(o);
    if (*ev) return cmd_eval(o);
    if (*ab) return cmd_ablate(o);
    if (*gr) return cmd_grid(o);
    if (*dg) return cmd_dump_graph(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
