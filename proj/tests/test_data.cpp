// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <set>
#include <sstream>

#include "support.hpp"

using namespace dgcn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "dgcn_test_data";
  fs::create_directories(dir);
  return dir / name;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("single utterance conversation") {
  std::istringstream in(R"({"id":"a","utterances":[{"speaker":"x","tokens":["hi"],"label":2}]})");
  const auto convs = parse_conversations(in, LabelMode::classification);
  REQUIRE(convs.size() == 1);
  CHECK(convs[0].size() == 1);
  CHECK(convs[0].num_speakers() == 1);
  CHECK(std::get<std::size_t>(convs[0].utterances[0].label) == 2);
}

TEST_CASE("speaker ids are dense in order of first appearance") {
  std::istringstream in(
      R"({"id":"a","utterances":[{"speaker":"bob","features":[1],"label":0},{"speaker":"amy","features":[1],"label":0},{"speaker":"bob","features":[1],"label":1}]})");
  const auto c = parse_conversations(in, LabelMode::classification).front();
  CHECK(c.speaker_ids() == std::vector<std::size_t>{0, 1, 0});
  CHECK(c.num_speakers() == 2);
}

TEST_CASE("malformed input reports the line number") {
  std::istringstream in("{\"id\":\"a\",\"utterances\":[{\"speaker\":\"x\",\"tokens\":[\"a\"],\"label\":0}]}\n{oops\n");
  CHECK_THROWS_WITH_AS(parse_conversations(in, LabelMode::classification, "f.jsonl"),
                       doctest::Contains("f.jsonl:2"), Error);
}

TEST_CASE("utterance without tokens and features is rejected") {
  std::istringstream in(R"({"id":"a","utterances":[{"speaker":"x","label":0}]})");
  CHECK_THROWS_AS(parse_conversations(in, LabelMode::classification), Error);
}

TEST_CASE("mixed label kinds are rejected") {
  std::istringstream in(
      R"({"id":"a","utterances":[{"speaker":"x","features":[1],"label":0},{"speaker":"x","features":[1],"label":[0.5]}]})");
  CHECK_THROWS_AS(parse_conversations(in, LabelMode::classification), Error);
}

TEST_CASE("regression labels keep a fixed length") {
  std::istringstream ok(
      R"({"id":"a","utterances":[{"speaker":"x","features":[1],"label":[0.1,0.2]},{"speaker":"y","features":[1],"label":[0.3,0.4]}]})");
  const auto convs = parse_conversations(ok, LabelMode::regression);
  CHECK(std::get<std::vector<double>>(convs[0].utterances[1].label) == std::vector<double>{0.3, 0.4});
  std::istringstream bad(
      R"({"id":"a","utterances":[{"speaker":"x","features":[1],"label":[0.1,0.2]},{"speaker":"y","features":[1],"label":[0.3]}]})");
  CHECK_THROWS_AS(parse_conversations(bad, LabelMode::regression), Error);
}

TEST_CASE("save then load round-trips") {
  SyntheticOptions o;
  o.task = SyntheticTask::context;
  o.train_dialogues = 6;
  const auto ds = generate_synthetic(o);
  const auto path = scratch("roundtrip.jsonl");
  save_conversations(path, ds.split.train);
  CHECK(load_conversations(path, LabelMode::classification) == ds.split.train);

  Conversation reg;
  reg.id = "r";
  reg.utterances.push_back(Utterance{"a", std::vector<std::string>{"x"}, std::nullopt, std::vector<double>{0.125, -3.0}});
  save_conversations(path, {reg});
  CHECK(load_conversations(path, LabelMode::regression) == std::vector<Conversation>{reg});
}

TEST_CASE("test split of the reference corpus shape") {
  // 31 dialogues totalling 1623 utterances.
  std::vector<Conversation> convs;
  std::size_t remaining = 1623;
  for (std::size_t d = 0; d < 31; ++d) {
    const std::size_t len = d == 30 ? remaining : 52;
    remaining -= len;
    Conversation c;
    c.id = "Ses05_" + std::to_string(d);
    for (std::size_t i = 0; i < len; ++i) {
      c.utterances.push_back(Utterance{i % 2 ? "M" : "F", std::nullopt, std::vector<double>{0.0}, std::size_t{i % 6}});
    }
    convs.push_back(c);
  }
  const auto path = scratch("iemocap_shaped.jsonl");
  save_conversations(path, convs);
  const auto loaded = load_conversations(path, LabelMode::classification);
  std::size_t total = 0;
  for (const auto& c : loaded) total += c.size();
  CHECK(loaded.size() == 31);
  CHECK(total == 1623);
}

TEST_CASE("manifest with held-out validation") {
  SyntheticOptions o;
  o.train_dialogues = 20;
  o.test_dialogues = 3;
  const auto ds = generate_synthetic(o);
  const auto dir = scratch("manifest").parent_path();
  save_conversations(dir / "m_train.jsonl", ds.split.train);
  save_conversations(dir / "m_test.jsonl", ds.split.test);
  save_manifest(dir / "m.json", ds, "m_train.jsonl", "", "m_test.jsonl");
  const auto loaded = load_manifest(dir / "m.json");
  CHECK(loaded.split.train.size() == 18);
  CHECK(loaded.split.val.size() == 2);
  CHECK(loaded.split.val.back() == ds.split.train.back());
  CHECK(loaded.num_classes == 6);

  DatasetSplit dup{ds.split.train, {ds.split.train.front()}, {}};
  CHECK_THROWS_AS(dup.validate(), Error);
}

TEST_CASE("embedding loading") {
  const auto path = scratch("emb.txt");
  write_file(path, "Cat 1 2 3\ndog 3 4 5\n");
  const auto table = load_embeddings(path, 3);
  CHECK(table.rows() == 4);
  CHECK(table.dim() == 3);
  const auto m = table.matrix();
  const auto unk = table.index_of("zebra");
  CHECK(unk == table.unk_index());
  CHECK(m.at(unk, 0) == 2.0);
  CHECK(m.at(unk, 2) == 4.0);
  const auto pad = table.index_of(EmbeddingTable::kPadToken);
  CHECK(m.at(pad, 1) == 0.0);
  CHECK(m.at(table.index_of("CAT"), 1) == 2.0);

  write_file(path, "a 1 2 3\nb 1 2\n");
  CHECK_THROWS_WITH_AS(load_embeddings(path, 3), doctest::Contains(":2:"), Error);
  write_file(path, "");
  CHECK_THROWS_AS(load_embeddings(path, 3), Error);
}

TEST_CASE("tokenizer lowercases and splits on whitespace") {
  CHECK(tokenize("Hello  WORLD\tfoo\n") == std::vector<std::string>{"hello", "world", "foo"});
}

TEST_CASE("synthetic generation is deterministic") {
  SyntheticOptions o;
  o.train_dialogues = 10;
  const auto a = scratch("echo_a.jsonl"), b = scratch("echo_b.jsonl");
  save_conversations(a, generate_synthetic(o).split.train);
  save_conversations(b, generate_synthetic(o).split.train);
  CHECK(read_file(a) == read_file(b));
  o.seed = 8;
  save_conversations(b, generate_synthetic(o).split.train);
  CHECK(read_file(a) != read_file(b));
}

TEST_CASE("echo labels are the utterance's own tag") {
  SyntheticOptions o;
  o.train_dialogues = 10;
  for (const auto& c : generate_synthetic(o).split.train) {
    for (const auto& u : c.utterances) {
      const auto y = std::get<std::size_t>(u.label);
      CHECK(std::find(u.tokens->begin(), u.tokens->end(), "tag" + std::to_string(y)) != u.tokens->end());
    }
  }
}

TEST_CASE("context labels follow the other speaker and ignore own tokens") {
  SyntheticOptions o;
  o.task = SyntheticTask::context;
  o.num_classes = 8;
  o.train_dialogues = 400;
  const auto ds = generate_synthetic(o);
  // Joint counts of (own tag token, label) to estimate mutual information.
  std::map<std::pair<std::string, std::size_t>, double> joint;
  std::map<std::string, double> tag_count;
  std::map<std::size_t, double> label_count;
  double total = 0;
  for (const auto& c : ds.split.train) {
    for (std::size_t i = 0; i < c.size(); ++i) {
      const auto& u = c.utterances[i];
      const auto y = std::get<std::size_t>(u.label);
      // Label is the hidden tag of the nearest earlier other speaker.
      std::optional<std::size_t> src;
      for (std::size_t j = i; j-- > 0 && !src;) {
        if (c.utterances[j].speaker != u.speaker) src = j;
      }
      for (std::size_t j = i + 1; !src && j < c.size(); ++j) {
        if (c.utterances[j].speaker != u.speaker) src = j;
      }
      REQUIRE(src);
      CHECK(std::stoul(c.utterances[*src].speaker.substr(3)) % 8 == y);
      std::string tag;
      for (const auto& t : *u.tokens) {
        if (t.rfind("tag", 0) == 0) tag = t;
      }
      joint[{tag, y}] += 1;
      tag_count[tag] += 1;
      label_count[y] += 1;
      total += 1;
    }
  }
  double mi = 0;
  for (const auto& [k, n] : joint) {
    mi += n / total * std::log((n / total) / ((tag_count[k.first] / total) * (label_count[k.second] / total)));
  }
  CHECK(mi < 0.02);  // finite-sample estimate of an exactly zero quantity
  double majority = 0;
  for (const auto& [_, n] : label_count) majority = std::max(majority, n / total);
  CHECK(majority < 1.0 / 8 + 0.03);
}

TEST_CASE("context task needs two speakers") {
  SyntheticOptions o;
  o.task = SyntheticTask::context;
  o.num_speakers = 1;
  CHECK_THROWS_AS(generate_synthetic(o), Error);
}

TEST_CASE("self inertia labels repeat per speaker") {
  SyntheticOptions o;
  o.task = SyntheticTask::self_inertia;
  o.train_dialogues = 10;
  for (const auto& c : generate_synthetic(o).split.train) {
    std::map<std::string, std::size_t> first;
    for (const auto& u : c.utterances) {
      const auto y = std::get<std::size_t>(u.label);
      const auto [it, inserted] = first.emplace(u.speaker, y);
      if (!inserted) CHECK(it->second == y);
    }
  }
}
