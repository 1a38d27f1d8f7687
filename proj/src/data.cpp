// SPDX-License-Identifier: Apache-2.0
#include "dgcn/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

namespace dgcn {

using nlohmann::json;

std::string to_string(LabelMode mode) {
  return mode == LabelMode::classification ? "classification" : "regression";
}

LabelMode parse_label_mode(const std::string& s) {
  if (s == "classification") return LabelMode::classification;
  if (s == "regression") return LabelMode::regression;
  throw Error("unknown label mode '" + s + "'");
}

std::vector<std::size_t> Conversation::speaker_ids() const {
  std::map<std::string, std::size_t> seen;
  std::vector<std::size_t> ids;
  ids.reserve(utterances.size());
  for (const auto& u : utterances) {
    auto [it, inserted] = seen.emplace(u.speaker, seen.size());
    ids.push_back(it->second);
  }
  return ids;
}

std::size_t Conversation::num_speakers() const {
  std::set<std::string> s;
  for (const auto& u : utterances) s.insert(u.speaker);
  return s.size();
}

void DatasetSplit::validate() const {
  std::map<std::string, std::string> owner;
  auto visit = [&](const std::vector<Conversation>& convs, const std::string& name) {
    for (const auto& c : convs) {
      auto [it, inserted] = owner.emplace(c.id, name);
      if (!inserted && it->second != name) {
        throw Error("conversation '" + c.id + "' appears in both " + it->second + " and " + name);
      }
    }
  };
  visit(train, "train");
  visit(val, "val");
  visit(test, "test");
}

// ---------------------------------------------------------------------------
// JSONL
// ---------------------------------------------------------------------------

namespace {

Conversation conversation_from_json(const json& j, LabelMode mode) {
  Conversation conv;
  conv.id = j.at("id").get<std::string>();
  const auto& utts = j.at("utterances");
  if (!utts.is_array() || utts.empty()) throw Error("conversation has no utterances");
  for (const auto& ju : utts) {
    Utterance u;
    u.speaker = ju.at("speaker").get<std::string>();
    if (ju.contains("tokens") && !ju["tokens"].is_null()) {
      u.tokens = ju["tokens"].get<std::vector<std::string>>();
    }
    if (ju.contains("features") && !ju["features"].is_null()) {
      u.features = ju["features"].get<std::vector<double>>();
    }
    if (!u.tokens && !u.features) throw Error("utterance has neither tokens nor features");
    const auto& jl = ju.at("label");
    if (jl.is_number_integer() || jl.is_number_unsigned()) {
      if (mode != LabelMode::classification) throw Error("class label in a regression file");
      const auto v = jl.get<long long>();
      if (v < 0) throw Error("negative class label");
      u.label = static_cast<std::size_t>(v);
    } else if (jl.is_array()) {
      if (mode != LabelMode::regression) throw Error("vector label in a classification file");
      u.label = jl.get<std::vector<double>>();
    } else {
      throw Error("label must be an integer or an array of numbers");
    }
    conv.utterances.push_back(std::move(u));
  }
  return conv;
}

json conversation_to_json(const Conversation& conv) {
  json utts = json::array();
  for (const auto& u : conv.utterances) {
    json ju;
    ju["speaker"] = u.speaker;
    if (u.tokens) ju["tokens"] = *u.tokens;
    if (u.features) ju["features"] = *u.features;
    if (const auto* c = std::get_if<std::size_t>(&u.label)) {
      ju["label"] = *c;
    } else {
      ju["label"] = std::get<std::vector<double>>(u.label);
    }
    utts.push_back(std::move(ju));
  }
  return json{{"id", conv.id}, {"utterances", std::move(utts)}};
}

}  // namespace

std::vector<Conversation> parse_conversations(std::istream& in, LabelMode mode,
                                              const std::string& source) {
  std::vector<Conversation> out;
  std::string line;
  std::size_t lineno = 0;
  std::size_t attr_count = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (std::all_of(line.begin(), line.end(), [](unsigned char ch) { return std::isspace(ch); })) {
      continue;
    }
    try {
      auto conv = conversation_from_json(json::parse(line), mode);
      if (mode == LabelMode::regression) {
        for (const auto& u : conv.utterances) {
          const auto n = std::get<std::vector<double>>(u.label).size();
          if (attr_count == 0) attr_count = n;
          if (n != attr_count || n == 0) throw Error("inconsistent regression label length");
        }
      }
      out.push_back(std::move(conv));
    } catch (const std::exception& e) {
      throw Error(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Conversation> load_conversations(const std::filesystem::path& path, LabelMode mode) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return parse_conversations(in, mode, path.string());
}

std::string conversation_to_json_line(const Conversation& conv) {
  return conversation_to_json(conv).dump();
}

void save_conversations(const std::filesystem::path& path, const std::vector<Conversation>& convs) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& c : convs) out << conversation_to_json_line(c) << '\n';
}

Dataset load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const std::exception& e) {
    throw Error("manifest " + path.string() + ": " + e.what());
  }
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_absolute() ? fp : base / fp;
  };
  Dataset ds;
  ds.mode = parse_label_mode(j.value("mode", std::string("classification")));
  ds.split.train = load_conversations(resolve(j.at("train").get<std::string>()), ds.mode);
  ds.split.test = load_conversations(resolve(j.at("test").get<std::string>()), ds.mode);
  if (j.contains("val") && !j["val"].is_null()) {
    ds.split.val = load_conversations(resolve(j["val"].get<std::string>()), ds.mode);
  } else if (ds.split.train.size() > 1) {
    const std::size_t held = std::max<std::size_t>(1, ds.split.train.size() / 10);
    ds.split.val.assign(ds.split.train.end() - static_cast<long>(held), ds.split.train.end());
    ds.split.train.resize(ds.split.train.size() - held);
  }
  ds.split.validate();

  auto all = {&ds.split.train, &ds.split.val, &ds.split.test};
  if (ds.mode == LabelMode::classification) {
    std::size_t max_label = 0;
    for (const auto* part : all) {
      for (const auto& c : *part) {
        for (const auto& u : c.utterances) max_label = std::max(max_label, std::get<std::size_t>(u.label));
      }
    }
    ds.num_classes = j.contains("num_classes") ? j["num_classes"].get<std::size_t>() : max_label + 1;
    if (max_label >= ds.num_classes) {
      throw Error("label " + std::to_string(max_label) + " is out of range for " +
                  std::to_string(ds.num_classes) + " classes");
    }
  } else {
    std::size_t n = 0;
    for (const auto* part : all) {
      for (const auto& c : *part) {
        for (const auto& u : c.utterances) {
          const auto len = std::get<std::vector<double>>(u.label).size();
          if (n == 0) n = len;
          if (len != n) throw Error("regression label lengths differ across splits");
        }
      }
    }
    if (j.contains("attributes")) {
      ds.attributes = j["attributes"].get<std::vector<std::string>>();
      if (ds.attributes.size() != n) throw Error("manifest attribute count does not match labels");
    } else {
      for (std::size_t i = 0; i < n; ++i) ds.attributes.push_back("attr" + std::to_string(i));
    }
  }
  return ds;
}

void save_manifest(const std::filesystem::path& path, const Dataset& dataset,
                   const std::string& train_file, const std::string& val_file,
                   const std::string& test_file) {
  json j{{"train", train_file}, {"test", test_file}, {"mode", to_string(dataset.mode)}};
  if (!val_file.empty()) j["val"] = val_file;
  if (dataset.mode == LabelMode::classification) {
    j["num_classes"] = dataset.num_classes;
  } else {
    j["attributes"] = dataset.attributes;
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

std::string normalize_token(const std::string& token) {
  std::string out = token;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return out;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::istringstream is(text);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(normalize_token(tok));
  return out;
}

EmbeddingTable::EmbeddingTable(std::vector<std::string> words, std::vector<std::vector<double>> vectors)
    : words_(std::move(words)) {
  if (words_.empty() || words_.size() != vectors.size()) {
    throw Error("embedding table needs one vector per word and at least one word");
  }
  dim_ = vectors.front().size();
  if (dim_ == 0) throw Error("embedding dimension must be positive");
  std::vector<double> data;
  data.reserve((words_.size() + 2) * dim_);
  std::vector<double> mean(dim_, 0.0);
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (vectors[i].size() != dim_) throw Error("embedding vectors differ in dimension");
    index_.emplace(words_[i], i);
    data.insert(data.end(), vectors[i].begin(), vectors[i].end());
    for (std::size_t d = 0; d < dim_; ++d) mean[d] += vectors[i][d];
  }
  for (auto& m : mean) m /= static_cast<double>(words_.size());
  data.insert(data.end(), mean.begin(), mean.end());
  data.insert(data.end(), dim_, 0.0);
  matrix_ = Tensor::from({words_.size() + 2, dim_}, std::move(data));
}

std::size_t EmbeddingTable::index_of(const std::string& token) const {
  if (token == kPadToken) return pad_index();
  auto it = index_.find(normalize_token(token));
  return it == index_.end() ? unk_index() : it->second;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, std::size_t dim) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open embeddings " + path.string());
  std::vector<std::string> words;
  std::vector<std::vector<double>> vectors;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream is(line);
    std::string word;
    if (!(is >> word)) continue;
    std::vector<double> v;
    std::string field;
    while (is >> field) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw Error(path.string() + ":" + std::to_string(lineno) + ": bad number '" + field + "'");
      }
    }
    if (dim == 0) dim = v.size();
    if (v.size() != dim) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(dim) +
                  " values, found " + std::to_string(v.size()));
    }
    word = normalize_token(word);
    if (!seen.insert(word).second) continue;  // first occurrence wins
    words.push_back(std::move(word));
    vectors.push_back(std::move(v));
  }
  if (words.empty()) throw Error("embeddings file " + path.string() + " is empty");
  return EmbeddingTable(std::move(words), std::move(vectors));
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  const auto m = table.matrix().data();
  for (std::size_t i = 0; i < table.words().size(); ++i) {
    out << table.words()[i];
    for (std::size_t d = 0; d < table.dim(); ++d) out << ' ' << m[i * table.dim() + d];
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Synthetic generation
// ---------------------------------------------------------------------------

std::string to_string(SyntheticTask task) {
  switch (task) {
    case SyntheticTask::echo: return "echo";
    case SyntheticTask::context: return "context";
    case SyntheticTask::self_inertia: return "self_inertia";
  }
  return "?";
}

SyntheticTask parse_synthetic_task(const std::string& s) {
  if (s == "echo") return SyntheticTask::echo;
  if (s == "context") return SyntheticTask::context;
  if (s == "self_inertia" || s == "self-inertia") return SyntheticTask::self_inertia;
  throw Error("unknown synthetic task '" + s + "'");
}

namespace {

constexpr std::uint64_t kVocabSeed = 0x5eedf00dULL;

std::string tag_token(std::size_t k) { return "tag" + std::to_string(k); }
std::string noise_token(std::size_t k) { return "w" + std::to_string(k); }

std::size_t draw(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace

EmbeddingTable synthetic_embeddings(const SyntheticOptions& o) {
  const std::size_t dim = o.feature_dim == 0 ? 32 : o.feature_dim;
  std::mt19937_64 rng(kVocabSeed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::string> words;
  std::vector<std::vector<double>> vecs;
  auto add = [&](std::string w) {
    std::vector<double> v(dim);
    for (auto& x : v) x = normal(rng);
    words.push_back(std::move(w));
    vecs.push_back(std::move(v));
  };
  for (std::size_t k = 0; k < o.num_classes; ++k) add(tag_token(k));
  for (std::size_t k = 0; k < o.noise_vocab; ++k) add(noise_token(k));
  return EmbeddingTable(std::move(words), std::move(vecs));
}

Dataset generate_synthetic(const SyntheticOptions& o) {
  if (o.num_classes < 2) throw Error("synthetic data needs at least 2 classes");
  if (o.num_speakers < 1) throw Error("synthetic data needs at least 1 speaker");
  if (o.task == SyntheticTask::context && o.num_speakers < 2) {
    throw Error("the context task needs at least 2 speakers per dialogue");
  }
  if (o.min_len < 1 || o.max_len < o.min_len) throw Error("invalid dialogue length range");
  const std::size_t pool = o.task == SyntheticTask::context ? o.num_speakers * o.num_classes
                           : o.speaker_pool == 0              ? o.num_classes
                                                              : o.speaker_pool;
  if (pool < o.num_speakers) throw Error("speaker pool is smaller than speakers per dialogue");
  if (o.task == SyntheticTask::context && o.min_len < o.num_speakers) {
    throw Error("context dialogues must be long enough for every speaker to talk");
  }
  if (o.noise_tokens > 0 && o.noise_vocab == 0) throw Error("noise tokens need a noise vocabulary");

  const auto table = synthetic_embeddings(o);
  std::mt19937_64 rng(o.seed);

  auto make_dialogue = [&](const std::string& id, std::size_t dialogue_tag) {
    const std::size_t len = o.min_len + draw(rng, o.max_len - o.min_len + 1);
    // Distinct identities for this dialogue.
    std::vector<std::size_t> identities(pool);
    if (o.task == SyntheticTask::context) {
      for (std::size_t m = 0; m < o.num_speakers; ++m) identities[m] = dialogue_tag + m * o.num_classes;
    } else {
      for (std::size_t i = 0; i < pool; ++i) identities[i] = i;
      std::shuffle(identities.begin(), identities.end(), rng);
    }
    identities.resize(o.num_speakers);

    std::vector<std::size_t> who(len);
    for (;;) {
      for (auto& w : who) w = draw(rng, o.num_speakers);
      if (o.task != SyntheticTask::context) break;
      std::set<std::size_t> present(who.begin(), who.end());
      if (present.size() == o.num_speakers) break;
    }

    Conversation conv;
    conv.id = id;
    std::vector<std::size_t> tags(len);
    for (std::size_t i = 0; i < len; ++i) {
      Utterance u;
      u.speaker = "spk" + std::to_string(identities[who[i]]);
      tags[i] = draw(rng, o.num_classes);
      std::vector<std::string> toks{tag_token(tags[i])};
      for (std::size_t k = 0; k < o.noise_tokens; ++k) toks.push_back(noise_token(draw(rng, o.noise_vocab)));
      std::shuffle(toks.begin(), toks.end(), rng);
      if (o.feature_dim > 0) {
        std::vector<double> f(table.dim(), 0.0);
        const auto m = table.matrix().data();
        for (const auto& t : toks) {
          const auto row = table.index_of(t);
          for (std::size_t d = 0; d < f.size(); ++d) f[d] += m[row * table.dim() + d];
        }
        u.features = std::move(f);
      }
      u.tokens = std::move(toks);
      conv.utterances.push_back(std::move(u));
    }

    switch (o.task) {
      case SyntheticTask::echo:
        for (std::size_t i = 0; i < len; ++i) conv.utterances[i].label = tags[i];
        break;
      case SyntheticTask::context:
        for (std::size_t i = 0; i < len; ++i) {
          std::optional<std::size_t> source;
          for (std::size_t j = i; j-- > 0;) {
            if (who[j] != who[i]) {
              source = j;
              break;
            }
          }
          for (std::size_t j = i + 1; !source && j < len; ++j) {
            if (who[j] != who[i]) source = j;
          }
          conv.utterances[i].label = identities[who[*source]] % o.num_classes;
        }
        break;
      case SyntheticTask::self_inertia: {
        std::map<std::size_t, std::size_t> last;
        for (std::size_t i = 0; i < len; ++i) {
          auto it = last.find(who[i]);
          const std::size_t label = it == last.end() ? tags[i] : it->second;
          last[who[i]] = label;
          conv.utterances[i].label = label;
        }
        break;
      }
    }
    return conv;
  };

  Dataset ds;
  ds.mode = LabelMode::classification;
  ds.num_classes = o.num_classes;
  const std::string prefix = to_string(o.task) + "-s" + std::to_string(o.seed) + "-";
  // Dialogue tags cycle through the classes in shuffled order, so every
  // split of the context task is close to class-balanced.
  auto make_split = [&](std::vector<Conversation>& out, const std::string& name, std::size_t count) {
    std::vector<std::size_t> tags(count);
    for (std::size_t i = 0; i < count; ++i) tags[i] = i % o.num_classes;
    std::shuffle(tags.begin(), tags.end(), rng);
    for (std::size_t i = 0; i < count; ++i) out.push_back(make_dialogue(prefix + name + std::to_string(i), tags[i]));
  };
  make_split(ds.split.train, "train", o.train_dialogues);
  make_split(ds.split.val, "val", o.val_dialogues);
  make_split(ds.split.test, "test", o.test_dialogues);
  return ds;
}

}  // namespace dgcn
