// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kScratch = fs::temp_directory_path() / "dgcn_cli_test";

int run(const std::string& args, const std::string& stdout_file = "/dev/null") {
  const std::string cmd = std::string(DGCN_CLI_PATH) + " " + args + " > " + stdout_file + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("argument errors exit with status 2") {
  CHECK(run("") == 2);
  CHECK(run("train --no-such-flag") == 2);
  CHECK(run("train") == 2);  // missing --manifest
}

TEST_CASE("runtime errors exit with status 1") {
  CHECK(run("train --manifest " + (kScratch / "missing.json").string()) == 1);
}

TEST_CASE("synthetic generation is reproducible") {
  fs::remove_all(kScratch);
  const auto a = kScratch / "a", b = kScratch / "b";
  REQUIRE(run("gen-synthetic --train 4 --val 1 --test 2 --out " + a.string()) == 0);
  REQUIRE(run("gen-synthetic --train 4 --val 1 --test 2 --out " + b.string()) == 0);
  for (const char* f : {"train.jsonl", "val.jsonl", "test.jsonl", "manifest.json", "embeddings.txt"}) {
    CHECK(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
}

TEST_CASE("dump-graph on a dyadic fixture") {
  const auto dir = kScratch / "fixture";
  fs::create_directories(dir);
  std::ofstream(dir / "conv.jsonl")
      << R"({"id":"d","utterances":[)"
      << R"({"speaker":"p1","features":[1,0],"label":0},{"speaker":"p2","features":[0,1],"label":1},)"
      << R"({"speaker":"p1","features":[1,1],"label":0},{"speaker":"p2","features":[0,0],"label":1},)"
      << R"({"speaker":"p1","features":[1,0],"label":0}]})" << "\n";
  std::ofstream(dir / "held.jsonl") << R"({"id":"e","utterances":[{"speaker":"p1","features":[1,0],"label":0}]})"
                                    << "\n";
  std::ofstream(dir / "manifest.json")
      << R"({"mode":"classification","num_classes":2,"train":"conv.jsonl","test":"held.jsonl"})";
  const auto out = dir / "graph.json";
  REQUIRE(run("dump-graph --manifest " + (dir / "manifest.json").string(), out.string()) == 0);
  const auto j = nlohmann::json::parse(slurp(out));
  CHECK(j["vertices"] == 5);
  CHECK(j["num_relations"] == 8);
  CHECK(j["edges"].size() == 25);

  REQUIRE(run("dump-graph --window 0,0 --manifest " + (dir / "manifest.json").string(), out.string()) == 0);
  const auto self = nlohmann::json::parse(slurp(out));
  CHECK(self["edges"].size() == 5);
  CHECK(self["num_relations"] == 2);
}

TEST_CASE("train then eval from the checkpoint") {
  const auto data = kScratch / "train_data", out = kScratch / "train_out";
  REQUIRE(run("gen-synthetic --train 4 --val 1 --test 2 --feature-dim 8 --out " + data.string()) == 0);
  const std::string dims = " --gru-hidden 4 --gcn-hidden 4 --clf-hidden 4 --epochs 2 --quiet";
  REQUIRE(run("train --manifest " + (data / "manifest.json").string() + dims + " --out " + out.string()) == 0);
  for (const char* f : {"model.json", "metrics.csv", "predictions.jsonl", "report.txt"}) CHECK(fs::exists(out / f));
  CHECK(slurp(out / "metrics.csv").rfind("epoch,split,loss,acc,wf1,mae\n", 0) == 0);

  const auto eval_out = kScratch / "eval_out";
  REQUIRE(run("eval --manifest " + (data / "manifest.json").string() + " --checkpoint " +
              (out / "model.json").string() + " --split test --out " + eval_out.string()) == 0);
  CHECK(slurp(eval_out / "predictions.jsonl") == slurp(out / "predictions.jsonl"));
}
