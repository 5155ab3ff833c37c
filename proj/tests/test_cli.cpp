#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cgr/io.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using cgr::testkit::source_dir;
using cgr::testkit::validate_dot;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("cgr_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static CliRun cli(const std::string& args) {
    const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = std::string(CGR_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
    CliRun r;
    const int status = std::system(cmd.c_str());
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = cgr::read_file(out);
    r.err = cgr::read_file(err);
    return r;
  }

  static std::string solar_flags() {
    const fs::path emb = dir_ / "solar.cgrv";
    if (!fs::exists(emb)) {
      auto r = cli("index-build --corpus " + t6("corpus.jsonl") + " --embeddings " + emb.string());
      EXPECT_EQ(r.code, 0) << r.err;
    }
    return "--corpus " + t6("corpus.jsonl") + " --embeddings " + emb.string() + " --dataset " + t6("dataset.jsonl");
  }

  static std::string t6(const std::string& name) { return source_dir() + "/data/solar/" + name; }

  static nlohmann::json error_json(const CliRun& r) {
    auto line = r.err.substr(0, r.err.find('\n'));
    return nlohmann::json::parse(line);
  }

  static fs::path dir_;
};

fs::path Cli::dir_;

std::vector<std::string> lines(const std::string& s) { return cgr::split_lines(s); }

}  // namespace

TEST_F(Cli, NoArgumentsPrintsHelpAndFails) {
  auto r = cli("");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("gen-synthetic"), std::string::npos);
}

TEST_F(Cli, HelpSucceeds) {
  auto r = cli("--help");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("explain"), std::string::npos);
}

TEST_F(Cli, UnknownFlagIsUsageError) {
  auto r = cli("explain --bogus 1");
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(error_json(r)["code"], "UsageError");
}

TEST_F(Cli, MissingRequiredFlagIsUsageError) {
  auto r = cli("retrieve --dataset " + t6("dataset.jsonl"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(error_json(r)["message"].get<std::string>().find("--corpus"), std::string::npos);
}

TEST_F(Cli, BadConfigValueIsUsageError) {
  auto r = cli("chains " + solar_flags() + " --mode sometimes");
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(error_json(r)["code"], "ConfigError");
}

TEST_F(Cli, DataErrorsExitTwo) {
  auto r = cli("chains " + solar_flags() + " --question nope");
  EXPECT_EQ(r.code, 2);
  auto j = error_json(r);
  EXPECT_EQ(j["code"], "UnknownQuestion");
  EXPECT_EQ(j["context"], "nope");

  const fs::path bad = dir_ / "bad.jsonl";
  std::ofstream(bad) << "{\"id\": 1\n";
  r = cli("hypo --dataset " + bad.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(error_json(r)["code"], "DataError");
}

TEST_F(Cli, ExplainSolarFixture) {
  auto r = cli("explain " + solar_flags() + " --question solar");
  ASSERT_EQ(r.code, 0) << r.err;
  auto ls = lines(r.out);
  ASSERT_GE(ls.size(), 3u);
  EXPECT_EQ(ls[0], "Question →natural-03 [3] →renew-01 [2] →solar [1] →panel (C)");
  const auto blank = r.out.find("\n\n");
  ASSERT_NE(blank, std::string::npos);
  const std::string dot = r.out.substr(blank + 2);
  EXPECT_EQ(validate_dot(dot), "");
  EXPECT_NE(dot.find("color=pink"), std::string::npos);
  EXPECT_NE(dot.find("fillcolor=lightblue"), std::string::npos);
  EXPECT_NE(dot.find("fillcolor=palegreen"), std::string::npos);
}

TEST_F(Cli, ExplainDistractorsHaveNoChain) {
  for (int j : {0, 1, 3}) {
    auto r = cli("explain " + solar_flags() + " --question solar --choice " + std::to_string(j));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(lines(r.out).at(0), "no reasoning chain found");
  }
}

TEST_F(Cli, ExplainWritesDotToFile) {
  const fs::path out = dir_ / "solar.dot";
  auto r = cli("explain " + solar_flags() + " --question solar --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "Question →natural-03 [3] →renew-01 [2] →solar [1] →panel (C)\n");
  EXPECT_EQ(validate_dot(cgr::read_file(out)), "");
}

TEST_F(Cli, GraphFormats) {
  auto dot = cli("graph " + solar_flags() + " --question solar");
  ASSERT_EQ(dot.code, 0) << dot.err;
  EXPECT_EQ(validate_dot(dot.out), "");
  auto js = cli("graph " + solar_flags() + " --question solar --format json");
  ASSERT_EQ(js.code, 0) << js.err;
  auto j = nlohmann::json::parse(lines(js.out).at(0));
  EXPECT_EQ(j["choice_idx"], 2);
  EXPECT_FALSE(j["nodes"].empty());
  EXPECT_EQ(cli("graph " + solar_flags() + " --format xml").code, 1);
}

TEST_F(Cli, ChainsAndRetrieveEmitOneLinePerChoice) {
  auto r = cli("chains " + solar_flags());
  ASSERT_EQ(r.code, 0) << r.err;
  auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 4u);
  auto c = nlohmann::json::parse(ls[2]);
  EXPECT_EQ(c["chains"][0], (std::vector<std::string>{"3", "2", "1"}));
  EXPECT_TRUE(nlohmann::json::parse(ls[0])["chains"].empty());

  r = cli("retrieve " + solar_flags() + " --k 3 --t 2 --choice 2");
  ASSERT_EQ(r.code, 0) << r.err;
  ls = lines(r.out);
  ASSERT_EQ(ls.size(), 1u);
  auto j = nlohmann::json::parse(ls[0]);
  EXPECT_LE(j["beams"].size(), 3u);
}

TEST_F(Cli, Hypotheses) {
  auto r = cli("hypo --dataset " + t6("dataset.jsonl"));
  ASSERT_EQ(r.code, 0) << r.err;
  auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 4u);
  EXPECT_NE(nlohmann::json::parse(ls[3])["hypothesis"].get<std::string>().find("solar bees"), std::string::npos);
}

TEST_F(Cli, SyntheticTrainEvalSmoke) {
  const fs::path d = dir_ / "syn";
  auto g = cli("gen-synthetic --questions 24 --dim 32 --seed 4 --out " + d.string());
  ASSERT_EQ(g.code, 0) << g.err;
  for (const char* f : {"corpus.jsonl", "embeddings.cgrv", "train.jsonl", "dev.jsonl", "config.cfg"}) {
    EXPECT_TRUE(fs::exists(d / f)) << f;
  }
  const std::string data = "--corpus " + (d / "corpus.jsonl").string() + " --embeddings " + (d / "embeddings.cgrv").string() +
                           " --config " + (d / "config.cfg").string();
  auto t = cli("train " + data + " --dataset " + (d / "train.jsonl").string() + " --dev " + (d / "dev.jsonl").string() +
               " --epochs 2 --out " + (d / "run").string());
  ASSERT_EQ(t.code, 0) << t.err;
  auto summary = nlohmann::json::parse(lines(t.out).at(0));
  EXPECT_TRUE(summary.contains("dev_accuracy"));
  auto metrics = lines(cgr::read_file(d / "run" / "metrics.jsonl"));
  ASSERT_FALSE(metrics.empty());
  EXPECT_EQ(nlohmann::json::parse(metrics.back())["type"], "eval");

  auto e = cli("eval " + data + " --dataset " + (d / "dev.jsonl").string() + " --model " + (d / "run" / "model.bin").string());
  ASSERT_EQ(e.code, 0) << e.err;
  auto m = nlohmann::json::parse(lines(e.out).at(0));
  EXPECT_EQ(m["questions"], 6);
  EXPECT_EQ(m["accuracy"], nlohmann::json::parse(metrics.back())["accuracy"]);

  // The same run again gives the same log.
  auto t2 = cli("train " + data + " --dataset " + (d / "train.jsonl").string() + " --dev " + (d / "dev.jsonl").string() +
                " --epochs 2 --out " + (d / "run2").string());
  ASSERT_EQ(t2.code, 0) << t2.err;
  EXPECT_EQ(cgr::read_file(d / "run2" / "metrics.jsonl"), cgr::read_file(d / "run" / "metrics.jsonl"));
}

// ---- the DOT checker itself ----------------------------------------------

TEST(DotValidator, AcceptsGrammar) {
  EXPECT_EQ(validate_dot("graph { a -- b }"), "");
  EXPECT_EQ(validate_dot("strict digraph \"g\" { node [shape=box]; a -> b -> c [label=\"x\\\"y\"]; subgraph s { d } }"), "");
  EXPECT_EQ(validate_dot("graph G { n0 [label=<<b>x</b>>, w=-1.5]; /* c */ // c\n n0 -- n1:p; x = y }"), "");
}

TEST(DotValidator, RejectsBrokenText) {
  EXPECT_NE(validate_dot("graph { a -> b }"), "");
  EXPECT_NE(validate_dot("graph { a -- }"), "");
  EXPECT_NE(validate_dot("graph { a [label=\"x] }"), "");
  EXPECT_NE(validate_dot("graph { a "), "");
  EXPECT_NE(validate_dot("tree { }"), "");
  EXPECT_NE(validate_dot("graph { } extra"), "");
}
