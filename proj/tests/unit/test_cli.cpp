#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "synthlabel/cli.hpp"
#include "synthlabel/hashing.hpp"
#include "test_util.hpp"

using namespace synthlabel;
using namespace synthlabel::testing;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig =
    "[dataset]\n"
    "n_per_class = 20\n"
    "[train]\n"
    "epochs = 2\n"
    "batch_pairs = 8\n"
    "[split]\n"
    "labeled_fraction = 0.25\n"
    "[inductive]\n"
    "steps = 10\n"
    "batch_size = 8\n";

struct Cli {
  int code = 0;
  std::string out, err;
};

Cli run(std::vector<std::string> args) {
  args.insert(args.begin(), "synthlabel");
  std::ostringstream out, err;
  Cli r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  CliTest() : dir_("cli") {
    std::ofstream(dir_ / "tiny.cfg") << kTinyConfig;
  }
  std::vector<std::string> with(std::vector<std::string> args, const std::string& out = "out") {
    args.insert(args.end(), {"--config", (dir_ / "tiny.cfg").string(), "--out", (dir_ / out).string()});
    return args;
  }
  TempDir dir_;
};

}  // namespace

TEST_F(CliTest, UsageErrorsExitNonzero) {
  EXPECT_NE(run({}).code, 0);
  EXPECT_NE(run({"bogus"}).code, 0);
  EXPECT_NE(run({"pretrain", "--config", "/nonexistent.cfg"}).code, 0);
  EXPECT_NE(run(with({"run-all", "--wrapper", "tree"})).code, 0);
}

TEST_F(CliTest, MissingUpstreamNamesTheProducingCommand) {
  auto r = run(with({"pretrain"}));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("run gen-data"), std::string::npos) << r.err;

  ASSERT_EQ(run(with({"gen-data"})).code, 0);
  ASSERT_EQ(run(with({"pretrain"})).code, 0);
  r = run(with({"label"}));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("missing wrapper model; run fit-wrapper"), std::string::npos) << r.err;
  r = run(with({"eval"}));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("run fit-wrapper"), std::string::npos) << r.err;
}

TEST_F(CliTest, ConfigMismatchNeedsForce) {
  ASSERT_EQ(run(with({"gen-data"})).code, 0);
  ASSERT_EQ(run(with({"pretrain"})).code, 0);
  // Another seed changes the data stage key; the old split is refused.
  auto r = run(with({"pretrain", "--seed", "9"}));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("config hash mismatch"), std::string::npos) << r.err;
  r = run(with({"fit-wrapper", "--seed", "9", "--force"}));
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("--force"), std::string::npos);
}

TEST_F(CliTest, RunAllIsDeterministicAndStagewiseEquivalent) {
  const auto a = run(with({"run-all", "--seed", "7"}, "a"));
  ASSERT_EQ(a.code, 0) << a.err;
  const auto b = run(with({"run-all", "--seed", "7"}, "b"));
  ASSERT_EQ(b.code, 0) << b.err;
  const std::string ma = read_file(dir_ / "a" / "manifest.json");
  EXPECT_FALSE(ma.empty());
  EXPECT_EQ(ma, read_file(dir_ / "b" / "manifest.json"));
  EXPECT_NE(a.out.find("Inductive CNN"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "a" / ".lock"));

  // Running the stages one by one produces the same manifest.
  for (const char* stage : {"gen-data", "pretrain", "embed", "fit-wrapper", "label", "train-inductive", "eval"}) {
    const auto r = run(with({stage, "--seed", "7"}, "c"));
    ASSERT_EQ(r.code, 0) << stage << ": " << r.err;
  }
  EXPECT_EQ(read_file(dir_ / "c" / "manifest.json"), ma);
}

TEST_F(CliTest, FailedStageLeavesPriorArtifactsIntact) {
  ASSERT_EQ(run(with({"gen-data"})).code, 0);
  const std::string before = read_file(dir_ / "out" / "manifest.json");
  std::ofstream(dir_ / "junk.ckpt") << "not a checkpoint";
  const auto r = run(with({"transfer", "--encoder", (dir_ / "junk.ckpt").string()}));
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(read_file(dir_ / "out" / "manifest.json"), before);
}

TEST_F(CliTest, LockedDirectoryIsRefused) {
  fs::create_directories(dir_ / "out");
  std::ofstream(dir_ / "out" / ".lock") << "";
  const auto r = run(with({"gen-data"}));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("locked"), std::string::npos);
}

TEST_F(CliTest, SweepWritesOneRowPerFractionAndSeed) {
  const auto r = run(with({"eval", "--sweep", "labeled-fraction=0.25,1.0", "--seeds", "1,2"}));
  ASSERT_EQ(r.code, 0) << r.err;
  fs::path csv;
  for (const auto& e : fs::directory_iterator(dir_ / "out"))
    if (e.path().filename().string().rfind("sweep-", 0) == 0) csv = e.path();
  ASSERT_FALSE(csv.empty());
  std::istringstream in(read_file(csv));
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_EQ(lines[0].rfind("labeled_fraction,seed,", 0), 0u);
  // A fully labeled split has no synthetic labels to score.
  EXPECT_EQ(lines[2].back(), ',');
}
