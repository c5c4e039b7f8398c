#include <gtest/gtest.h>

#include "synthlabel/config.hpp"
#include "synthlabel/error.hpp"

using namespace synthlabel;

TEST(Config, DefaultsRoundTripThroughCanonicalText) {
  const RunConfig d;
  const auto text = default_config_text();
  const auto parsed = RunConfig::parse(text);
  EXPECT_EQ(parsed.canonical_text(), text);
  EXPECT_EQ(parsed.hash(), d.hash());
  EXPECT_EQ(RunConfig::parse("").hash(), d.hash());
}

TEST(Config, OverridesAndComments) {
  const auto c = RunConfig::parse(
      "# comment\n"
      "[run]\n"
      "seed = 7   # trailing\n"
      "\n"
      "[split]\n"
      "labeled_fraction = 0.25\n"
      "[wrapper]\n"
      "kind = knn\n");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.split.labeled_fraction, 0.25);
  EXPECT_EQ(c.wrapper.kind, WrapperKind::knn);
  EXPECT_NE(c.hash(), RunConfig{}.hash());
}

TEST(Config, HashIgnoresFormatting) {
  const auto a = RunConfig::parse("[run]\nseed=3\n[split]\nlabeled_fraction=0.5\n");
  const auto b = RunConfig::parse("[split]\n  labeled_fraction =   0.5\n\n[run]\n seed = 3\n");
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(a.canonical_text(), b.canonical_text());
}

TEST(Config, ParseErrors) {
  EXPECT_THROW(RunConfig::parse("[nope]\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("[run]\nbogus = 1\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("seed = 1\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("[run\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("[run]\nseed\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("[run]\nseed = 1\nseed = 2\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("[run]\nseed = x\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("[train]\nseed = 4\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("[split]\nlabeled_fraction = 0\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("[dataset]\nkind = csv\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("[augment]\noutput_h = 16\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("[encoder]\nin_channels = 1\n"), ConfigError);
  EXPECT_THROW(RunConfig::load("/nonexistent/config.cfg"), ConfigError);
  try {
    RunConfig::parse("[run]\n\nbogus = 1\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
  }
}

TEST(Config, ImageDirDataset) {
  const auto c = RunConfig::parse("[dataset]\nkind = image_dir\nimage_dir = /data/x\n");
  EXPECT_EQ(c.dataset.kind, DatasetConfig::Kind::image_dir);
  EXPECT_EQ(c.dataset.image_dir, "/data/x");
  EXPECT_THROW(RunConfig::parse("[dataset]\nkind = image_dir\n"), ConfigError);
  EXPECT_THROW(RunConfig::parse("[dataset]\nkind = image_dir\nimage_dir = a\nspacing_lo = 3\n"), ConfigError);
  EXPECT_EQ(RunConfig::parse(c.canonical_text()).hash(), c.hash());
}

TEST(Config, StageSeedsDeriveFromMaster) {
  const auto a = RunConfig::parse("[run]\nseed = 1\n");
  const auto b = RunConfig::parse("[run]\nseed = 2\n");
  const auto sa = a.stage_seeds();
  EXPECT_EQ(a.split_spec().seed, sa.split);
  EXPECT_EQ(a.train_config().seed, sa.pretrain);
  EXPECT_EQ(a.inductive_config().seed, sa.inductive);
  EXPECT_NE(sa.split, sa.pretrain);
  EXPECT_NE(sa.pretrain, sa.inductive);
  EXPECT_NE(sa.split, b.stage_seeds().split);
  // The dataset itself has its own seed, independent of the master seed.
  EXPECT_EQ(a.dataset.procedural.seed, b.dataset.procedural.seed);
}

TEST(Config, SectionHashes) {
  const RunConfig a;
  const auto b = RunConfig::parse("[wrapper]\nkind = logreg\n");
  EXPECT_EQ(a.sections_hash({"dataset", "split", "train"}), b.sections_hash({"dataset", "split", "train"}));
  EXPECT_NE(a.sections_hash({"wrapper"}), b.sections_hash({"wrapper"}));
  EXPECT_EQ(a.sections_hash({"train", "dataset"}), a.sections_hash({"dataset", "train"}));
  EXPECT_THROW(a.sections_hash({"cheese"}), ConfigError);
}

TEST(Config, ShippedDefaultFileMatchesDefaults) {
  const auto c = RunConfig::load(std::string(SYNTHLABEL_SOURCE_DIR) + "/configs/default.cfg");
  EXPECT_EQ(c.hash(), RunConfig{}.hash());
}
