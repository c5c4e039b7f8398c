#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "synthlabel/error.hpp"
#include "synthlabel/hashing.hpp"
#include "synthlabel/kv.hpp"
#include "synthlabel/rng.hpp"
#include "synthlabel/tensor.hpp"
#include "synthlabel/tnsr_io.hpp"
#include "test_util.hpp"

using namespace synthlabel;
using synthlabel::testing::random_tensor;

TEST(Tensor, SizeEqualsShapeProduct) {
  for (const Shape& s : {Shape{1}, Shape{3, 4}, Shape{2, 3, 5}, Shape{1, 1, 7, 2}}) {
    Tensor t(s);
    EXPECT_EQ(t.size(), shape_numel(s));
    EXPECT_EQ(t.shape(), s);
  }
  Tensor d;
  EXPECT_EQ(d.shape(), Shape{1});
  EXPECT_EQ(d[0], 0.0);
}

TEST(Tensor, RejectsInvalidShapes) {
  EXPECT_THROW(Tensor(Shape{}), DimensionError);
  EXPECT_THROW(Tensor(Shape{3, 0}), DimensionError);
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  EXPECT_THROW(Tensor({2}).reshaped({3}), DimensionError);
}

TEST(Tensor, ReshapeKeepsData) {
  const Tensor t = random_tensor({2, 6}, 3);
  const Tensor r = t.reshaped({3, 4});
  EXPECT_EQ(r.shape(), (Shape{3, 4}));
  EXPECT_EQ(r.values(), t.values());
}

TEST(Tensor, FiniteCheck) {
  Tensor t({3}, 1.0);
  EXPECT_TRUE(t.all_finite());
  t[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(t.all_finite());
  t[1] = std::numeric_limits<double>::infinity();
  EXPECT_FALSE(t.all_finite());
}

TEST(Tensor, VectorHelpers) {
  const double a[] = {1, 2, 3};
  const double b[] = {4, 5, 6};
  EXPECT_DOUBLE_EQ(dot(a, b), 32.0);
  EXPECT_DOUBLE_EQ(squared_distance(a, b), 27.0);
  EXPECT_DOUBLE_EQ(l2_norm(a), std::sqrt(14.0));
}

TEST(Tnsr, RoundTripIsBitExact) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Tensor t = random_tensor({2, 3, 4}, seed, -1e6, 1e6);
    t[0] = 0.1;
    t[1] = -0.0;
    t[2] = std::numeric_limits<double>::denorm_min();
    t[3] = std::numeric_limits<double>::max();
    std::stringstream ss;
    write_tnsr(ss, t);
    const Tensor back = read_tnsr(ss);
    ASSERT_EQ(back.shape(), t.shape());
    EXPECT_EQ(std::memcmp(back.data().data(), t.data().data(), t.size() * sizeof(double)), 0);
  }
}

TEST(Tnsr, HeaderLayout) {
  const Tensor t = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  std::stringstream ss;
  write_tnsr(ss, t);
  const std::string bytes = ss.str();
  ASSERT_EQ(bytes.size(), 4u + 4u + 1u + 1u + 2u * 8u + 6u * 8u);
  EXPECT_EQ(bytes.substr(0, 4), "TNSR");
  EXPECT_EQ(bytes[4], 1);  // version, little-endian
  EXPECT_EQ(bytes[5], 0);
  EXPECT_EQ(bytes[8], 0);  // dtype f64
  EXPECT_EQ(bytes[9], 2);  // ndims
  EXPECT_EQ(bytes[10], 2);  // first dim, little-endian u64
  EXPECT_EQ(bytes[18], 3);
  double first;
  std::memcpy(&first, bytes.data() + 26, 8);
  EXPECT_EQ(first, 1.0);
}

TEST(Tnsr, RejectsCorruptStreams) {
  std::stringstream bad_magic("XXXX");
  EXPECT_THROW(read_tnsr(bad_magic), IoError);

  std::stringstream ss;
  write_tnsr(ss, Tensor({4}, 2.0));
  std::string bytes = ss.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_tnsr(truncated), IoError);

  std::string v2 = bytes;
  v2[4] = 2;
  std::stringstream wrong_version(v2);
  EXPECT_THROW(read_tnsr(wrong_version), IoError);

  std::string dt = bytes;
  dt[8] = 1;
  std::stringstream wrong_dtype(dt);
  EXPECT_THROW(read_tnsr(wrong_dtype), IoError);
}

TEST(Tnsr, BlobRoundTrip) {
  std::stringstream ss;
  write_blob(ss, "hello\nworld");
  write_blob(ss, "");
  EXPECT_EQ(read_blob(ss), "hello\nworld");
  EXPECT_EQ(read_blob(ss), "");
}

TEST(Rng, DeriveSeedIsDeterministicAndSpreads) {
  EXPECT_EQ(derive_seed(1, "pretrain"), derive_seed(1, "pretrain"));
  EXPECT_NE(derive_seed(1, "pretrain"), derive_seed(1, "split"));
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, UniformMoments) {
  Rng rng(11);
  const int n = 100000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    s += u;
    s2 += u * u;
  }
  const double mean = s / n;
  EXPECT_NEAR(mean, 0.5, 3.0 * std::sqrt(1.0 / 12.0 / n) * 2);
  EXPECT_NEAR(s2 / n - mean * mean, 1.0 / 12.0, 2e-3);
}

TEST(Rng, BelowIsInRangeAndShuffleIsPermutation) {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) EXPECT_LT(rng.below(7), 7u);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  rng.shuffle(v.begin(), v.end());
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(KeyValues, CanonicalTextIsSortedAndRoundTrips) {
  KeyValues kv;
  kv.set("zeta", 0.1);
  kv.set("alpha", std::uint64_t{3});
  kv.set("flag", true);
  kv.set("name", "svm");
  EXPECT_EQ(kv.canonical_text(), "alpha=3\nflag=true\nname=svm\nzeta=0.1\n");
  EXPECT_EQ(KeyValues::parse(kv.canonical_text()), kv);
  EXPECT_DOUBLE_EQ(kv.get_double("zeta"), 0.1);
  EXPECT_EQ(kv.get_u64("alpha"), 3u);
  EXPECT_TRUE(kv.get_bool("flag"));
  EXPECT_THROW(kv.get("missing"), ConfigError);
  EXPECT_THROW(kv.get_u64("name"), ConfigError);
}

TEST(KeyValues, FormatDoubleRoundTrips) {
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const double v = (rng.uniform() - 0.5) * std::pow(10.0, rng.uniform(-20, 20));
    EXPECT_EQ(parse_double(format_double(v), "test"), v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
}

TEST(Hashing, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(short_hash("abc"), "ba7816bf8f01cfea");
}
