#include <gtest/gtest.h>

#include <random>

#include "drift/bucketing.hpp"

using namespace drift;

TEST(Bucketing, DefaultTableShape) {
  const auto t = BucketTable::default_table();
  ASSERT_EQ(t.size(), 7u);
  EXPECT_EQ(t.ranges().front(), (Bucket{64, 128}));
  EXPECT_EQ(t.ranges().back(), (Bucket{4096, 8192}));
  EXPECT_EQ(t.max_tokens(), 8192);
}

TEST(Bucketing, BucketOfExamples) {
  const auto t = BucketTable::default_table();
  EXPECT_EQ(bucket_of(100, t), (Bucket{64, 128}));
  EXPECT_EQ(bucket_of(1, t), (Bucket{64, 128}));
  EXPECT_EQ(bucket_of(8192, t), (Bucket{4096, 8192}));
}

TEST(Bucketing, SharedEndpointsBelongToLowerBucket) {
  const auto t = BucketTable::default_table();
  EXPECT_EQ(bucket_of(128, t), (Bucket{64, 128}));
  EXPECT_EQ(bucket_of(129, t), (Bucket{128, 256}));
  EXPECT_EQ(bucket_of(4096, t), (Bucket{2048, 4096}));
  EXPECT_EQ(bucket_of(4097, t), (Bucket{4096, 8192}));
}

TEST(Bucketing, AboveTableIsOutOfRange) {
  const auto t = BucketTable::default_table();
  try {
    bucket_of(8193, t);
    FAIL() << "expected OutOfRange";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::OutOfRange);
  }
  EXPECT_THROW(xi_bucket(10000, 8, t), Error);
}

TEST(Bucketing, XiUniformExamples) {
  EXPECT_EQ(xi_uniform(128, 8), 16);
  EXPECT_EQ(xi_uniform(129, 8), 17);
  EXPECT_EQ(xi_uniform(7, 32), 1);
}

TEST(Bucketing, XiBucketExamples) {
  const auto t = BucketTable::default_table();
  EXPECT_EQ(xi_bucket(100, 8, t), 16);
  EXPECT_EQ(xi_bucket(520, 8, t), 128);
  EXPECT_EQ(xi_bucket(7000, 32, t), 256);
  EXPECT_EQ(xi_bucket(7000, 128, t), 64);
}

TEST(Bucketing, SpecDefaults) {
  const auto t = BucketTable::default_table();
  EXPECT_EQ(CompressionSpec::static_default().budget(300, t), 512 / 8);
  EXPECT_EQ(CompressionSpec::dynamic_default().budget(300, t), 512 / 32);
  EXPECT_THROW((CompressionSpec{0, CompressionMode::Static}.validate()), Error);
}

TEST(Bucketing, InvariantsOverRandomInputs) {
  const auto t = BucketTable::default_table();
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<TokenCount> n_dist(1, 8192), c_dist(1, 256);
  for (int i = 0; i < 2000; ++i) {
    const auto n = n_dist(rng), c1 = c_dist(rng), c2 = c_dist(rng);
    EXPECT_GE(xi_bucket(n, c1, t), xi_uniform(n, c1));
    if (c1 <= c2) EXPECT_GE(xi_bucket(n, c1, t), xi_bucket(n, c2, t));
    const auto b = bucket_of(n, t);
    // Constant on the bucket: compare with the bucket's own upper bound.
    EXPECT_EQ(xi_bucket(n, c1, t), xi_bucket(b.upper, c1, t));
  }
}

TEST(Bucketing, CustomTableValidation) {
  EXPECT_NO_THROW(BucketTable({{0, 10}, {10, 20}}));
  EXPECT_THROW(BucketTable({{0, 10}, {11, 20}}), Error);  // gap
  EXPECT_THROW(BucketTable({{0, 10}, {5, 20}}), Error);   // overlap
  EXPECT_THROW(BucketTable({{10, 10}}), Error);           // empty
  EXPECT_THROW(BucketTable(std::vector<Bucket>{}), Error);
  const BucketTable t({{0, 10}, {10, 20}});
  EXPECT_EQ(bucket_of(10, t), (Bucket{0, 10}));
  EXPECT_EQ(xi_bucket(15, 4, t), 5);
}
