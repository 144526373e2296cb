#include "spen/random.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace spen;

TEST(CounterEngine, SameKeySameSequence) {
  CounterEngine a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto va = a(), vb = b();
    EXPECT_EQ(va, vb);
    EXPECT_NE(va, c());
  }
  EXPECT_EQ(a.counter(), 100u);
}

TEST(RandomStream, ChildrenAreOrderIndependent) {
  const RandomStream root(7);
  const auto k3 = root.child(3).child(1).key();
  const auto k0 = root.child(0).key();
  EXPECT_EQ(root.child(0).key(), k0);
  EXPECT_EQ(root.child(3).child(1).key(), k3);
  EXPECT_NE(root.child(1).child(3).key(), k3);
}

TEST(RandomStream, ChildKeysDistinct) {
  const RandomStream root(1);
  std::set<std::uint64_t> keys;
  for (std::uint64_t i = 0; i < 1000; ++i) keys.insert(root.child(i).key());
  for (std::uint64_t i = 0; i < 1000; ++i) keys.insert(root.child(i).child(0).key());
  EXPECT_EQ(keys.size(), 2000u);
}

TEST(RandomStream, PathRecordsIndices) {
  const RandomStream s = RandomStream(5).child(2).child(9);
  EXPECT_EQ(s.depth(), 2u);
  EXPECT_EQ(s.path().index[0], 2u);
  EXPECT_EQ(s.path().index[1], 9u);
  EXPECT_EQ(s.path().index[2], SeedPath::kUnset);
  EXPECT_EQ(s.seed(), 5u);
}

TEST(RandomStream, NormalDrawsHaveUnitMoments) {
  const RandomStream root(11);
  auto eng = root.engine();
  Vector z(200000);
  fill_standard_normal(eng, z);
  const double mean = z.mean();
  const double var = (z.array() - mean).square().mean();
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(var, 1.0, 0.01);
}
