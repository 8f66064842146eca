#include <gtest/gtest.h>

#include <random>
#include <set>

#include "gshap/coalition.hpp"

using namespace gshap;

namespace {

std::vector<std::uint64_t> bits_of(const std::vector<CoalitionMask>& ms) {
  std::vector<std::uint64_t> out;
  for (auto m : ms) out.push_back(m.bits());
  return out;
}

// n! / (s! (n-s)!) via doubles, small n only.
double choose(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

UtilityTable toy_table() {
  return UtilityTable::complete(GroupPartition({"a", "b", "c"}), Vector{1, 2, 3, 4, 5, 6}, 10);
}

}  // namespace

TEST(Enumeration, ThreeGroupsBySizeThenMask) {
  // {0},{1},{2},{0,1},{0,2},{1,2}
  EXPECT_EQ(bits_of(enumerate_proper_coalitions(3)), (std::vector<std::uint64_t>{1, 2, 4, 3, 5, 6}));
}

TEST(Enumeration, SmallCases) {
  EXPECT_EQ(bits_of(enumerate_proper_coalitions(2)), (std::vector<std::uint64_t>{1, 2}));
  EXPECT_TRUE(enumerate_proper_coalitions(1).empty());
}

TEST(Enumeration, CapacityLimit) {
  EXPECT_THROW(enumerate_proper_coalitions(26), CapacityError);
  EXPECT_THROW(UtilityTable(GroupPartition::anonymous(26), 0.0), CapacityError);
}

TEST(Enumeration, CountDistinctAndProper) {
  for (std::size_t n = 1; n <= 12; ++n) {
    const auto ms = enumerate_proper_coalitions(n);
    ASSERT_EQ(ms.size(), (std::size_t{1} << n) - 2);
    std::set<std::uint64_t> seen;
    for (std::size_t i = 0; i < ms.size(); ++i) {
      EXPECT_FALSE(ms[i].empty());
      EXPECT_LT(ms[i].bits(), CoalitionMask::full(n).bits());
      EXPECT_TRUE(seen.insert(ms[i].bits()).second);
      if (i) EXPECT_TRUE(canonical_less(ms[i - 1], ms[i]));
    }
  }
}

TEST(KernelWeight, Examples) {
  EXPECT_DOUBLE_EQ(kernel_weight(3, 1), 1.0);
  EXPECT_DOUBLE_EQ(kernel_weight(3, 2), 1.0);
  EXPECT_DOUBLE_EQ(kernel_weight(2, 1), 1.0);
  EXPECT_DOUBLE_EQ(kernel_weight(4, 2), 0.5);
  EXPECT_DOUBLE_EQ(kernel_weight(4, 1), 1.0);
}

TEST(KernelWeight, DomainErrors) {
  EXPECT_THROW(kernel_weight(3, 0), DomainError);
  EXPECT_THROW(kernel_weight(3, 3), DomainError);
  EXPECT_THROW(kernel_weight(1, 1), DomainError);
}

TEST(KernelWeight, SymmetricAndMatchesBinomial) {
  for (std::size_t n = 2; n <= 25; ++n)
    for (std::size_t s = 1; s < n; ++s) {
      EXPECT_DOUBLE_EQ(kernel_weight(n, s), kernel_weight(n, n - s));
      EXPECT_NEAR(kernel_weight(n, s), 1.0 / choose(static_cast<int>(n) - 2, static_cast<int>(s) - 1),
                  1e-12 * kernel_weight(n, s));
    }
}

TEST(DesignSystem, ThreeGroupIndicatorMatrix) {
  const auto ds = build_design_system(toy_table());
  const Matrix expected{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0}, {1, 0, 1}, {0, 1, 1}};
  EXPECT_EQ(ds.design_matrix(), expected);
  EXPECT_EQ(ds.weights, (Vector{1, 1, 1, 1, 1, 1}));
  EXPECT_EQ(ds.utilities, (Vector{1, 2, 3, 4, 5, 6}));
  EXPECT_DOUBLE_EQ(ds.grand, 10.0);
}

TEST(DesignSystem, TwoGroupsIsIdentity) {
  const auto ds = build_design_system(UtilityTable::complete(GroupPartition::anonymous(2), Vector{1, 3}, 10));
  EXPECT_EQ(ds.design_matrix(), (Matrix{{1, 0}, {0, 1}}));
}

TEST(DesignSystem, FourGroupKernelDiagonal) {
  const Vector vals(14, 0.0);
  const auto ds = build_design_system(UtilityTable::complete(GroupPartition::anonymous(4), vals, 0));
  const Vector expected{1, 1, 1, 1, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 1, 1, 1, 1};
  EXPECT_EQ(ds.weights, expected);
}

TEST(DesignSystem, ColumnCountsProperty) {
  for (std::size_t n = 2; n <= 10; ++n) {
    const auto ds = build_design_system(UtilityTable::complete(GroupPartition::anonymous(n),
                                                               Vector((std::size_t{1} << n) - 2, 0.0), 0.0));
    const Matrix d = ds.design_matrix();
    ASSERT_EQ(d.rows(), (std::size_t{1} << n) - 2);
    for (std::size_t j = 0; j < n; ++j) {
      double col = 0;
      for (std::size_t i = 0; i < d.rows(); ++i) {
        EXPECT_TRUE(d(i, j) == 0.0 || d(i, j) == 1.0);
        col += d(i, j);
      }
      EXPECT_EQ(col, static_cast<double>((std::size_t{1} << (n - 1)) - 1));
    }
    for (std::size_t i = 0; i < d.rows(); ++i)
      EXPECT_EQ(ds.weights[i], kernel_weight(n, ds.rows[i].size()));
  }
}

TEST(DesignSystem, Deterministic) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  Vector vals(62);
  for (auto& v : vals) v = nd(rng);
  const auto t = UtilityTable::complete(GroupPartition::anonymous(6), vals, 1.5);
  const auto a = build_design_system(t), b = build_design_system(t);
  EXPECT_EQ(a.design_matrix(), b.design_matrix());
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.utilities, b.utilities);
}

TEST(DesignSystem, IncompleteTableNamesMissing) {
  UtilityTable t = toy_table();
  t.mark_missing(CoalitionMask::of({0, 2}));
  try {
    build_design_system(t);
    FAIL() << "expected IncompleteTableError";
  } catch (const IncompleteTableError& e) {
    EXPECT_NE(std::string(e.what()).find("0,2"), std::string::npos) << e.what();
  }
}

TEST(UtilityTable, EmptyAndFullAreImplicit) {
  UtilityTable t = toy_table();
  EXPECT_EQ(t.value(CoalitionMask{}), 0.0);
  EXPECT_EQ(t.value(CoalitionMask::full(3)), 10.0);
  EXPECT_THROW(t.set(CoalitionMask{}, 1.0), InputError);
  EXPECT_THROW(t.set(CoalitionMask::full(3), 1.0), InputError);
  EXPECT_THROW(t.set(CoalitionMask(8), 1.0), InputError);
}

TEST(UtilityTable, MissingEntries) {
  UtilityTable t(GroupPartition::anonymous(3), 1.0);
  EXPECT_EQ(t.missing().size(), 6u);
  EXPECT_FALSE(t.complete());
  t.set(CoalitionMask::of({1}), 0.5);
  EXPECT_FALSE(t.value(CoalitionMask::of({0})).has_value());
  EXPECT_EQ(t.at(CoalitionMask::of({1})), 0.5);
  EXPECT_THROW(t.at(CoalitionMask::of({0})), IncompleteTableError);
}

TEST(GroupPartition, Validation) {
  EXPECT_THROW(GroupPartition({"a", "a"}), InputError);
  EXPECT_THROW(GroupPartition({"a", ""}), InputError);
  EXPECT_THROW(GroupPartition({"a", "b"}, {{"x"}, {"x"}}), InputError);
  const GroupPartition p({"a", "b"}, {{"x", "y"}, {"z"}});
  EXPECT_EQ(p.group_of("z"), 1u);
  EXPECT_FALSE(p.group_of("w").has_value());
  const std::vector<std::string> base{"x", "y", "z", "w"};
  EXPECT_THROW(p.require_covers(base), InputError);
}

TEST(CoalitionMask, Basics) {
  const auto m = CoalitionMask::of({0, 2});
  EXPECT_EQ(m.bits(), 5u);
  EXPECT_EQ(m.size(), 2u);
  EXPECT_TRUE(m.contains(2));
  EXPECT_FALSE(m.contains(1));
  EXPECT_EQ(m.with(1).bits(), 7u);
  EXPECT_EQ(m.without(0).bits(), 4u);
  EXPECT_EQ(m.members(), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(coalition_key(m), "0,2");
}
