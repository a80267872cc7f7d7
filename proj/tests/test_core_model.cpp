#include <voa/appraisals.hpp>
#include <voa/core_model.hpp>
#include <voa/problem_json.hpp>

#include <gtest/gtest.h>

#include "support/fixtures.hpp"

#include <random>

using namespace voa;
using voa::testing::make_problem;

TEST(Interval, BasicQueries) {
  auto r = Interval{2.0, 5.0};
  EXPECT_DOUBLE_EQ(r.width(), 3.0);
  EXPECT_FALSE(r.degenerate());
  EXPECT_TRUE(r.contains(2.0));
  EXPECT_FALSE(r.contains_open(2.0));
  EXPECT_TRUE(r.contains_open(3.0));
  EXPECT_DOUBLE_EQ(r.clamp(9.0), 5.0);
  EXPECT_THROW((void)make_range(3.0, 1.0), model_error);
}

TEST(OverallRange, WeightedSumOfBounds) {
  auto ranges = std::vector<ScoreRange>{{6, 94}, {50, 100}};
  auto w = std::vector<double>{0.5, 0.5};
  auto r = overall_range(ranges, w);
  EXPECT_DOUBLE_EQ(r.lo, 28.0);
  EXPECT_DOUBLE_EQ(r.hi, 97.0);
  EXPECT_THROW((void)overall_range(ranges, std::vector<double>{1.0}), model_error);
}

TEST(ValueForMoney, DividesByCost) {
  auto r = value_for_money(Interval{10.0, 30.0}, 4.0);
  EXPECT_DOUBLE_EQ(r.lo, 2.5);
  EXPECT_DOUBLE_EQ(r.hi, 7.5);
  EXPECT_THROW((void)value_for_money(Interval{1.0, 2.0}, 0.0), model_error);
}

TEST(WeightCorners, NormalisedBoxVertices) {
  auto spec = SwingRanges{0, {{100, 100}, {50, 200}}};
  auto c = weight_corners(spec);
  ASSERT_EQ(c.size(), 2U);
  EXPECT_NEAR(c.corners[0][0], 100.0 / 150.0, 1e-12);
  EXPECT_NEAR(c.corners[1][1], 200.0 / 300.0, 1e-12);
  auto b = normalised_weight_bounds(c, 2);
  EXPECT_NEAR(b[1].lo, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(b[1].hi, 2.0 / 3.0, 1e-12);
}

TEST(WeightCorners, DuplicateNormalisationsCollapse) {
  // scaling every weight by the same factor gives the same normalised corner
  auto ranges = std::vector<Interval>{{1, 2}, {1, 2}};
  auto c = weight_corners(ranges);
  EXPECT_EQ(c.size(), 3U);
}

TEST(WeightCorners, CornersSumToOne) {
  auto rng = std::mt19937_64{7};
  auto u = std::uniform_real_distribution<double>(0.0, 150.0);
  for (int t = 0; t < 200; ++t) {
    auto ranges = std::vector<Interval>{{100, 100}};
    for (int j = 0; j < 4; ++j) {
      auto a = u(rng);
      auto b = u(rng);
      ranges.push_back({std::min(a, b), std::max(a, b)});
    }
    for (auto const& corner : weight_corners(ranges).corners) {
      auto sum = 0.0;
      for (auto v : corner) {
        EXPECT_GE(v, 0.0);
        sum += v;
      }
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

TEST(OverallRangeUnderWeights, MatchesDenseSampling) {
  auto spec = SwingRanges{0, {{100, 100}, {20, 80}, {0, 150}}};
  auto corners = weight_corners(spec);
  auto scores = std::vector<ScoreRange>{{10, 40}, {50, 60}, {0, 90}};
  auto r = overall_range_under_weights(scores, corners);
  auto lo = 1e9;
  auto hi = -1e9;
  for (int a = 0; a <= 30; ++a) {
    for (int b = 0; b <= 30; ++b) {
      auto w1 = 20.0 + 60.0 * a / 30.0;
      auto w2 = 150.0 * b / 30.0;
      auto total = 100.0 + w1 + w2;
      lo = std::min(lo, (100.0 * 10 + w1 * 50 + w2 * 0) / total);
      hi = std::max(hi, (100.0 * 40 + w1 * 60 + w2 * 90) / total);
    }
  }
  EXPECT_NEAR(r.lo, lo, 1e-9);
  EXPECT_NEAR(r.hi, hi, 1e-9);
}

TEST(DecisionProblem, ValidationRejectsBadInput) {
  EXPECT_THROW(make_problem(1, 2, 1, FixedWeights{{0.5, 0.5}}).validate(), model_error);
  EXPECT_THROW(make_problem(3, 2, 1, FixedWeights{{0.6, 0.5}}).validate(), model_error);
  EXPECT_THROW(make_problem(3, 2, 1, FixedWeights{{1.0}}).validate(), model_error);
  EXPECT_THROW(make_problem(3, 2, 1, SwingRanges{0, {{90, 100}, {0, 50}}}).validate(), model_error);
  EXPECT_THROW(make_problem(3, 2, 1, SwingRanges{std::nullopt, {{0, 0}, {0, 0}}}).validate(), model_error);
  EXPECT_THROW(make_problem(3, 2, 1, FixedWeights{{0.5, 0.5}}, 0.0).validate(), model_error);
  EXPECT_THROW(make_problem(3, 2, 1, FixedWeights{{0.5, 0.5}}, 2.0, {1.0, 0.0, 1.0}).validate(), model_error);
  auto dup = make_problem(3, 2, 1, FixedWeights{{0.5, 0.5}});
  dup.options[1].id = "o1";
  EXPECT_THROW(dup.validate(), model_error);
  EXPECT_NO_THROW(make_problem(3, 2, 1, SwingRanges{1, {{0, 300}, {100, 100}}}, 2.0).validate());
}

TEST(DecisionProblem, JsonRoundTrip) {
  auto p = make_problem(3, 2, 2, SwingRanges{1, {{40, 160}, {100, 100}}}, 5.0, {1.0, 2.0, 3.0});
  auto j = to_json(p);
  auto q = problem_from_json(j);
  EXPECT_EQ(to_json(q), j);
  EXPECT_EQ(q.swing().reference, std::optional<std::size_t>{1});
  EXPECT_DOUBLE_EQ(q.options[2].cost, 3.0);
  EXPECT_THROW((void)problem_from_json(nlohmann::json{{"options", 3}}), model_error);
}

TEST(AppraisalStore, RangesAndOverrides) {
  auto p = voa::testing::worked_example_problem();
  auto s = voa::testing::worked_example_store(p);
  EXPECT_EQ(s.cell_range(0, 0), (Interval{6, 94}));
  EXPECT_EQ(s.cell_values(1, 1), (std::vector<double>{0, 36, 62}));
  s.override_cell(1, 1, 20);
  EXPECT_EQ(s.cell_range(1, 1), (Interval{20, 20}));
  auto empty = AppraisalStore(p);
  EXPECT_EQ(empty.cell_range(0, 0), (Interval{0, 100}));
  EXPECT_FALSE(empty.cell_complete(0, 0));
}
