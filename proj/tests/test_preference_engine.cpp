#include <voa/preference_engine.hpp>

#include <gtest/gtest.h>

#include "support/fixtures.hpp"

#include <numeric>
#include <random>

using namespace voa;
using namespace voa::testing;

namespace {

auto worked_state() -> SessionState {
  auto p = worked_example_problem();
  auto s = SessionState::initial(p, worked_example_store(p));
  classify(s);
  return s;
}

void expect_within(Interval inner, Interval outer, char const* what) {
  EXPECT_GE(inner.lo, outer.lo - 1e-9) << what;
  EXPECT_LE(inner.hi, outer.hi + 1e-9) << what;
}

// Every range of `next` lies inside the matching range of `prev`.
void expect_tighter(SessionState const& next, SessionState const& prev) {
  for (std::size_t i = 0; i < prev.n_options(); ++i) {
    for (std::size_t j = 0; j < prev.n_criteria(); ++j) {
      expect_within(next.cell(i, j), prev.cell(i, j), "cell");
    }
    expect_within(next.option_range(i), prev.option_range(i), "option");
  }
  for (std::size_t j = 0; j < prev.weight_ranges().size(); ++j) {
    expect_within(next.weight_range(j), prev.weight_range(j), "weight");
  }
}

auto random_problem(std::mt19937_64& rng, bool swing) -> std::pair<DecisionProblem, AppraisalStore> {
  auto n = 3 + rng() % 5;
  auto m = 2 + rng() % 3;
  auto k = 2 + rng() % 3;
  auto weights = WeightSpec{random_fixed_weights(m, rng)};
  if (swing) {
    auto ranges = std::vector<Interval>(m, Interval{100, 100});
    for (std::size_t j = 1; j < m; ++j) {
      ranges[j] = {20, 180};
    }
    weights = SwingRanges{0, ranges};
  }
  auto p = make_problem(n, m, k, weights);
  auto s = random_store(p, rng, 40.0);
  if (swing) {
    auto u = std::uniform_real_distribution<double>(20, 180);
    for (std::size_t j = 1; j < m; ++j) {
      for (std::size_t q = 0; q < k; ++q) {
        s.set_weight(j, q, std::round(u(rng)));
      }
    }
  }
  return {p, s};
}

}  // namespace

TEST(Relations, WorkedExampleCriterionRelation) {
  auto p = worked_example_problem();
  auto rel = detect_relations(p, worked_example_store(p));
  EXPECT_TRUE(rel.has_criterion(3, 1, 1));
  EXPECT_FALSE(rel.has_criterion(1, 3, 1));
  EXPECT_FALSE(rel.has_criterion(0, 1, 0));
  EXPECT_TRUE(std::is_sorted(rel.criterion.begin(), rel.criterion.end()));
}

TEST(Relations, OverallRelationsUnderFixedWeights) {
  auto p = make_problem(2, 2, 2, FixedWeights{{0.5, 0.5}});
  auto s = AppraisalStore(p);
  // option 1 wins overall for both participants without winning every criterion
  s.set_score(0, 0, 0, 80);
  s.set_score(0, 1, 0, 10);
  s.set_score(1, 0, 0, 20);
  s.set_score(1, 1, 0, 30);
  s.set_score(0, 0, 1, 60);
  s.set_score(0, 1, 1, 40);
  s.set_score(1, 0, 1, 10);
  s.set_score(1, 1, 1, 50);
  auto rel = detect_relations(p, s);
  EXPECT_TRUE(rel.has_overall(0, 1));
  EXPECT_FALSE(rel.has_overall(1, 0));
  EXPECT_FALSE(rel.has_criterion(0, 1, 1));
}

TEST(Relations, WeightRelationsTightenWeights) {
  auto p = make_problem(2, 3, 2, SwingRanges{0, {{100, 100}, {0, 200}, {0, 200}}});
  auto s = AppraisalStore(p);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      for (std::size_t k = 0; k < 2; ++k) {
        s.set_score(i, j, k, 10.0 * static_cast<double>(i + j + k + 1));
      }
    }
  }
  s.set_weight(1, 0, 80);
  s.set_weight(1, 1, 60);
  s.set_weight(2, 0, 50);
  s.set_weight(2, 1, 40);
  auto state = SessionState::initial(p, s);
  EXPECT_EQ(state.weight_range(1), (Interval{60, 80}));
  ASSERT_EQ(state.agree_weight(1, 65), AgreementOutcome::applied);
  EXPECT_EQ(state.weight_range(2), (Interval{40, 50}));
  ASSERT_EQ(state.agree_weight(2, 50), AgreementOutcome::applied);
  EXPECT_EQ(state.agree_weight(0, 90), AgreementOutcome::out_of_range);
}

TEST(Tightening, WorkedExampleInitialBounds) {
  auto s = worked_state();
  EXPECT_EQ(s.option_range(0), (Interval{28, 97}));
  EXPECT_EQ(s.option_range(1), (Interval{0, 76}));
  EXPECT_EQ(s.option_range(2), (Interval{8, 57}));
  EXPECT_EQ(s.option_range(3), (Interval{37, 74}));
}

TEST(Tightening, AgreementPropagatesThroughRelations) {
  auto s = worked_state();
  ASSERT_EQ(s.agree_cell(3, 1, 38), AgreementOutcome::applied);
  EXPECT_EQ(s.cell(1, 1), (Interval{0, 38}));
  EXPECT_EQ(s.option_range(1), (Interval{0, 64}));
  EXPECT_TRUE(s.cell_agreed(3, 1));
  EXPECT_FALSE(s.cell_agreed(1, 1));
}

TEST(Tightening, RejectedAgreementChangesNothing) {
  auto s = worked_state();
  auto before = s;
  EXPECT_EQ(s.agree_cell(0, 0, 99), AgreementOutcome::out_of_range);
  EXPECT_EQ(s, before);
  EXPECT_THROW((void)s.agree_weight(0, 50), model_error);
}

TEST(Tightening, OptionAgreementCapsOverallScore) {
  auto s = worked_state();
  ASSERT_EQ(s.agree_option(3, 60), AgreementOutcome::applied);
  EXPECT_EQ(s.option_range(3), (Interval{60, 60}));
  EXPECT_EQ(s.agree_option(2, 80), AgreementOutcome::out_of_range);
  EXPECT_EQ(s.agreed_option_value(3), std::optional<double>{60});
}

TEST(Tightening, TotalOutOfRangeIsDetected) {
  auto p = make_problem(2, 2, 2, FixedWeights{{0.5, 0.5}});
  auto st = AppraisalStore(p);
  // option 1 beats option 2 overall for both participants
  st.set_score(0, 0, 0, 80);
  st.set_score(0, 1, 0, 10);
  st.set_score(1, 0, 0, 20);
  st.set_score(1, 1, 0, 30);
  st.set_score(0, 0, 1, 60);
  st.set_score(0, 1, 1, 40);
  st.set_score(1, 0, 1, 10);
  st.set_score(1, 1, 1, 60);
  auto s = SessionState::initial(p, st);
  EXPECT_EQ(s.option_range(1), (Interval{20, 40}));
  ASSERT_EQ(s.agree_option(1, 38), AgreementOutcome::applied);
  EXPECT_EQ(s.option_range(0).lo, 38.0);
  // both cells of option 1 at their minimum would put it below option 2
  ASSERT_EQ(s.agree_cell(0, 0, 60), AgreementOutcome::applied);
  EXPECT_EQ(s.agree_cell(0, 1, 10), AgreementOutcome::total_out_of_range);
  EXPECT_FALSE(s.cell_agreed(0, 1));
}

// Random agreement sequences: ranges only shrink, each agreement lands where
// it was put, rejected agreements leave the state untouched, and propagating
// an already propagated state changes nothing.
TEST(Tightening, MonotoneAndIdempotentOverRandomSequences) {
  auto rng = std::mt19937_64{2024};
  for (int seq = 0; seq < 1000; ++seq) {
    auto const swing = seq % 3 == 2;
    auto [p, store] = random_problem(rng, swing);
    auto s = SessionState::initial(p, store);
    auto const n = p.n_options();
    auto const m = p.n_criteria();
    for (int step = 0; step < 8; ++step) {
      auto prev = s;
      auto kind = rng() % 4;
      auto outcome = AgreementOutcome::applied;
      if (swing && kind == 0) {
        auto j = 1 + rng() % (m - 1);
        auto r = s.weight_range(j);
        auto v = std::uniform_real_distribution<double>(r.lo - 10, r.hi + 10)(rng);
        outcome = s.agree_weight(j, v);
        if (outcome == AgreementOutcome::applied) {
          EXPECT_EQ(s.weight_range(j), (Interval{v, v}));
        }
      } else if (!swing && kind == 0) {
        auto i = rng() % n;
        auto r = s.option_range(i);
        auto v = std::uniform_real_distribution<double>(r.lo - 5, r.hi + 5)(rng);
        outcome = s.agree_option(i, v);
        if (outcome == AgreementOutcome::applied) {
          EXPECT_EQ(s.option_range(i), (Interval{v, v}));
        }
      } else {
        auto i = rng() % n;
        auto j = rng() % m;
        auto r = s.cell(i, j);
        auto v = std::round(std::uniform_real_distribution<double>(r.lo - 5, r.hi + 5)(rng));
        outcome = s.agree_cell(i, j, v);
        if (outcome == AgreementOutcome::applied) {
          EXPECT_EQ(s.cell(i, j), (Interval{v, v}));
        }
      }
      if (outcome == AgreementOutcome::applied) {
        expect_tighter(s, prev);
        EXPECT_TRUE(s.consistent());
      } else {
        EXPECT_EQ(s, prev);
      }
      auto again = s;
      again.propagate();
      EXPECT_EQ(again, s);
    }
  }
}

// Agreeing on the same values in a different order reaches the same ranges.
TEST(Tightening, OrderIndependentForScoreAgreements) {
  auto rng = std::mt19937_64{77};
  for (int t = 0; t < 200; ++t) {
    auto [p, store] = random_problem(rng, t % 2 == 1);
    auto base = SessionState::initial(p, store);
    auto picks = std::vector<std::tuple<std::size_t, std::size_t, double>>{};
    auto forward = base;
    for (int step = 0; step < 5; ++step) {
      auto i = rng() % p.n_options();
      auto j = rng() % p.n_criteria();
      auto r = forward.cell(i, j);
      auto v = std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
      if (forward.agree_cell(i, j, v) == AgreementOutcome::applied) {
        picks.emplace_back(i, j, v);
      }
    }
    auto backward = base;
    for (auto it = picks.rbegin(); it != picks.rend(); ++it) {
      ASSERT_EQ(backward.agree_cell(std::get<0>(*it), std::get<1>(*it), std::get<2>(*it)), AgreementOutcome::applied);
    }
    for (std::size_t i = 0; i < p.n_options(); ++i) {
      for (std::size_t j = 0; j < p.n_criteria(); ++j) {
        EXPECT_EQ(forward.cell(i, j), backward.cell(i, j));
      }
      EXPECT_NEAR(forward.option_range(i).lo, backward.option_range(i).lo, 1e-9);
      EXPECT_NEAR(forward.option_range(i).hi, backward.option_range(i).hi, 1e-9);
    }
  }
}

TEST(Dominance, ProseAndPrintedRules) {
  auto precise = Interval{5, 5};
  EXPECT_FALSE(strict_dominates(precise, precise));
  EXPECT_FALSE(strict_dominates(precise, precise, DominanceRule::printed));
  EXPECT_TRUE(strict_dominates(Interval{5, 8}, Interval{3, 5}));
  EXPECT_TRUE(strict_dominates(Interval{5, 8}, Interval{3, 5}, DominanceRule::printed));
  EXPECT_TRUE(strict_dominates(Interval{5, 5}, Interval{2, 5}));
  EXPECT_FALSE(strict_dominates(Interval{5, 5}, Interval{2, 5}, DominanceRule::printed));
  EXPECT_FALSE(strict_dominates(Interval{4, 9}, Interval{3, 5}));
}

TEST(Dominance, WorkedExampleStartsUnresolved) {
  auto s = worked_state();
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(s.status(i), OptionStatus::undetermined);
  }
  EXPECT_FALSE(resolved(s));
}

TEST(Dominance, ResolvesOnceOneOptionBeatsAll) {
  auto s = worked_state();
  ASSERT_EQ(s.agree_option(0, 90), AgreementOutcome::applied);
  ASSERT_EQ(s.agree_option(3, 60), AgreementOutcome::applied);
  classify(s);
  EXPECT_EQ(s.status(0), OptionStatus::robust);
  EXPECT_EQ(s.status(2), OptionStatus::dominated);
  EXPECT_EQ(s.status(3), OptionStatus::dominated);
  EXPECT_TRUE(resolved(s));
}

// Whenever a dominates b, no allocation inside the current ranges (and, under
// SWING weights, no weight inside the box) lets b beat a.
TEST(Dominance, SoundAgainstSampledAllocations) {
  auto rng = std::mt19937_64{5};
  auto checked = 0;
  for (int t = 0; t < 300; ++t) {
    auto swing = t % 2 == 1;
    auto [p, store] = random_problem(rng, swing);
    auto s = SessionState::initial(p, store);
    auto const n = p.n_options();
    auto const m = p.n_criteria();
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        if (!option_dominates(s, a, b)) {
          continue;
        }
        ++checked;
        for (int sample = 0; sample < 50; ++sample) {
          auto w = std::vector<double>(m);
          if (swing) {
            auto sum = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
              auto r = s.weight_range(j);
              w[j] = std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
              sum += w[j];
            }
            for (auto& v : w) {
              v /= sum;
            }
          } else {
            w = p.fixed_weights();
          }
          auto va = 0.0;
          auto vb = 0.0;
          for (std::size_t j = 0; j < m; ++j) {
            auto ca = s.cell(a, j);
            auto cb = s.cell(b, j);
            va += w[j] * std::uniform_real_distribution<double>(ca.lo, ca.hi)(rng);
            vb += w[j] * std::uniform_real_distribution<double>(cb.lo, cb.hi)(rng);
          }
          EXPECT_GE(va, vb - 1e-9);
        }
      }
    }
  }
  EXPECT_GT(checked, 50);
}

// Under SWING weights with no overall-level bounds, corner dominance is
// exact: when it fails, some box corner with extreme scores favours b.
TEST(Dominance, CornerDominanceIsTight) {
  auto rng = std::mt19937_64{6};
  for (int t = 0; t < 300; ++t) {
    auto [p, store] = random_problem(rng, true);
    auto s = SessionState::initial(p, store);
    auto const m = p.n_criteria();
    for (std::size_t a = 0; a < p.n_options(); ++a) {
      for (std::size_t b = 0; b < p.n_options(); ++b) {
        if (a == b) {
          continue;
        }
        auto worst = 1e9;
        auto best = -1e9;
        auto free = std::vector<std::size_t>{};
        for (std::size_t j = 0; j < m; ++j) {
          if (!s.weight_range(j).degenerate()) {
            free.push_back(j);
          }
        }
        for (std::size_t mask = 0; mask < (std::size_t{1} << free.size()); ++mask) {
          auto raw = std::vector<double>(m);
          for (std::size_t j = 0; j < m; ++j) {
            raw[j] = s.weight_range(j).lo;
          }
          for (std::size_t q = 0; q < free.size(); ++q) {
            if ((mask >> q) & 1U) {
              raw[free[q]] = s.weight_range(free[q]).hi;
            }
          }
          auto total = std::accumulate(raw.begin(), raw.end(), 0.0);
          auto lo = 0.0;
          auto hi = 0.0;
          for (std::size_t j = 0; j < m; ++j) {
            lo += raw[j] / total * (s.cell(a, j).lo - s.cell(b, j).hi);
            hi += raw[j] / total * (s.cell(a, j).hi - s.cell(b, j).lo);
          }
          worst = std::min(worst, lo);
          best = std::max(best, hi);
        }
        auto expected = worst >= -1e-9 && best > 1e-9;
        EXPECT_EQ(corner_dominates(s.cells_of(a), s.cells_of(b), s.corners()), expected);
      }
    }
  }
}
