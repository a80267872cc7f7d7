#ifndef VOA_TESTS_SUPPORT_FIXTURES_HPP_
#define VOA_TESTS_SUPPORT_FIXTURES_HPP_

#include <voa/appraisals.hpp>
#include <voa/core_model.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace voa::testing {

inline auto ids(char prefix, std::size_t n) -> std::vector<std::string> {
  auto out = std::vector<std::string>{};
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(std::string(1, prefix) + std::to_string(i + 1));
  }
  return out;
}

/// A problem with `n` options, `m` criteria and `k` participants named
/// o1.., c1.., p1...
inline auto make_problem(std::size_t n, std::size_t m, std::size_t k, WeightSpec weights,
                         std::optional<double> budget = std::nullopt, std::vector<double> costs = {})
    -> DecisionProblem {
  auto p = DecisionProblem{};
  for (auto const& id : ids('o', n)) {
    p.options.push_back({id, id, 1.0});
  }
  for (std::size_t i = 0; i < costs.size(); ++i) {
    p.options[i].cost = costs[i];
  }
  for (auto const& id : ids('c', m)) {
    p.criteria.push_back({id, id});
  }
  for (auto const& id : ids('p', k)) {
    p.participants.push_back({id, id});
  }
  p.weights = std::move(weights);
  p.budget = budget;
  return p;
}

/// The three-participant, four-option, two-criterion table from the worked
/// example: scores[i][j] = {participant 1, 2, 3}.
inline constexpr std::array<std::array<std::array<double, 3>, 2>, 4> kWorkedExample{{
    {{{6, 94, 68}, {64, 100, 50}}},
    {{{0, 10, 90}, {0, 36, 62}}},
    {{{43, 12, 64}, {50, 4, 47}}},
    {{{38, 78, 84}, {36, 38, 64}}},
}};

inline auto worked_example_problem() -> DecisionProblem {
  return make_problem(4, 2, 3, FixedWeights{{0.5, 0.5}});
}

inline auto worked_example_store(DecisionProblem const& p) -> AppraisalStore {
  auto s = AppraisalStore(p);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      for (std::size_t k = 0; k < 3; ++k) {
        s.set_score(i, j, k, kWorkedExample[i][j][k]);
      }
    }
  }
  return s;
}

/// Three unit-cost options, budget 1, criterion 2 the reference at 100 and
/// criterion 1 free over [50, 200]. {o1} is beaten by {o2} for large
/// criterion-1 weights and by {o3} for small ones, but by neither alone.
inline auto joint_dominance_problem() -> DecisionProblem {
  return make_problem(3, 2, 1, SwingRanges{1, {{50, 200}, {100, 100}}}, 1.0);
}

inline constexpr std::array<std::array<double, 2>, 3> kJointDominanceScores{{{50, 50}, {85, 30}, {20, 75}}};

inline auto joint_dominance_store(DecisionProblem const& p) -> AppraisalStore {
  auto s = AppraisalStore(p);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      s.set_score(i, j, 0, kJointDominanceScores[i][j]);
    }
  }
  s.set_weight(1, 0, 100);
  return s;
}

/// Random appraisal table with integer scores. Each cell gets its own
/// centre and spread so that ranges overlap without being identical.
inline auto random_store(DecisionProblem const& p, std::mt19937_64& rng, double max_spread = 30.0)
    -> AppraisalStore {
  auto s = AppraisalStore(p);
  auto centre = std::uniform_real_distribution<double>(5.0, 95.0);
  auto spread = std::uniform_real_distribution<double>(0.0, max_spread);
  auto unit = std::uniform_real_distribution<double>(-1.0, 1.0);
  for (std::size_t i = 0; i < p.n_options(); ++i) {
    for (std::size_t j = 0; j < p.n_criteria(); ++j) {
      auto c = centre(rng);
      auto w = spread(rng);
      for (std::size_t k = 0; k < p.n_participants(); ++k) {
        s.set_score(i, j, k, std::clamp(std::round(c + w * unit(rng)), 1.0, 100.0));
      }
    }
  }
  return s;
}

inline auto random_fixed_weights(std::size_t m, std::mt19937_64& rng) -> FixedWeights {
  auto u = std::uniform_real_distribution<double>(0.1, 1.0);
  auto w = std::vector<double>(m);
  auto sum = 0.0;
  for (auto& v : w) {
    v = u(rng);
    sum += v;
  }
  for (auto& v : w) {
    v /= sum;
  }
  // absorb rounding so the weights sum to 1 within tolerance
  auto total = 0.0;
  for (std::size_t j = 0; j + 1 < m; ++j) {
    total += w[j];
  }
  w.back() = 1.0 - total;
  return FixedWeights{w};
}

}  // namespace voa::testing

#endif  // VOA_TESTS_SUPPORT_FIXTURES_HPP_
