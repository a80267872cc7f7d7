#ifndef VOA_TESTS_SUPPORT_PDA_CASES_HPP_
#define VOA_TESTS_SUPPORT_PDA_CASES_HPP_

#include "fixtures.hpp"
#include "oracles.hpp"

#include <voa/preference_engine.hpp>

#include <random>
#include <sstream>
#include <stdexcept>
#include <variant>
#include <string>

namespace voa::testing {

struct PortfolioCase {
  DecisionProblem problem;
  AppraisalStore store;
};

/// Small random portfolio problem: up to 10 options with integer costs and a
/// budget that leaves roughly a third to two thirds of the total unspent.
/// With `swing` set there are three criteria, the last one the reference.
inline auto random_portfolio_case(std::mt19937_64& rng, bool swing) -> PortfolioCase {
  auto const n = 3 + rng() % 8;
  auto const m = swing ? std::size_t{3} : 2 + rng() % 3;
  auto const k = 2 + rng() % 3;
  auto cost = std::uniform_int_distribution<int>(1, 10);
  auto costs = std::vector<double>(n);
  auto total = 0.0;
  for (auto& c : costs) {
    c = cost(rng);
    total += c;
  }
  auto share = std::uniform_real_distribution<double>(0.3, 0.7)(rng);
  auto budget = std::max(1.0, std::round(total * share));
  auto weights = WeightSpec{random_fixed_weights(m, rng)};
  if (swing) {
    weights = SwingRanges{2, {{30, 170}, {30, 170}, {100, 100}}};
  }
  auto p = make_problem(n, m, k, weights, budget, costs);
  auto s = random_store(p, rng, rng() % 2 == 0 ? 10.0 : 35.0);
  if (swing) {
    auto u = std::uniform_real_distribution<double>(30, 170);
    for (std::size_t j = 0; j < 2; ++j) {
      if (rng() % 4 == 0) {
        continue;  // left open: the full SWING range applies
      }
      for (std::size_t q = 0; q < k; ++q) {
        s.set_weight(j, q, std::round(u(rng)));
      }
    }
  }
  return {std::move(p), std::move(s)};
}

inline auto to_set(OptionSet const& s) -> std::set<std::size_t> {
  auto out = std::set<std::size_t>{};
  s.for_each([&](std::size_t i) { out.insert(i); });
  return out;
}

/// Exhaustive classification of the state's current ranges.
inline auto oracle_for(SessionState const& state) -> OracleClassification {
  auto const& p = state.problem();
  auto const n = p.n_options();
  auto costs = p.costs();
  if (p.has_fixed_weights()) {
    auto sc = OracleScenario{};
    for (std::size_t i = 0; i < n; ++i) {
      sc.lo.push_back(state.option_range(i).lo);
      sc.hi.push_back(state.option_range(i).hi);
    }
    return exhaustive_classify({sc}, costs, *p.budget);
  }
  auto cells = std::vector<std::vector<Interval>>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p.n_criteria(); ++j) {
      cells[i].push_back(state.cell(i, j));
    }
  }
  auto const& swing = std::get<SwingRanges>(p.weights);
  auto free = std::vector<std::size_t>{};
  for (std::size_t j = 0; j < p.n_criteria(); ++j) {
    if (j != swing.reference.value()) {
      free.push_back(j);
    }
  }
  if (free.size() == 1) {
    // a phantom criterion with zero weight keeps the two-dimensional oracle usable
    for (auto& row : cells) {
      row.push_back(Interval{0, 0});
    }
    free.push_back(p.n_criteria());
  }
  if (free.size() != 2) {
    throw std::invalid_argument("oracle supports one or two free weights");
  }
  auto box_b = free[1] < p.n_criteria() ? state.weight_range(free[1]) : Interval{0, 0};
  auto w = TwoFreeWeights{free[0], free[1], swing.reference.value(), state.weight_range(free[0]), box_b};
  return exhaustive_classify_swing(cells, w, costs, *p.budget);
}

/// Empty when the engine agrees with the oracle, otherwise a description of
/// the first difference.
inline auto compare_with_oracle(SessionState const& state, PdaOptions opts = {}) -> std::string {
  opts.time_budget = std::chrono::milliseconds{0};
  auto got = pda_classify(state, opts);
  auto want = oracle_for(state);
  auto print = [](std::set<std::size_t> const& s) {
    auto out = std::ostringstream{};
    out << '{';
    for (auto i : s) {
      out << ' ' << i;
    }
    out << " }";
    return out.str();
  };
  auto out = std::ostringstream{};
  if (got.partial) {
    out << "engine reported a partial result; ";
  }
  if (to_set(got.definitely_in) != want.in) {
    out << "in " << print(to_set(got.definitely_in)) << " vs " << print(want.in) << "; ";
  }
  if (to_set(got.definitely_out) != want.out) {
    out << "out " << print(to_set(got.definitely_out)) << " vs " << print(want.out) << "; ";
  }
  if (to_set(got.borderline) != want.borderline) {
    out << "borderline " << print(to_set(got.borderline)) << " vs " << print(want.borderline) << "; ";
  }
  return out.str();
}

}  // namespace voa::testing

#endif  // VOA_TESTS_SUPPORT_PDA_CASES_HPP_
