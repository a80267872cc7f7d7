#ifndef VOA_AGREEMENT_VALUE_HPP_
#define VOA_AGREEMENT_VALUE_HPP_

#include "appraisals.hpp"
#include "core_model.hpp"
#include "prediction.hpp"
#include "preference_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

namespace voa {

/// Predicted group agreements: v*_ij per cell (row-major by option) and the
/// non-normalised w~*_j per criterion (SWING mode only).
struct Predictions {
  std::vector<double> cells;
  std::vector<double> weights;
};

[[nodiscard]] inline auto predict_all(DecisionProblem const& problem, AppraisalStore const& store,
                                      PredictorChoice const& choice) -> Predictions {
  auto out = Predictions{};
  auto const n = problem.n_options();
  auto const m = problem.n_criteria();
  out.cells.resize(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      auto values = store.cell_values(i, j);
      if (values.empty()) {
        out.cells[i * m + j] = (kScaleMin + kScaleMax) / 2.0;
        continue;
      }
      auto c = choice;
      if (c.kind == PredictorKind::proposed) {
        c.proposed = store.proposed(i, j);
      }
      out.cells[i * m + j] = predict(values, c);
    }
  }
  if (!problem.has_fixed_weights()) {
    auto const& swing = problem.swing();
    out.weights.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      auto values = store.weight_values(j);
      if (swing.reference == j) {
        out.weights[j] = kReferenceSwing;
      } else if (values.empty()) {
        out.weights[j] = (swing.ranges[j].lo + swing.ranges[j].hi) / 2.0;
      } else {
        auto c = choice;
        if (c.kind == PredictorKind::proposed) {
          c.kind = c.fallback;
        }
        out.weights[j] = predict(values, c);
      }
    }
  }
  return out;
}

/// v*_ij as it stands now: the agreed value once known, otherwise the
/// prediction pulled into the current (tightened) range.
[[nodiscard]] inline auto effective_cell(SessionState const& state, Predictions const& pred, std::size_t i,
                                         std::size_t j) -> double {
  if (auto it = state.agreed_cells().find({i, j}); it != state.agreed_cells().end()) {
    return it->second;
  }
  return state.cell(i, j).clamp(pred.cells.at(i * state.n_criteria() + j));
}

[[nodiscard]] inline auto effective_raw_weight(SessionState const& state, Predictions const& pred, std::size_t j)
    -> double {
  if (auto it = state.agreed_weights().find(j); it != state.agreed_weights().end()) {
    return it->second;
  }
  return state.weight_range(j).clamp(pred.weights.at(j));
}

/// Normalised w*_j; the fixed weights themselves under complete weight information.
[[nodiscard]] inline auto predicted_weights(SessionState const& state, Predictions const& pred)
    -> std::vector<double> {
  if (state.fixed_weights_mode()) {
    return state.context().weights;
  }
  auto w = std::vector<double>(state.n_criteria());
  for (std::size_t j = 0; j < w.size(); ++j) {
    w[j] = effective_raw_weight(state, pred, j);
  }
  auto const total = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(total > 0.0)) {
    throw model_error("predicted weights sum to zero");
  }
  for (auto& v : w) {
    v /= total;
  }
  return w;
}

/// V*_i, or V^a_i once the group has agreed on the whole option.
[[nodiscard]] inline auto predicted_value(SessionState const& state, Predictions const& pred, std::size_t i,
                                          std::vector<double> const& w_star) -> double {
  if (auto agreed = state.agreed_option_value(i)) {
    return *agreed;
  }
  auto v = 0.0;
  for (std::size_t j = 0; j < state.n_criteria(); ++j) {
    v += w_star[j] * effective_cell(state, pred, i, j);
  }
  return state.option_range(i).clamp(v);
}

[[nodiscard]] inline auto predicted_values(SessionState const& state, Predictions const& pred)
    -> std::vector<double> {
  auto const w = predicted_weights(state, pred);
  auto out = std::vector<double>(state.n_options());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = predicted_value(state, pred, i, w);
  }
  return out;
}

struct Borderline {
  double value = 0.0;
  bool heuristic = true;
};

[[nodiscard]] inline auto borderline_mcda(std::span<const double> predicted) -> Borderline {
  if (predicted.empty()) {
    throw model_error("no options to place a borderline between");
  }
  return {*std::max_element(predicted.begin(), predicted.end()), true};
}

[[nodiscard]] inline auto borderline_mcda(SessionState const& state, Predictions const& pred) -> Borderline {
  return borderline_mcda(predicted_values(state, pred));
}

/// Budget cut in value-for-money terms: walk options by descending r*,
/// accumulating cost, and average the ratio of the last option that fits
/// completely with that of the first one that only fits partially. Empty
/// when everything fits.
[[nodiscard]] inline auto borderline_pda(std::span<const double> ratios, std::span<const double> costs,
                                         double budget) -> std::optional<Borderline> {
  auto order = std::vector<std::size_t>(ratios.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return ratios[a] > ratios[b]; });
  auto spent = 0.0;
  auto const tol = 1e-9 * std::max(1.0, budget);
  std::optional<double> last_fitting;
  for (auto i : order) {
    if (spent + costs[i] <= budget + tol) {
      spent += costs[i];
      last_fitting = ratios[i];
      continue;
    }
    if (!last_fitting) {
      return Borderline{ratios[i], true};
    }
    return Borderline{(*last_fitting + ratios[i]) / 2.0, true};
  }
  return std::nullopt;
}

[[nodiscard]] inline auto predicted_ratios(SessionState const& state, Predictions const& pred)
    -> std::vector<double> {
  auto v = predicted_values(state, pred);
  auto const& options = state.problem().options;
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] /= options[i].cost;
  }
  return v;
}

[[nodiscard]] inline auto borderline_pda(SessionState const& state, Predictions const& pred)
    -> std::optional<Borderline> {
  auto const& problem = state.problem();
  if (!problem.budget) {
    throw model_error("portfolio borderline needs a budget");
  }
  auto costs = problem.costs();
  return borderline_pda(predicted_ratios(state, pred), costs, *problem.budget);
}

/// Options whose bar still straddles the borderline. Score bars use the open
/// interval, so an option whose bound touches phi counts as settled;
/// value-for-money bars use the closed interval.
[[nodiscard]] inline auto straddlers(SessionState const& state, double phi) -> std::vector<bool> {
  auto out = std::vector<bool>(state.n_options());
  auto const portfolio = state.problem().is_portfolio();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = portfolio ? state.ratio_range(i).contains(phi) : state.option_range(i).contains_open(phi);
  }
  return out;
}

/// State after assuming every criterion score of option i takes its
/// predicted agreement.
[[nodiscard]] inline auto hypothesize_option(SessionState state, Predictions const& pred, std::size_t i)
    -> SessionState {
  for (std::size_t j = 0; j < state.n_criteria(); ++j) {
    state.assume_cell(i, j, effective_cell(state, pred, i, j));
  }
  state.propagate();
  return state;
}

/// State after assuming criterion j's non-normalised weight takes its
/// predicted agreement.
[[nodiscard]] inline auto hypothesize_weight(SessionState state, Predictions const& pred, std::size_t j)
    -> SessionState {
  state.assume_weight(j, effective_raw_weight(state, pred, j));
  state.propagate();
  return state;
}

namespace detail {

inline auto count_true(std::vector<bool> const& v) -> int {
  return static_cast<int>(std::count(v.begin(), v.end(), true));
}

}  // namespace detail

/// Number of other options that straddle phi now and stop straddling once
/// option i is assumed to take its predicted scores.
[[nodiscard]] inline auto g_a_option(SessionState const& state, Predictions const& pred, std::size_t i, double phi)
    -> int {
  auto before = straddlers(state, phi);
  auto after = straddlers(hypothesize_option(state, pred, i), phi);
  auto cleared = 0;
  for (std::size_t k = 0; k < before.size(); ++k) {
    if (k != i && before[k] && !after[k]) {
      ++cleared;
    }
  }
  return cleared;
}

/// |I| minus the number of options still straddling phi under the hypothesis.
[[nodiscard]] inline auto g_a_option_formula(SessionState const& state, Predictions const& pred, std::size_t i,
                                             double phi) -> int {
  auto after = straddlers(hypothesize_option(state, pred, i), phi);
  return static_cast<int>(after.size()) - detail::count_true(after);
}

[[nodiscard]] inline auto g_a_mcda(SessionState const& state, Predictions const& pred, std::size_t i, double phi)
    -> int {
  return g_a_option(state, pred, i, phi);
}

[[nodiscard]] inline auto g_a_pda(SessionState const& state, Predictions const& pred, std::size_t i, double phi)
    -> int {
  return g_a_option(state, pred, i, phi);
}

[[nodiscard]] inline auto g_b_mcda(SessionState const& state, std::size_t i, double phi) -> double {
  return state.option_range(i).hi - phi;
}

/// Distance from phi to the nearer end of the ratio bar; negative when the
/// bar misses phi.
[[nodiscard]] inline auto g_b_pda(RatioRange bar, double phi) -> double {
  auto const d = std::min(std::abs(phi - bar.lo), std::abs(bar.hi - phi));
  return bar.contains(phi) ? d : -d;
}

[[nodiscard]] inline auto g_b_pda(SessionState const& state, std::size_t i, double phi) -> double {
  return g_b_pda(state.ratio_range(i), phi);
}

/// |I| minus the options that still straddle phi once weight j is assumed
/// at its predicted agreement.
[[nodiscard]] inline auto g_a_weights(SessionState const& state, Predictions const& pred, std::size_t j, double phi)
    -> int {
  if (state.fixed_weights_mode()) {
    throw model_error("weight hypotheses need SWING weight ranges");
  }
  auto after = straddlers(hypothesize_weight(state, pred, j), phi);
  return static_cast<int>(after.size()) - detail::count_true(after);
}

[[nodiscard]] inline auto g_a_weights_mcda(SessionState const& state, Predictions const& pred, std::size_t j,
                                           double phi) -> int {
  return g_a_weights(state, pred, j, phi);
}

[[nodiscard]] inline auto g_a_weights_pda(SessionState const& state, Predictions const& pred, std::size_t j,
                                          double phi) -> int {
  return g_a_weights(state, pred, j, phi);
}

[[nodiscard]] inline auto g_b_weights_mcda(SessionState const& state, Predictions const& pred, std::size_t j,
                                           double phi) -> double {
  if (state.fixed_weights_mode()) {
    throw model_error("weight hypotheses need SWING weight ranges");
  }
  auto h = hypothesize_weight(state, pred, j);
  auto best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < h.n_options(); ++i) {
    best = std::max(best, h.option_range(i).hi - phi);
  }
  return best;
}

/// Width of criterion j's normalised weight range.
[[nodiscard]] inline auto g_b_weights_pda(SessionState const& state, std::size_t j) -> double {
  if (state.fixed_weights_mode()) {
    throw model_error("weight ranges are undefined under fixed weights");
  }
  return normalised_weight_bounds(state.corners(), state.n_criteria()).at(j).width();
}

enum class TargetKind { option, criterion };

struct RankedTarget {
  TargetKind kind = TargetKind::option;
  std::size_t index = 0;
  int g_a = 0;
  double g_b = 0.0;
};

/// How criteria with equal g_A are ordered in single-choice problems:
/// by normalised weight range width (as in portfolio problems) or by the
/// largest upper bound left above phi after the hypothesis.
enum class WeightTieBreak { range_width, max_excess };

struct RecommendOptions {
  WeightTieBreak weight_tie_break = WeightTieBreak::range_width;
};

struct Recommendation {
  RankedTarget target;
  double phi = 0.0;
  std::vector<RankedTarget> ranked;
};

/// Targets still worth discussing: undetermined options nobody has agreed on
/// yet, or, with incomplete weights, criteria whose weight is still open.
[[nodiscard]] inline auto candidate_options(SessionState const& state) -> std::vector<std::size_t> {
  auto out = std::vector<std::size_t>{};
  for (std::size_t i = 0; i < state.n_options(); ++i) {
    if (state.status(i) == OptionStatus::undetermined && !state.option_agreed(i)) {
      out.push_back(i);
    }
  }
  return out;
}

[[nodiscard]] inline auto candidate_criteria(SessionState const& state) -> std::vector<std::size_t> {
  auto out = std::vector<std::size_t>{};
  if (state.fixed_weights_mode()) {
    return out;
  }
  for (std::size_t j = 0; j < state.n_criteria(); ++j) {
    if (!state.agreed_weights().contains(j) && !state.weight_range(j).degenerate()) {
      out.push_back(j);
    }
  }
  return out;
}

/// Borderline for the current state, or nothing when a portfolio problem's
/// options all fit into the budget.
[[nodiscard]] inline auto current_borderline(SessionState const& state, Predictions const& pred)
    -> std::optional<Borderline> {
  if (state.problem().is_portfolio()) {
    return borderline_pda(state, pred);
  }
  return borderline_mcda(state, pred);
}

/// Lexicographic (g_A, g_B) choice of the next target, ties going to the
/// target declared first. Returns nothing when there is nothing left to
/// discuss. Under incomplete weights criteria are ranked first; options are
/// ranked once every weight is settled.
[[nodiscard]] inline auto recommend(SessionState const& state, Predictions const& pred,
                                    RecommendOptions const& opts = {}) -> std::optional<Recommendation> {
  if (resolved(state)) {
    return std::nullopt;
  }
  auto phi = current_borderline(state, pred);
  if (!phi) {
    return std::nullopt;
  }
  auto const portfolio = state.problem().is_portfolio();
  auto ranked = std::vector<RankedTarget>{};
  auto criteria = candidate_criteria(state);
  if (!criteria.empty()) {
    for (auto j : criteria) {
      auto t = RankedTarget{TargetKind::criterion, j, g_a_weights(state, pred, j, phi->value), 0.0};
      t.g_b = portfolio || opts.weight_tie_break == WeightTieBreak::range_width
                  ? g_b_weights_pda(state, j)
                  : g_b_weights_mcda(state, pred, j, phi->value);
      ranked.push_back(t);
    }
  } else {
    for (auto i : candidate_options(state)) {
      auto t = RankedTarget{TargetKind::option, i, g_a_option(state, pred, i, phi->value), 0.0};
      t.g_b = portfolio ? g_b_pda(state, i, phi->value) : g_b_mcda(state, i, phi->value);
      ranked.push_back(t);
    }
  }
  if (ranked.empty()) {
    return std::nullopt;
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](auto const& a, auto const& b) {
    if (a.g_a != b.g_a) {
      return a.g_a > b.g_a;
    }
    if (a.g_b != b.g_b) {
      return a.g_b > b.g_b;
    }
    return a.index < b.index;
  });
  return Recommendation{ranked.front(), phi->value, std::move(ranked)};
}

}  // namespace voa

#endif  // VOA_AGREEMENT_VALUE_HPP_
