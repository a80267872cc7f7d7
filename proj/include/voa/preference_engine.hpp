#ifndef VOA_PREFERENCE_ENGINE_HPP_
#define VOA_PREFERENCE_ENGINE_HPP_

#include "appraisals.hpp"
#include "core_model.hpp"
#include "detail/option_set.hpp"
#include "detail/simplex.hpp"

#include <algorithm>
#include <chrono>
#include <compare>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace voa {

inline constexpr double kDominanceTolerance = 1e-9;
inline constexpr double kRelationTolerance = 1e-9;
inline constexpr auto kDefaultTimeBudget = std::chrono::milliseconds{2000};

/// better weakly dominates worse on one criterion, by unanimity.
struct CriterionRelation {
  std::size_t better = 0;
  std::size_t worse = 0;
  std::size_t criterion = 0;
  friend auto operator<=>(CriterionRelation const&, CriterionRelation const&) = default;
};

/// better weakly dominates worse on the overall score, by unanimity.
struct OverallRelation {
  std::size_t better = 0;
  std::size_t worse = 0;
  friend auto operator<=>(OverallRelation const&, OverallRelation const&) = default;
};

/// Every participant gave criterion `better` at least the SWING weight of `worse`.
struct WeightRelation {
  std::size_t better = 0;
  std::size_t worse = 0;
  friend auto operator<=>(WeightRelation const&, WeightRelation const&) = default;
};

struct Relations {
  std::vector<CriterionRelation> criterion;
  std::vector<OverallRelation> overall;
  std::vector<WeightRelation> weight;

  [[nodiscard]] auto has_criterion(std::size_t better, std::size_t worse, std::size_t j) const -> bool {
    return std::binary_search(criterion.begin(), criterion.end(), CriterionRelation{better, worse, j});
  }
  [[nodiscard]] auto has_overall(std::size_t better, std::size_t worse) const -> bool {
    return std::binary_search(overall.begin(), overall.end(), OverallRelation{better, worse});
  }
};

namespace detail {

inline auto participant_weight(DecisionProblem const& p, AppraisalStore const& s, std::size_t j, std::size_t k)
    -> std::optional<double> {
  if (!p.has_fixed_weights() && p.swing().reference == j) {
    return kReferenceSwing;
  }
  return s.weight(j, k);
}

}  // namespace detail

/// Ordinal relations implied by unanimous individual appraisals. Criterion
/// and weight relations need complete appraisals of both cells; overall
/// relations are derived only under fixed weights, where V_ik is defined.
[[nodiscard]] inline auto detect_relations(DecisionProblem const& problem, AppraisalStore const& store)
    -> Relations {
  auto rel = Relations{};
  auto const n = problem.n_options();
  auto const m = problem.n_criteria();
  auto const np = problem.n_participants();
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) {
        continue;
      }
      for (std::size_t j = 0; j < m; ++j) {
        if (!store.cell_complete(a, j) || !store.cell_complete(b, j)) {
          continue;
        }
        auto unanimous = true;
        for (std::size_t k = 0; k < np && unanimous; ++k) {
          unanimous = *store.score(a, j, k) >= *store.score(b, j, k);
        }
        if (unanimous) {
          rel.criterion.push_back({a, b, j});
        }
      }
    }
  }
  if (problem.has_fixed_weights()) {
    auto const& w = problem.fixed_weights();
    auto complete = std::vector<bool>(n, true);
    auto totals = std::vector<double>(n * np, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        complete[i] = complete[i] && store.cell_complete(i, j);
      }
      if (!complete[i]) {
        continue;
      }
      for (std::size_t k = 0; k < np; ++k) {
        for (std::size_t j = 0; j < m; ++j) {
          totals[i * np + k] += w[j] * *store.score(i, j, k);
        }
      }
    }
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        if (a == b || !complete[a] || !complete[b]) {
          continue;
        }
        auto unanimous = true;
        for (std::size_t k = 0; k < np && unanimous; ++k) {
          unanimous = totals[a * np + k] >= totals[b * np + k] - kRelationTolerance;
        }
        if (unanimous) {
          rel.overall.push_back({a, b});
        }
      }
    }
  } else {
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) {
        if (a == b) {
          continue;
        }
        auto unanimous = true;
        for (std::size_t k = 0; k < np && unanimous; ++k) {
          auto wa = detail::participant_weight(problem, store, a, k);
          auto wb = detail::participant_weight(problem, store, b, k);
          unanimous = wa && wb && *wa >= *wb;
        }
        if (unanimous) {
          rel.weight.push_back({a, b});
        }
      }
    }
  }
  return rel;
}

enum class OptionStatus { undetermined, dominated, robust, definitely_in, definitely_out };

[[nodiscard]] inline auto to_string(OptionStatus s) -> char const* {
  switch (s) {
    case OptionStatus::undetermined:
      return "undetermined";
    case OptionStatus::dominated:
      return "dominated";
    case OptionStatus::robust:
      return "robust";
    case OptionStatus::definitely_in:
      return "definitely_in";
    case OptionStatus::definitely_out:
      return "definitely_out";
  }
  return "undetermined";
}

enum class AgreementOutcome {
  applied,
  out_of_range,        // the agreed value lies outside the current range
  total_out_of_range,  // the value fits its cell but leaves no feasible overall score
};

/// Strict dominance flavours. `prose`: lo_a >= hi_b and the two are not the
/// same precise value. `printed`: lo_a >= hi_b and hi_a > hi_b.
enum class DominanceRule { prose, printed };

[[nodiscard]] inline auto strict_dominates(Interval a, Interval b, DominanceRule rule = DominanceRule::prose)
    -> bool {
  if (a.lo < b.hi) {
    return false;
  }
  if (rule == DominanceRule::printed) {
    return a.hi > b.hi;
  }
  return !(a.degenerate() && b.degenerate() && a.lo == b.lo);
}

[[nodiscard]] inline auto strict_dominates(OverallScoreRange const& a, OverallScoreRange const& b,
                                           DominanceRule rule = DominanceRule::prose) -> bool {
  return strict_dominates(a.interval(), b.interval(), rule);
}

/// The immutable part of a workshop model: problem, the appraisals the
/// relations were derived from and the relations themselves.
struct EngineContext {
  DecisionProblem problem;
  Relations relations;
  std::vector<double> weights;  // fixed mode only
};

/// The mutable preference-programming truth: tightened score and weight
/// ranges, recorded agreements and option statuses.
class SessionState {
 public:
  SessionState() = default;

  static auto initial(DecisionProblem const& problem, AppraisalStore const& store) -> SessionState {
    problem.validate();
    auto ctx = std::make_shared<EngineContext>();
    ctx->problem = problem;
    ctx->relations = detect_relations(problem, store);
    if (problem.has_fixed_weights()) {
      ctx->weights = problem.fixed_weights();
    }
    auto s = SessionState{};
    s.ctx_ = std::move(ctx);
    auto const n = problem.n_options();
    auto const m = problem.n_criteria();
    s.cells_.resize(n * m);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        s.cells_[i * m + j] = store.cell_range(i, j);
      }
    }
    auto constexpr inf = std::numeric_limits<double>::infinity();
    s.caps_.assign(n, Interval{-inf, inf});
    if (!problem.has_fixed_weights()) {
      auto const& swing = problem.swing();
      s.weights_.resize(m);
      for (std::size_t j = 0; j < m; ++j) {
        auto values = store.weight_values(j);
        if (swing.reference == j || !store.weights_complete(j) || values.empty()) {
          s.weights_[j] = swing.ranges[j];
        } else {
          auto [lo, hi] = std::minmax_element(values.begin(), values.end());
          s.weights_[j] = {*lo, *hi};
        }
      }
      s.refresh_corners();
    }
    s.status_.assign(n, OptionStatus::undetermined);
    s.propagate();
    return s;
  }

  [[nodiscard]] auto context() const -> EngineContext const& { return *ctx_; }
  [[nodiscard]] auto problem() const -> DecisionProblem const& { return ctx_->problem; }
  [[nodiscard]] auto relations() const -> Relations const& { return ctx_->relations; }
  [[nodiscard]] auto n_options() const -> std::size_t { return ctx_->problem.n_options(); }
  [[nodiscard]] auto n_criteria() const -> std::size_t { return ctx_->problem.n_criteria(); }
  [[nodiscard]] auto fixed_weights_mode() const -> bool { return ctx_->problem.has_fixed_weights(); }

  [[nodiscard]] auto cell(std::size_t i, std::size_t j) const -> ScoreRange { return cells_.at(i * n_criteria() + j); }
  [[nodiscard]] auto cells_of(std::size_t i) const -> std::span<const ScoreRange> {
    return std::span<const ScoreRange>(cells_).subspan(i * n_criteria(), n_criteria());
  }
  [[nodiscard]] auto option_range(std::size_t i) const -> Interval { return ranges_.at(i); }
  [[nodiscard]] auto option_ranges() const -> std::vector<Interval> const& { return ranges_; }
  [[nodiscard]] auto cap(std::size_t i) const -> Interval { return caps_.at(i); }
  [[nodiscard]] auto weight_range(std::size_t j) const -> Interval { return weights_.at(j); }
  [[nodiscard]] auto weight_ranges() const -> std::vector<Interval> const& { return weights_; }
  [[nodiscard]] auto corners() const -> WeightCornerSet const& { return corners_; }

  /// Corner set that applies in either weight mode (a single corner under
  /// fixed weights).
  [[nodiscard]] auto effective_corners() const -> WeightCornerSet {
    if (fixed_weights_mode()) {
      return WeightCornerSet{{ctx_->weights}};
    }
    return corners_;
  }

  [[nodiscard]] auto ratio_range(std::size_t i) const -> RatioRange {
    return value_for_money(ranges_.at(i), problem().options.at(i).cost);
  }

  [[nodiscard]] auto agreed_cells() const -> std::map<std::pair<std::size_t, std::size_t>, double> const& {
    return agreed_cells_;
  }
  [[nodiscard]] auto agreed_options() const -> std::map<std::size_t, double> const& { return agreed_options_; }
  [[nodiscard]] auto agreed_weights() const -> std::map<std::size_t, double> const& { return agreed_weights_; }

  [[nodiscard]] auto cell_agreed(std::size_t i, std::size_t j) const -> bool {
    return agreed_cells_.contains({i, j});
  }

  /// V^a of an option when known: an option-level agreement, or (fixed
  /// weights) agreement on every criterion score.
  [[nodiscard]] auto agreed_option_value(std::size_t i) const -> std::optional<double> {
    if (auto it = agreed_options_.find(i); it != agreed_options_.end()) {
      return it->second;
    }
    if (!fixed_weights_mode()) {
      return std::nullopt;
    }
    auto total = 0.0;
    for (std::size_t j = 0; j < n_criteria(); ++j) {
      auto it = agreed_cells_.find({i, j});
      if (it == agreed_cells_.end()) {
        return std::nullopt;
      }
      total += ctx_->weights[j] * it->second;
    }
    return total;
  }

  [[nodiscard]] auto option_agreed(std::size_t i) const -> bool { return agreed_option_value(i).has_value(); }

  [[nodiscard]] auto status(std::size_t i) const -> OptionStatus { return status_.at(i); }
  [[nodiscard]] auto statuses() const -> std::vector<OptionStatus> const& { return status_; }
  void set_statuses(std::vector<OptionStatus> s) { status_ = std::move(s); }
  [[nodiscard]] auto classification_partial() const -> bool { return partial_; }
  void set_classification_partial(bool p) { partial_ = p; }

  /// Records a criterion score agreement and tightens every range the
  /// ordinal relations reach. Nothing changes unless the outcome is `applied`.
  auto agree_cell(std::size_t i, std::size_t j, double value) -> AgreementOutcome {
    if (!cell(i, j).contains(value)) {
      return AgreementOutcome::out_of_range;
    }
    auto next = *this;
    next.cells_[i * n_criteria() + j] = {value, value};
    next.propagate();
    if (!next.consistent()) {
      return AgreementOutcome::total_out_of_range;
    }
    next.agreed_cells_[{i, j}] = value;
    *this = std::move(next);
    return AgreementOutcome::applied;
  }

  auto agree_option(std::size_t i, double value) -> AgreementOutcome {
    if (!fixed_weights_mode()) {
      throw model_error("option-level agreements require fixed weights");
    }
    if (!option_range(i).contains(value)) {
      return AgreementOutcome::out_of_range;
    }
    auto next = *this;
    next.caps_[i] = {value, value};
    next.propagate();
    if (!next.consistent()) {
      return AgreementOutcome::total_out_of_range;
    }
    next.agreed_options_[i] = value;
    *this = std::move(next);
    return AgreementOutcome::applied;
  }

  auto agree_weight(std::size_t j, double value) -> AgreementOutcome {
    if (fixed_weights_mode()) {
      throw model_error("weight agreements require SWING weight ranges");
    }
    if (!weight_range(j).contains(value)) {
      return AgreementOutcome::out_of_range;
    }
    auto next = *this;
    next.weights_[j] = {value, value};
    next.refresh_corners();
    next.propagate();
    if (!next.consistent()) {
      return AgreementOutcome::total_out_of_range;
    }
    next.agreed_weights_[j] = value;
    *this = std::move(next);
    return AgreementOutcome::applied;
  }

  /// Hypothesis helpers: pin a value (clamped into the current range)
  /// without recording an agreement. Call propagate() afterwards.
  void assume_cell(std::size_t i, std::size_t j, double value) {
    auto& c = cells_.at(i * n_criteria() + j);
    auto v = c.clamp(value);
    c = {v, v};
  }
  void assume_option(std::size_t i, double value) {
    auto v = ranges_.at(i).clamp(value);
    caps_.at(i) = {v, v};
  }
  void assume_weight(std::size_t j, double value) {
    auto& w = weights_.at(j);
    auto v = w.clamp(value);
    w = {v, v};
    refresh_corners();
  }

  /// Constraint propagation to a fixpoint: for every relation better >= worse
  /// the worse side's upper bound cannot exceed the better side's upper bound
  /// and the better side's lower bound cannot fall below the worse side's.
  /// Relations are visited in sorted (better, worse, criterion) order.
  void propagate() {
    auto const m = n_criteria();
    auto changed = true;
    while (changed) {
      changed = false;
      for (auto const& r : ctx_->relations.criterion) {
        auto& b = cells_[r.better * m + r.criterion];
        auto& w = cells_[r.worse * m + r.criterion];
        if (b.hi < w.hi) {
          w.hi = b.hi;
          changed = true;
        }
        if (w.lo > b.lo) {
          b.lo = w.lo;
          changed = true;
        }
      }
      auto weights_changed = false;
      for (auto const& r : ctx_->relations.weight) {
        auto& b = weights_[r.better];
        auto& w = weights_[r.worse];
        if (b.hi < w.hi) {
          w.hi = b.hi;
          weights_changed = true;
        }
        if (w.lo > b.lo) {
          b.lo = w.lo;
          weights_changed = true;
        }
      }
      if (weights_changed) {
        refresh_corners();
        changed = true;
      }
      refresh_ranges();
      for (auto const& r : ctx_->relations.overall) {
        if (ranges_[r.better].hi < caps_[r.worse].hi) {
          caps_[r.worse].hi = ranges_[r.better].hi;
          ranges_[r.worse] = option_range_from_parts(r.worse);
          changed = true;
        }
        if (ranges_[r.worse].lo > caps_[r.better].lo) {
          caps_[r.better].lo = ranges_[r.worse].lo;
          ranges_[r.better] = option_range_from_parts(r.better);
          changed = true;
        }
      }
    }
  }

  /// True when every range is non-empty and every option's criterion
  /// scores admit an overall score inside its overall-level bounds.
  [[nodiscard]] auto consistent() const -> bool {
    for (auto const& c : cells_) {
      if (c.lo > c.hi) {
        return false;
      }
    }
    for (auto const& w : weights_) {
      if (w.lo > w.hi) {
        return false;
      }
    }
    for (std::size_t i = 0; i < n_options(); ++i) {
      auto s = sum_range(i);
      auto const& c = caps_[i];
      if (c.lo > c.hi || s.hi < c.lo - kDominanceTolerance || s.lo > c.hi + kDominanceTolerance) {
        return false;
      }
    }
    return true;
  }

  /// Overall score range implied by the criterion ranges alone.
  [[nodiscard]] auto sum_range(std::size_t i) const -> Interval {
    auto cells = cells_of(i);
    if (fixed_weights_mode()) {
      auto r = overall_range(cells, ctx_->weights);
      return {r.lo, r.hi};
    }
    auto r = overall_range_under_weights(cells, corners_);
    return {r.lo, r.hi};
  }

  friend auto operator==(SessionState const& a, SessionState const& b) -> bool {
    return a.cells_ == b.cells_ && a.caps_ == b.caps_ && a.weights_ == b.weights_ && a.ranges_ == b.ranges_ &&
           a.agreed_cells_ == b.agreed_cells_ && a.agreed_options_ == b.agreed_options_ &&
           a.agreed_weights_ == b.agreed_weights_ && a.status_ == b.status_;
  }

 private:
  void refresh_corners() { corners_ = weight_corners(std::span<const Interval>(weights_)); }

  // Intersects the criterion-derived range with the overall-level bounds.
  // An empty intersection (only reachable through hypotheses) collapses onto
  // the overall-level bound nearest to the criterion range.
  [[nodiscard]] auto option_range_from_parts(std::size_t i) const -> Interval {
    auto s = sum_range(i);
    auto const& c = caps_[i];
    auto lo = std::max(s.lo, c.lo);
    auto hi = std::min(s.hi, c.hi);
    if (lo <= hi) {
      return {lo, hi};
    }
    auto pin = s.hi < c.lo ? c.lo : c.hi;
    return {pin, pin};
  }

  void refresh_ranges() {
    ranges_.resize(n_options());
    for (std::size_t i = 0; i < n_options(); ++i) {
      ranges_[i] = option_range_from_parts(i);
    }
  }

  std::shared_ptr<const EngineContext> ctx_;
  std::vector<ScoreRange> cells_;
  std::vector<Interval> caps_;
  std::vector<Interval> weights_;
  WeightCornerSet corners_;
  std::vector<Interval> ranges_;
  std::map<std::pair<std::size_t, std::size_t>, double> agreed_cells_;
  std::map<std::size_t, double> agreed_options_;
  std::map<std::size_t, double> agreed_weights_;
  std::vector<OptionStatus> status_;
  bool partial_ = false;
};

/// Applies a criterion agreement to a copy of the state.
[[nodiscard]] inline auto tighten_after_criterion_agreement(SessionState state, std::size_t i, std::size_t j,
                                                            double value) -> std::pair<SessionState, AgreementOutcome> {
  auto outcome = state.agree_cell(i, j, value);
  return {std::move(state), outcome};
}

[[nodiscard]] inline auto tighten_after_option_agreement(SessionState state, std::size_t i, double value)
    -> std::pair<SessionState, AgreementOutcome> {
  auto outcome = state.agree_option(i, value);
  return {std::move(state), outcome};
}

/// a strictly dominates b for every feasible weight corner and score
/// allocation: min over corners of sum_j w_j (lo_aj - hi_bj) >= 0 and the
/// two options are not equal everywhere.
[[nodiscard]] inline auto corner_dominates(std::span<const ScoreRange> a, std::span<const ScoreRange> b,
                                           WeightCornerSet const& corners) -> bool {
  auto worst = std::numeric_limits<double>::infinity();
  auto best = -std::numeric_limits<double>::infinity();
  for (auto const& c : corners.corners) {
    auto dmin = 0.0;
    auto dmax = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
      dmin += c[j] * (a[j].lo - b[j].hi);
      dmax += c[j] * (a[j].hi - b[j].lo);
    }
    worst = std::min(worst, dmin);
    best = std::max(best, dmax);
  }
  return worst >= -kDominanceTolerance && best > kDominanceTolerance;
}

[[nodiscard]] inline auto option_dominates(SessionState const& state, std::size_t a, std::size_t b,
                                           DominanceRule rule = DominanceRule::prose) -> bool {
  if (a == b) {
    return false;
  }
  if (strict_dominates(state.option_range(a), state.option_range(b), rule)) {
    return true;
  }
  if (!state.fixed_weights_mode()) {
    return corner_dominates(state.cells_of(a), state.cells_of(b), state.corners());
  }
  return false;
}

/// Robust: strictly dominates every other option. Dominated: strictly
/// dominated by at least one other option.
[[nodiscard]] inline auto mcda_classify(SessionState const& state, DominanceRule rule = DominanceRule::prose)
    -> std::vector<OptionStatus> {
  auto const n = state.n_options();
  auto out = std::vector<OptionStatus>(n, OptionStatus::undetermined);
  for (std::size_t a = 0; a < n; ++a) {
    auto all = true;
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) {
        continue;
      }
      if (option_dominates(state, a, b, rule)) {
        out[b] = OptionStatus::dominated;
      } else {
        all = false;
      }
    }
    if (all) {
      out[a] = OptionStatus::robust;
    }
  }
  return out;
}

// --------------------------------------------------------------------------
// Portfolios

/// Per-scenario option value bounds. Under fixed weights there is a single
/// scenario holding the overall score ranges; under SWING ranges there is one
/// scenario per weight corner.
struct PortfolioScenarios {
  std::vector<std::vector<double>> lo;
  std::vector<std::vector<double>> hi;

  [[nodiscard]] auto n_scenarios() const -> std::size_t { return lo.size(); }
  [[nodiscard]] auto n_options() const -> std::size_t { return lo.empty() ? 0 : lo.front().size(); }

  static auto from_ranges(std::span<const Interval> ranges) -> PortfolioScenarios {
    auto s = PortfolioScenarios{};
    s.lo.emplace_back();
    s.hi.emplace_back();
    for (auto const& r : ranges) {
      s.lo[0].push_back(r.lo);
      s.hi[0].push_back(r.hi);
    }
    return s;
  }

  /// scores: precise or interval criterion scores per option.
  static auto from_corners(std::vector<std::vector<ScoreRange>> const& scores, WeightCornerSet const& corners)
      -> PortfolioScenarios {
    auto s = PortfolioScenarios{};
    for (auto const& c : corners.corners) {
      auto lo = std::vector<double>(scores.size(), 0.0);
      auto hi = std::vector<double>(scores.size(), 0.0);
      for (std::size_t i = 0; i < scores.size(); ++i) {
        for (std::size_t j = 0; j < c.size(); ++j) {
          lo[i] += c[j] * scores[i][j].lo;
          hi[i] += c[j] * scores[i][j].hi;
        }
      }
      s.lo.push_back(std::move(lo));
      s.hi.push_back(std::move(hi));
    }
    return s;
  }
};

[[nodiscard]] inline auto portfolio_scenarios(SessionState const& state) -> PortfolioScenarios {
  if (state.fixed_weights_mode()) {
    return PortfolioScenarios::from_ranges(state.option_ranges());
  }
  auto scores = std::vector<std::vector<ScoreRange>>{};
  for (std::size_t i = 0; i < state.n_options(); ++i) {
    auto c = state.cells_of(i);
    scores.emplace_back(c.begin(), c.end());
  }
  return PortfolioScenarios::from_corners(scores, state.corners());
}

/// p strictly dominates q: in every scenario the options only p holds are
/// worth at least the options only q holds, and somewhere strictly more.
/// Shared options cancel.
[[nodiscard]] inline auto portfolio_dominates(OptionSet const& p, OptionSet const& q, PortfolioScenarios const& sc)
    -> bool {
  auto const only_p = p.minus(q);
  auto const only_q = q.minus(p);
  if (only_p.empty() && only_q.empty()) {
    return false;
  }
  auto worst = std::numeric_limits<double>::infinity();
  auto best = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < sc.n_scenarios(); ++s) {
    auto const& lo = sc.lo[s];
    auto const& hi = sc.hi[s];
    auto dmin = 0.0;
    auto dmax = 0.0;
    only_p.for_each([&](std::size_t i) {
      dmin += lo[i];
      dmax += hi[i];
    });
    only_q.for_each([&](std::size_t i) {
      dmin -= hi[i];
      dmax -= lo[i];
    });
    worst = std::min(worst, dmin);
    best = std::max(best, dmax);
    if (worst < -kDominanceTolerance) {
      return false;
    }
  }
  return best > kDominanceTolerance;
}

/// Whether p1 is dominated jointly by a set of portfolios: no weight in the
/// convex hull of the scenarios keeps p1 at least as good as every
/// competitor. Solved as   max t  s.t.  sum_s lambda_s D_ps >= t,
/// sum_s lambda_s = 1,  lambda >= 0,  where D_ps is p1's most favourable
/// advantage over p in scenario s. A pairwise strict dominator also counts.
[[nodiscard]] inline auto pda_weight_dominated(OptionSet const& p1, std::span<const OptionSet> others,
                                               PortfolioScenarios const& sc) -> bool {
  if (others.empty()) {
    return false;
  }
  for (auto const& p : others) {
    if (portfolio_dominates(p, p1, sc)) {
      return true;
    }
  }
  auto const ns = sc.n_scenarios();
  auto d = std::vector<std::vector<double>>(others.size(), std::vector<double>(ns, 0.0));
  auto bound = 1.0;
  for (std::size_t r = 0; r < others.size(); ++r) {
    auto const only_p1 = p1.minus(others[r]);
    auto const only_p = others[r].minus(p1);
    for (std::size_t s = 0; s < ns; ++s) {
      auto v = 0.0;
      only_p1.for_each([&](std::size_t i) { v += sc.hi[s][i]; });
      only_p.for_each([&](std::size_t i) { v -= sc.lo[s][i]; });
      d[r][s] = v;
      bound = std::max(bound, std::abs(v) + 1.0);
    }
  }
  // variables: lambda_0..lambda_{ns-1}, u = t + bound >= 0
  auto a = std::vector<std::vector<double>>{};
  auto b = std::vector<double>{};
  for (std::size_t r = 0; r < others.size(); ++r) {
    auto row = std::vector<double>(ns + 1, 0.0);
    for (std::size_t s = 0; s < ns; ++s) {
      row[s] = -d[r][s];
    }
    row[ns] = 1.0;
    a.push_back(std::move(row));
    b.push_back(bound);
  }
  auto sum_le = std::vector<double>(ns + 1, 1.0);
  sum_le[ns] = 0.0;
  auto sum_ge = std::vector<double>(ns + 1, -1.0);
  sum_ge[ns] = 0.0;
  a.push_back(sum_le);
  b.push_back(1.0);
  a.push_back(sum_ge);
  b.push_back(-1.0);
  auto c = std::vector<double>(ns + 1, 0.0);
  c[ns] = 1.0;
  auto res = detail::simplex_maximize(a, b, c);
  if (res.status != detail::LpStatus::optimal) {
    return false;
  }
  auto const t = res.value - bound;
  return t < -kDominanceTolerance;
}

/// Convenience overload for complete scores: scores[i][j] are precise v_ij.
[[nodiscard]] inline auto pda_weight_dominated(OptionSet const& p1, std::span<const OptionSet> others,
                                               std::vector<std::vector<double>> const& scores,
                                               WeightCornerSet const& corners) -> bool {
  auto ranges = std::vector<std::vector<ScoreRange>>{};
  for (auto const& row : scores) {
    auto& r = ranges.emplace_back();
    for (auto v : row) {
      r.push_back({v, v});
    }
  }
  return pda_weight_dominated(p1, others, PortfolioScenarios::from_corners(ranges, corners));
}

struct PortfolioClassification {
  OptionSet definitely_in;
  OptionSet definitely_out;
  OptionSet borderline;
  bool partial = false;
  std::vector<OptionSet> nondominated;
};

struct PdaOptions {
  std::chrono::milliseconds time_budget = kDefaultTimeBudget;
  bool joint_weight_dominance = true;  // applies only with several scenarios
};

namespace detail {

class Deadline {
 public:
  explicit Deadline(std::chrono::milliseconds budget)
      : end_(std::chrono::steady_clock::now() + budget), unlimited_(budget.count() <= 0) {}
  auto expired() -> bool {
    if (unlimited_ || ++ticks_ % 64 != 0) {
      return false;
    }
    return std::chrono::steady_clock::now() > end_;
  }

 private:
  std::chrono::steady_clock::time_point end_;
  bool unlimited_;
  std::size_t ticks_ = 0;
};

// Depth-first enumeration of feasible portfolios that keeps an archive of
// the non-dominated ones found so far. A branch is cut when
//  - even taking every remaining option leaves room for an option that was
//    skipped (adding it would dominate every completion), or
//  - a fractional-knapsack bound shows that an archived portfolio dominates
//    every completion.
// Dominance is transitive, so the final archive is exactly the set of
// non-dominated feasible portfolios.
class PortfolioSearch {
 public:
  PortfolioSearch(PortfolioScenarios const& sc, std::span<const double> costs, double budget, Deadline& deadline)
      : sc_(sc), costs_(costs), budget_(budget), tol_(1e-9 * std::max(1.0, budget)), deadline_(deadline) {
    auto const n = costs.size();
    box_lo_.assign(n, std::numeric_limits<double>::infinity());
    box_hi_.assign(n, -std::numeric_limits<double>::infinity());
    for (std::size_t s = 0; s < sc.n_scenarios(); ++s) {
      for (std::size_t i = 0; i < n; ++i) {
        box_lo_[i] = std::min(box_lo_[i], sc.lo[s][i]);
        box_hi_[i] = std::max(box_hi_[i], sc.hi[s][i]);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (costs[i] <= budget + tol_) {
        considered_.insert(i);
        order_.push_back(i);
      }
    }
    order_ = sorted_by([&](std::size_t i) { return (box_lo_[i] + box_hi_[i]) / (2.0 * costs_[i]); });
    position_.assign(n, n);
    for (std::size_t p = 0; p < order_.size(); ++p) {
      position_[order_[p]] = p;
    }
    suffix_cost_.assign(order_.size() + 1, 0.0);
    for (std::size_t p = order_.size(); p-- > 0;) {
      suffix_cost_[p] = suffix_cost_[p + 1] + costs_[order_[p]];
    }
    hi_order_ = sorted_by([&](std::size_t i) { return box_hi_[i] / costs_[i]; });
    lo_order_ = sorted_by([&](std::size_t i) { return box_lo_[i] / costs_[i]; });
  }

  [[nodiscard]] auto considered() const -> OptionSet const& { return considered_; }
  [[nodiscard]] auto total_considered_cost() const -> double { return suffix_cost_.front(); }

  /// Runs the enumeration; false when the deadline cut it short.
  auto run() -> bool {
    for (auto key : {0, 1, 2}) {
      offer_greedy(key);
    }
    dfs(0, OptionSet{}, 0.0, 0.0, std::numeric_limits<double>::infinity());
    return !aborted_;
  }

  [[nodiscard]] auto nondominated() const -> std::vector<OptionSet> {
    auto out = std::vector<OptionSet>{};
    out.reserve(archive_.size());
    for (auto const& e : archive_) {
      out.push_back(e.set);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  struct Entry {
    OptionSet set;
    double lo_sum = 0.0;
    std::vector<std::size_t> gain_order;
  };

  template <typename Key>
  auto sorted_by(Key key) const -> std::vector<std::size_t> {
    auto idx = order_;
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return key(a) > key(b); });
    return idx;
  }

  [[nodiscard]] auto filler(std::size_t i) const -> bool {
    return box_lo_[i] >= -kDominanceTolerance && box_hi_[i] > kDominanceTolerance;
  }

  void offer_greedy(int key) {
    auto ratio = [&](std::size_t i) {
      auto v = key == 0 ? box_lo_[i] : key == 1 ? (box_lo_[i] + box_hi_[i]) / 2.0 : box_hi_[i];
      return v / costs_[i];
    };
    auto set = OptionSet{};
    auto spent = 0.0;
    for (auto i : sorted_by(ratio)) {
      if (spent + costs_[i] <= budget_ + tol_ && ratio(i) > 0.0) {
        set.insert(i);
        spent += costs_[i];
      }
    }
    offer(set);
  }

  void offer(OptionSet const& set) {
    for (auto const& e : archive_) {
      if (e.set == set || portfolio_dominates(e.set, set, sc_)) {
        return;
      }
    }
    std::erase_if(archive_, [&](Entry const& e) { return portfolio_dominates(set, e.set, sc_); });
    auto e = Entry{set, 0.0, {}};
    set.for_each([&](std::size_t i) { e.lo_sum += box_lo_[i]; });
    for (auto i : order_) {
      if (gain(e, i) > 0.0) {
        e.gain_order.push_back(i);
      }
    }
    std::stable_sort(e.gain_order.begin(), e.gain_order.end(),
                     [&](auto a, auto b) { return gain(e, a) / costs_[a] > gain(e, b) / costs_[b]; });
    archive_.push_back(std::move(e));
  }

  [[nodiscard]] auto gain(Entry const& e, std::size_t i) const -> double {
    return e.set.contains(i) ? box_lo_[i] : box_hi_[i];
  }

  // Fractional knapsack over the options not decided yet.
  template <typename Gain>
  [[nodiscard]] auto relaxation(std::vector<std::size_t> const& by_ratio, std::size_t pos, double room,
                                Gain g) const -> double {
    auto ub = 0.0;
    for (auto i : by_ratio) {
      if (position_[i] < pos) {
        continue;
      }
      auto v = g(i);
      if (v <= 0.0 || room <= 0.0) {
        break;
      }
      if (costs_[i] <= room) {
        room -= costs_[i];
        ub += v;
      } else {
        ub += v * room / costs_[i];
        break;
      }
    }
    return ub;
  }

  [[nodiscard]] auto completions_dominated(OptionSet const& set, double cost, double hi_sum, std::size_t pos) const
      -> bool {
    auto const room = budget_ - cost;
    auto const ub_hi = relaxation(hi_order_, pos, room, [&](std::size_t i) { return box_hi_[i]; });
    auto const ub_lo = relaxation(lo_order_, pos, room, [&](std::size_t i) { return box_lo_[i]; });
    for (auto const& e : archive_) {
      // advantage of the best completion over e, before adding anything
      auto f = hi_sum - e.lo_sum;
      set.intersect(e.set).for_each([&](std::size_t i) { f -= box_hi_[i] - box_lo_[i]; });
      if (f + ub_hi < -kDominanceTolerance) {
        return true;
      }
      if (f + ub_lo >= -kDominanceTolerance) {
        continue;
      }
      auto ub = relaxation(e.gain_order, pos, room, [&](std::size_t i) { return gain(e, i); });
      if (f + ub < -kDominanceTolerance) {
        return true;
      }
    }
    return false;
  }

  void dfs(std::size_t pos, OptionSet set, double cost, double hi_sum, double min_skipped) {
    if (aborted_) {
      return;
    }
    if (deadline_.expired()) {
      aborted_ = true;
      return;
    }
    if (cost + suffix_cost_[pos] + min_skipped <= budget_ + tol_) {
      return;
    }
    if (pos == order_.size()) {
      offer(set);
      return;
    }
    if (completions_dominated(set, cost, hi_sum, pos)) {
      return;
    }
    auto const item = order_[pos];
    if (cost + costs_[item] <= budget_ + tol_) {
      auto with = set;
      with.insert(item);
      dfs(pos + 1, with, cost + costs_[item], hi_sum + box_hi_[item], min_skipped);
    }
    dfs(pos + 1, set, cost, hi_sum, filler(item) ? std::min(min_skipped, costs_[item]) : min_skipped);
  }

  PortfolioScenarios const& sc_;
  std::span<const double> costs_;
  double budget_;
  double tol_;
  Deadline& deadline_;
  std::vector<double> box_lo_;
  std::vector<double> box_hi_;
  OptionSet considered_;
  std::vector<std::size_t> order_;
  std::vector<std::size_t> position_;
  std::vector<double> suffix_cost_;
  std::vector<std::size_t> hi_order_;
  std::vector<std::size_t> lo_order_;
  std::vector<Entry> archive_;
  bool aborted_ = false;
};

// in: every surviving portfolio holds the option; out: none does.
// `survives` is asked lazily, only where the answer can still matter.
template <typename Survives>
auto classification_from(std::vector<OptionSet> const& nd, std::size_t n, OptionSet const& considered,
                         Survives survives) -> PortfolioClassification {
  auto out = PortfolioClassification{};
  for (std::size_t i = 0; i < n; ++i) {
    if (!considered.contains(i)) {
      out.definitely_out.insert(i);
      continue;
    }
    auto with = false;
    auto without = false;
    for (std::size_t r = 0; r < nd.size() && !(with && without); ++r) {
      auto has = nd[r].contains(i);
      if ((has && with) || (!has && without)) {
        continue;
      }
      if (survives(r)) {
        (has ? with : without) = true;
      }
    }
    if (with && !without) {
      out.definitely_in.insert(i);
    } else if (!with) {
      out.definitely_out.insert(i);
    } else {
      out.borderline.insert(i);
    }
  }
  return out;
}

}  // namespace detail

/// Classifies options by the non-dominated feasible portfolios (cost within
/// budget): definitely in when every one of them holds the option,
/// definitely out when none does. With several weight scenarios, portfolios
/// that the others dominate jointly are discarded as well. When the time
/// budget runs out every affordable option is reported borderline and the
/// result is flagged partial.
[[nodiscard]] inline auto classify_portfolios(PortfolioScenarios const& sc, std::span<const double> costs,
                                              double budget, PdaOptions const& opts = {})
    -> PortfolioClassification {
  auto const n = costs.size();
  if (n > OptionSet::kCapacity) {
    throw model_error("portfolio classification supports at most 128 options");
  }
  if (sc.n_options() != n) {
    throw model_error("scenario bounds do not match the options");
  }
  auto deadline = detail::Deadline(opts.time_budget);
  auto search = detail::PortfolioSearch(sc, costs, budget, deadline);
  auto const& considered = search.considered();

  auto partial = [&] {
    auto out = PortfolioClassification{};
    for (std::size_t i = 0; i < n; ++i) {
      if (considered.contains(i)) {
        out.borderline.insert(i);
      } else {
        out.definitely_out.insert(i);
      }
    }
    out.partial = true;
    return out;
  };

  if (search.total_considered_cost() <= budget + 1e-9 * std::max(1.0, budget)) {
    // everything affordable fits at once
    auto nd = std::vector<OptionSet>{considered};
    auto out = detail::classification_from(nd, n, considered, [](std::size_t) { return true; });
    out.nondominated = std::move(nd);
    return out;
  }
  if (!search.run()) {
    return partial();
  }
  auto nd = search.nondominated();
  if (!opts.joint_weight_dominance || sc.n_scenarios() < 2 || nd.size() < 2) {
    auto out = detail::classification_from(nd, n, considered, [](std::size_t) { return true; });
    out.nondominated = std::move(nd);
    return out;
  }
  auto verdict = std::vector<int>(nd.size(), -1);
  auto others = std::vector<OptionSet>{};
  auto timed_out = false;
  auto survives = [&](std::size_t r) {
    if (verdict[r] < 0) {
      others.clear();
      for (std::size_t q = 0; q < nd.size(); ++q) {
        if (q != r) {
          others.push_back(nd[q]);
        }
      }
      verdict[r] = pda_weight_dominated(nd[r], others, sc) ? 0 : 1;
      timed_out = timed_out || deadline.expired();
    }
    return verdict[r] == 1;
  };
  auto out = detail::classification_from(nd, n, considered, survives);
  if (timed_out) {
    return partial();
  }
  for (std::size_t r = 0; r < nd.size(); ++r) {
    if (verdict[r] != 0) {
      out.nondominated.push_back(nd[r]);
    }
  }
  return out;
}

[[nodiscard]] inline auto pda_classify(SessionState const& state, PdaOptions const& opts = {})
    -> PortfolioClassification {
  auto const& problem = state.problem();
  if (!problem.budget) {
    throw model_error("portfolio classification needs a budget");
  }
  auto costs = problem.costs();
  return classify_portfolios(portfolio_scenarios(state), costs, *problem.budget, opts);
}

/// Writes fresh statuses into the state: MCDA dominance or portfolio
/// membership depending on the problem.
inline void classify(SessionState& state, PdaOptions const& opts = {}, DominanceRule rule = DominanceRule::prose) {
  if (!state.problem().is_portfolio()) {
    state.set_statuses(mcda_classify(state, rule));
    state.set_classification_partial(false);
    return;
  }
  auto pc = pda_classify(state, opts);
  auto st = std::vector<OptionStatus>(state.n_options(), OptionStatus::undetermined);
  for (std::size_t i = 0; i < st.size(); ++i) {
    if (pc.definitely_in.contains(i)) {
      st[i] = OptionStatus::definitely_in;
    } else if (pc.definitely_out.contains(i)) {
      st[i] = OptionStatus::definitely_out;
    }
  }
  state.set_statuses(std::move(st));
  state.set_classification_partial(pc.partial);
}

/// MCDA: a robust option exists. PDA: no option is left borderline.
[[nodiscard]] inline auto resolved(SessionState const& state) -> bool {
  auto const& st = state.statuses();
  if (!state.problem().is_portfolio()) {
    return std::any_of(st.begin(), st.end(), [](auto s) { return s == OptionStatus::robust; });
  }
  if (state.classification_partial()) {
    return false;
  }
  return std::none_of(st.begin(), st.end(), [](auto s) { return s == OptionStatus::undetermined; });
}

}  // namespace voa

#endif  // VOA_PREFERENCE_ENGINE_HPP_
