#ifndef VOA_CORE_MODEL_HPP_
#define VOA_CORE_MODEL_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace voa {

/// Raised when a decision model or one of its inputs violates an invariant.
class model_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kWeightSumTolerance = 1e-9;
inline constexpr double kReferenceSwing = 100.0;
inline constexpr std::size_t kMaxFreeCriteria = 20;

/// Closed interval [lo, hi]. Used for criterion scores, overall scores,
/// value-for-money ratios and non-normalised weights alike.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  [[nodiscard]] constexpr auto width() const -> double { return hi - lo; }
  [[nodiscard]] constexpr auto degenerate() const -> bool { return lo == hi; }
  [[nodiscard]] constexpr auto contains(double v) const -> bool { return lo <= v && v <= hi; }
  [[nodiscard]] constexpr auto contains_open(double v) const -> bool { return lo < v && v < hi; }
  [[nodiscard]] constexpr auto clamp(double v) const -> double { return std::clamp(v, lo, hi); }

  friend constexpr auto operator==(Interval const&, Interval const&) -> bool = default;
};

using ScoreRange = Interval;
using RatioRange = Interval;

inline auto make_range(double lo, double hi) -> ScoreRange {
  if (!(lo <= hi)) {
    throw model_error("range lower bound exceeds upper bound");
  }
  return {lo, hi};
}

/// Overall value score bounds of one option plus, optionally, its predicted
/// agreement.
struct OverallScoreRange {
  double lo = 0.0;
  double hi = 0.0;
  std::optional<double> predicted;

  [[nodiscard]] auto interval() const -> Interval { return {lo, hi}; }
};

struct OptionDef {
  std::string id;
  std::string label;
  double cost = 1.0;
};

struct CriterionDef {
  std::string id;
  std::string label;
};

struct ParticipantDef {
  std::string id;
  std::string label;
};

/// Precise normalised weights, one per criterion.
struct FixedWeights {
  std::vector<double> values;
};

/// Incomplete SWING weights: one non-normalised range per criterion. When a
/// reference criterion is named its range must be the degenerate [100, 100].
struct SwingRanges {
  std::optional<std::size_t> reference;
  std::vector<Interval> ranges;
};

using WeightSpec = std::variant<FixedWeights, SwingRanges>;

/// Extreme points of the normalised feasible weight set.
struct WeightCornerSet {
  std::vector<std::vector<double>> corners;

  [[nodiscard]] auto size() const -> std::size_t { return corners.size(); }
  [[nodiscard]] auto empty() const -> bool { return corners.empty(); }
};

struct DecisionProblem {
  std::vector<OptionDef> options;
  std::vector<CriterionDef> criteria;
  std::vector<ParticipantDef> participants;
  std::optional<double> budget;
  WeightSpec weights;

  [[nodiscard]] auto n_options() const -> std::size_t { return options.size(); }
  [[nodiscard]] auto n_criteria() const -> std::size_t { return criteria.size(); }
  [[nodiscard]] auto n_participants() const -> std::size_t { return participants.size(); }
  [[nodiscard]] auto is_portfolio() const -> bool { return budget.has_value(); }
  [[nodiscard]] auto has_fixed_weights() const -> bool {
    return std::holds_alternative<FixedWeights>(weights);
  }
  [[nodiscard]] auto fixed_weights() const -> std::vector<double> const& {
    return std::get<FixedWeights>(weights).values;
  }
  [[nodiscard]] auto swing() const -> SwingRanges const& { return std::get<SwingRanges>(weights); }

  [[nodiscard]] auto costs() const -> std::vector<double> {
    auto out = std::vector<double>{};
    out.reserve(options.size());
    for (auto const& o : options) {
      out.push_back(o.cost);
    }
    return out;
  }

  [[nodiscard]] auto option_index(std::string_view id) const -> std::optional<std::size_t> {
    return find_id(options, id);
  }
  [[nodiscard]] auto criterion_index(std::string_view id) const -> std::optional<std::size_t> {
    return find_id(criteria, id);
  }
  [[nodiscard]] auto participant_index(std::string_view id) const -> std::optional<std::size_t> {
    return find_id(participants, id);
  }

  void validate() const;

 private:
  template <typename Defs>
  static auto find_id(Defs const& defs, std::string_view id) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < defs.size(); ++i) {
      if (defs[i].id == id) {
        return i;
      }
    }
    return std::nullopt;
  }
};

namespace detail {

template <typename Defs>
void require_unique_ids(Defs const& defs, std::string_view what) {
  auto seen = std::set<std::string>{};
  for (auto const& d : defs) {
    if (d.id.empty()) {
      throw model_error(std::string(what) + " id must not be empty");
    }
    if (!seen.insert(d.id).second) {
      throw model_error("duplicate " + std::string(what) + " id '" + d.id + "'");
    }
  }
}

}  // namespace detail

inline void validate_weights(WeightSpec const& spec, std::size_t n_criteria) {
  if (auto const* fixed = std::get_if<FixedWeights>(&spec)) {
    if (fixed->values.size() != n_criteria) {
      throw model_error("fixed weights must have one entry per criterion");
    }
    auto sum = 0.0;
    for (auto w : fixed->values) {
      if (!std::isfinite(w) || w < 0.0) {
        throw model_error("fixed weights must be finite and non-negative");
      }
      sum += w;
    }
    if (std::abs(sum - 1.0) > kWeightSumTolerance) {
      throw model_error("fixed weights must sum to 1");
    }
    return;
  }
  auto const& swing = std::get<SwingRanges>(spec);
  if (swing.ranges.size() != n_criteria) {
    throw model_error("swing weights must have one range per criterion");
  }
  auto any_positive = false;
  for (auto const& r : swing.ranges) {
    if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo < 0.0 || r.lo > r.hi) {
      throw model_error("swing weight ranges must satisfy 0 <= lo <= hi");
    }
    any_positive = any_positive || r.hi > 0.0;
  }
  if (!any_positive) {
    throw model_error("swing weight ranges admit only the zero vector");
  }
  if (swing.reference) {
    if (*swing.reference >= n_criteria) {
      throw model_error("reference criterion out of range");
    }
    auto const& ref = swing.ranges[*swing.reference];
    if (ref.lo != kReferenceSwing || ref.hi != kReferenceSwing) {
      throw model_error("reference criterion must carry the fixed weight 100");
    }
  }
}

inline void DecisionProblem::validate() const {
  if (options.size() < 2) {
    throw model_error("a decision problem needs at least 2 options");
  }
  if (criteria.empty()) {
    throw model_error("a decision problem needs at least 1 criterion");
  }
  if (participants.empty()) {
    throw model_error("a decision problem needs at least 1 participant");
  }
  detail::require_unique_ids(options, "option");
  detail::require_unique_ids(criteria, "criterion");
  detail::require_unique_ids(participants, "participant");
  for (auto const& o : options) {
    if (!std::isfinite(o.cost) || o.cost < 0.0) {
      throw model_error("option '" + o.id + "' has a negative cost");
    }
  }
  if (budget) {
    if (!std::isfinite(*budget) || *budget <= 0.0) {
      throw model_error("portfolio budget must be positive");
    }
    for (auto const& o : options) {
      if (o.cost <= 0.0) {
        throw model_error("portfolio mode requires positive costs (option '" + o.id + "')");
      }
    }
  }
  validate_weights(weights, criteria.size());
}

/// Overall score bounds under precise weights: lo = sum_j w_j lo_j, hi = sum_j w_j hi_j.
[[nodiscard]] inline auto overall_range(std::span<const ScoreRange> ranges, std::span<const double> weights)
    -> OverallScoreRange {
  if (ranges.size() != weights.size()) {
    throw model_error("missing criterion range");
  }
  auto out = OverallScoreRange{};
  for (std::size_t j = 0; j < ranges.size(); ++j) {
    out.lo += weights[j] * ranges[j].lo;
    out.hi += weights[j] * ranges[j].hi;
  }
  return out;
}

[[nodiscard]] inline auto overall_range(DecisionProblem const& problem, std::span<const ScoreRange> ranges,
                                        std::span<const double> weights) -> OverallScoreRange {
  if (ranges.size() != problem.n_criteria()) {
    throw model_error("missing criterion range");
  }
  return overall_range(ranges, weights);
}

[[nodiscard]] inline auto value_for_money(Interval overall, double cost) -> RatioRange {
  if (!(cost > 0.0)) {
    throw model_error("value-for-money requires a positive cost");
  }
  return {overall.lo / cost, overall.hi / cost};
}

[[nodiscard]] inline auto value_for_money(OverallScoreRange const& overall, double cost) -> RatioRange {
  return value_for_money(overall.interval(), cost);
}

/// Enumerates the normalised extreme points of the SWING weight box. Each
/// corner picks lo or hi for every non-degenerate criterion; corners that
/// normalise to the same vector are reported once.
[[nodiscard]] inline auto weight_corners(std::span<const Interval> ranges) -> WeightCornerSet {
  auto free = std::vector<std::size_t>{};
  for (std::size_t j = 0; j < ranges.size(); ++j) {
    if (!ranges[j].degenerate()) {
      free.push_back(j);
    }
  }
  if (free.size() > kMaxFreeCriteria) {
    throw model_error("too many criteria with incomplete weights for corner enumeration");
  }
  auto out = WeightCornerSet{};
  auto const count = std::size_t{1} << free.size();
  out.corners.reserve(count);
  auto raw = std::vector<double>(ranges.size());
  for (std::size_t mask = 0; mask < count; ++mask) {
    for (std::size_t j = 0; j < ranges.size(); ++j) {
      raw[j] = ranges[j].lo;
    }
    for (std::size_t b = 0; b < free.size(); ++b) {
      if ((mask >> b) & 1U) {
        raw[free[b]] = ranges[free[b]].hi;
      }
    }
    auto sum = 0.0;
    for (auto v : raw) {
      sum += v;
    }
    if (!(sum > 0.0)) {
      continue;
    }
    auto corner = raw;
    for (auto& v : corner) {
      v /= sum;
    }
    auto duplicate = std::any_of(out.corners.begin(), out.corners.end(), [&](auto const& c) {
      for (std::size_t j = 0; j < c.size(); ++j) {
        if (std::abs(c[j] - corner[j]) > 1e-12) {
          return false;
        }
      }
      return true;
    });
    if (!duplicate) {
      out.corners.push_back(std::move(corner));
    }
  }
  if (out.corners.empty()) {
    throw model_error("weight ranges admit no normalisable corner");
  }
  return out;
}

[[nodiscard]] inline auto weight_corners(SwingRanges const& spec) -> WeightCornerSet {
  validate_weights(spec, spec.ranges.size());
  return weight_corners(std::span<const Interval>(spec.ranges));
}

/// Overall score bounds of one option over a corner set. Works for interval
/// criterion scores too: weights are non-negative, so the minimum pairs lower
/// score bounds with the minimising corner.
[[nodiscard]] inline auto overall_range_under_weights(std::span<const ScoreRange> scores,
                                                      WeightCornerSet const& corners) -> OverallScoreRange {
  if (corners.empty()) {
    throw model_error("empty weight corner set");
  }
  auto out = OverallScoreRange{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
                               std::nullopt};
  for (auto const& c : corners.corners) {
    if (c.size() != scores.size()) {
      throw model_error("corner dimension does not match criteria");
    }
    auto lo = 0.0;
    auto hi = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
      lo += c[j] * scores[j].lo;
      hi += c[j] * scores[j].hi;
    }
    out.lo = std::min(out.lo, lo);
    out.hi = std::max(out.hi, hi);
  }
  return out;
}

[[nodiscard]] inline auto overall_range_under_weights(std::span<const double> scores, WeightCornerSet const& corners)
    -> OverallScoreRange {
  auto ranges = std::vector<ScoreRange>{};
  ranges.reserve(scores.size());
  for (auto v : scores) {
    ranges.push_back({v, v});
  }
  return overall_range_under_weights(std::span<const ScoreRange>(ranges), corners);
}

/// Normalised bounds of every weight over the corner set.
[[nodiscard]] inline auto normalised_weight_bounds(WeightCornerSet const& corners, std::size_t n_criteria)
    -> std::vector<Interval> {
  auto out = std::vector<Interval>(n_criteria, Interval{std::numeric_limits<double>::infinity(),
                                                        -std::numeric_limits<double>::infinity()});
  for (auto const& c : corners.corners) {
    for (std::size_t j = 0; j < n_criteria; ++j) {
      out[j].lo = std::min(out[j].lo, c[j]);
      out[j].hi = std::max(out[j].hi, c[j]);
    }
  }
  return out;
}

}  // namespace voa

#endif  // VOA_CORE_MODEL_HPP_
