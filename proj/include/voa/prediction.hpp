#ifndef VOA_PREDICTION_HPP_
#define VOA_PREDICTION_HPP_

#include "core_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace voa {

class prediction_error : public model_error {
 public:
  using model_error::model_error;
};

enum class PredictorKind { sjs, median, mean, geomean, proposed };

/// How the group's eventual agreement is predicted from individual appraisals.
/// `proposed` uses a per-cell proposed aggregate when one was supplied and
/// falls back to `fallback` otherwise.
struct PredictorChoice {
  PredictorKind kind = PredictorKind::median;
  double theta = 1.0;
  std::optional<double> proposed;
  PredictorKind fallback = PredictorKind::median;
};

[[nodiscard]] inline auto to_string(PredictorKind kind) -> std::string {
  switch (kind) {
    case PredictorKind::sjs:
      return "sjs";
    case PredictorKind::median:
      return "median";
    case PredictorKind::mean:
      return "mean";
    case PredictorKind::geomean:
      return "geomean";
    case PredictorKind::proposed:
      return "proposed";
  }
  return "median";
}

[[nodiscard]] inline auto parse_predictor(std::string_view name) -> PredictorChoice {
  auto c = PredictorChoice{};
  if (name == "sjs") {
    c.kind = PredictorKind::sjs;
  } else if (name == "median") {
    c.kind = PredictorKind::median;
  } else if (name == "mean") {
    c.kind = PredictorKind::mean;
  } else if (name == "geomean") {
    c.kind = PredictorKind::geomean;
  } else if (name == "proposed") {
    c.kind = PredictorKind::proposed;
  } else {
    throw prediction_error("unknown predictor '" + std::string(name) + "'");
  }
  return c;
}

/// Social judgement scheme centrality: each member's influence is the sum of
/// exp(-theta |v_k - v_l|) over the other members, normalised over all
/// ordered pairs. Exponents are shifted by the closest pair distance so that
/// widely spread appraisals (e.g. the -300 sentinel) do not underflow to 0/0.
[[nodiscard]] inline auto sjs_centrality(std::span<const double> values, double theta = 1.0) -> std::vector<double> {
  if (values.empty()) {
    throw prediction_error("no appraisals to weigh");
  }
  if (!(theta > 0.0)) {
    throw prediction_error("SJS theta must be positive");
  }
  auto const n = values.size();
  if (n == 1) {
    return {1.0};
  }
  auto min_dist = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t l = k + 1; l < n; ++l) {
      min_dist = std::min(min_dist, std::abs(values[k] - values[l]));
    }
  }
  auto z = std::vector<double>(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t l = 0; l < n; ++l) {
      if (l != k) {
        z[k] += std::exp(-theta * (std::abs(values[k] - values[l]) - min_dist));
      }
    }
  }
  auto const total = std::accumulate(z.begin(), z.end(), 0.0);
  for (auto& v : z) {
    v /= total;
  }
  return z;
}

namespace detail {

inline auto lower_median(std::span<const double> values) -> double {
  auto sorted = std::vector<double>(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return sorted[(sorted.size() - 1) / 2];
}

inline auto predict_kind(std::span<const double> values, PredictorKind kind, double theta) -> double {
  switch (kind) {
    case PredictorKind::sjs: {
      auto z = sjs_centrality(values, theta);
      auto v = 0.0;
      for (std::size_t k = 0; k < values.size(); ++k) {
        v += z[k] * values[k];
      }
      // rounding must not push the weighted sum outside the appraisal span
      auto [lo, hi] = std::minmax_element(values.begin(), values.end());
      return std::clamp(v, *lo, *hi);
    }
    case PredictorKind::median:
      return lower_median(values);
    case PredictorKind::mean:
      return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    case PredictorKind::geomean: {
      auto log_sum = 0.0;
      for (auto v : values) {
        if (!(v > 0.0)) {
          throw prediction_error("geometric mean requires positive appraisals");
        }
        log_sum += std::log(v);
      }
      auto v = std::exp(log_sum / static_cast<double>(values.size()));
      auto [lo, hi] = std::minmax_element(values.begin(), values.end());
      return std::clamp(v, *lo, *hi);
    }
    case PredictorKind::proposed:
      break;
  }
  throw prediction_error("proposed predictor needs a proposed aggregate");
}

}  // namespace detail

/// Predicted group agreement for one score or weight. Even-sized groups use
/// the lower median so the prediction is always an appraised value.
[[nodiscard]] inline auto predict(std::span<const double> values, PredictorChoice const& choice) -> double {
  if (values.empty()) {
    throw prediction_error("no appraisals to predict from");
  }
  if (choice.kind == PredictorKind::proposed) {
    if (choice.proposed) {
      return *choice.proposed;
    }
    return detail::predict_kind(values, choice.fallback, choice.theta);
  }
  return detail::predict_kind(values, choice.kind, choice.theta);
}

}  // namespace voa

#endif  // VOA_PREDICTION_HPP_
