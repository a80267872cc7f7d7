#ifndef VOA_APPRAISALS_HPP_
#define VOA_APPRAISALS_HPP_

#include "core_model.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace voa {

inline constexpr double kScaleMin = 0.0;
inline constexpr double kScaleMax = 100.0;

/// Individual appraisals v_ijk and individual non-normalised SWING weights
/// w~_jk. Entries stay empty until a participant submits them.
class AppraisalStore {
 public:
  AppraisalStore() = default;
  AppraisalStore(std::size_t n_options, std::size_t n_criteria, std::size_t n_participants)
      : n_options_(n_options),
        n_criteria_(n_criteria),
        n_participants_(n_participants),
        scores_(n_options * n_criteria * n_participants),
        weights_(n_criteria * n_participants) {}

  explicit AppraisalStore(DecisionProblem const& p)
      : AppraisalStore(p.n_options(), p.n_criteria(), p.n_participants()) {}

  [[nodiscard]] auto n_options() const { return n_options_; }
  [[nodiscard]] auto n_criteria() const { return n_criteria_; }
  [[nodiscard]] auto n_participants() const { return n_participants_; }

  [[nodiscard]] auto score(std::size_t i, std::size_t j, std::size_t k) const -> std::optional<double> {
    return scores_.at(index(i, j, k));
  }
  void set_score(std::size_t i, std::size_t j, std::size_t k, double v) { scores_.at(index(i, j, k)) = v; }

  [[nodiscard]] auto weight(std::size_t j, std::size_t k) const -> std::optional<double> {
    return weights_.at(j * n_participants_ + k);
  }
  void set_weight(std::size_t j, std::size_t k, double v) { weights_.at(j * n_participants_ + k) = v; }

  /// Submitted appraisals of one cell in participant declaration order.
  [[nodiscard]] auto cell_values(std::size_t i, std::size_t j) const -> std::vector<double> {
    auto out = std::vector<double>{};
    for (std::size_t k = 0; k < n_participants_; ++k) {
      if (auto v = scores_[index(i, j, k)]) {
        out.push_back(*v);
      }
    }
    return out;
  }

  [[nodiscard]] auto weight_values(std::size_t j) const -> std::vector<double> {
    auto out = std::vector<double>{};
    for (std::size_t k = 0; k < n_participants_; ++k) {
      if (auto v = weights_[j * n_participants_ + k]) {
        out.push_back(*v);
      }
    }
    return out;
  }

  [[nodiscard]] auto cell_complete(std::size_t i, std::size_t j) const -> bool {
    for (std::size_t k = 0; k < n_participants_; ++k) {
      if (!scores_[index(i, j, k)]) {
        return false;
      }
    }
    return true;
  }

  [[nodiscard]] auto weights_complete(std::size_t j) const -> bool {
    for (std::size_t k = 0; k < n_participants_; ++k) {
      if (!weights_[j * n_participants_ + k]) {
        return false;
      }
    }
    return true;
  }

  /// Score range [min_k v_ijk, max_k v_ijk]; the full value scale when
  /// nobody has appraised the cell yet.
  [[nodiscard]] auto cell_range(std::size_t i, std::size_t j) const -> ScoreRange {
    auto values = cell_values(i, j);
    if (values.empty()) {
      return {kScaleMin, kScaleMax};
    }
    auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    return {*lo, *hi};
  }

  /// Replaces every participant's appraisal of a cell, as done when a group
  /// agrees on a value outside the original range.
  void override_cell(std::size_t i, std::size_t j, double v) {
    for (std::size_t k = 0; k < n_participants_; ++k) {
      scores_[index(i, j, k)] = v;
    }
  }

  void override_weight(std::size_t j, double v) {
    for (std::size_t k = 0; k < n_participants_; ++k) {
      weights_[j * n_participants_ + k] = v;
    }
  }

  void set_proposed(std::size_t i, std::size_t j, double v) { proposed_[{i, j}] = v; }
  [[nodiscard]] auto proposed(std::size_t i, std::size_t j) const -> std::optional<double> {
    if (auto it = proposed_.find({i, j}); it != proposed_.end()) {
      return it->second;
    }
    return std::nullopt;
  }
  [[nodiscard]] auto proposed_map() const -> std::map<std::pair<std::size_t, std::size_t>, double> const& {
    return proposed_;
  }

  friend auto operator==(AppraisalStore const&, AppraisalStore const&) -> bool = default;

 private:
  [[nodiscard]] auto index(std::size_t i, std::size_t j, std::size_t k) const -> std::size_t {
    return (i * n_criteria_ + j) * n_participants_ + k;
  }

  std::size_t n_options_ = 0;
  std::size_t n_criteria_ = 0;
  std::size_t n_participants_ = 0;
  std::vector<std::optional<double>> scores_;
  std::vector<std::optional<double>> weights_;
  std::map<std::pair<std::size_t, std::size_t>, double> proposed_;
};

}  // namespace voa

#endif  // VOA_APPRAISALS_HPP_
