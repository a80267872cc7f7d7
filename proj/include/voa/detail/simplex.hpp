#ifndef VOA_DETAIL_SIMPLEX_HPP_
#define VOA_DETAIL_SIMPLEX_HPP_

#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

namespace voa::detail {

enum class LpStatus { optimal, infeasible, unbounded };

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  double value = 0.0;
  std::vector<double> x;
};

/// Dense tableau simplex for   maximise c'x  s.t.  A x <= b,  x >= 0.
/// Negative right-hand sides are handled by an auxiliary phase. Entering
/// and leaving variables follow Bland's rule, so the method terminates on
/// degenerate problems. Meant for the small programmes that arise from
/// weight polytopes (tens of rows and columns).
class DenseSimplex {
 public:
  DenseSimplex(std::vector<std::vector<double>> const& a, std::vector<double> const& b, std::vector<double> const& c)
      : m_(b.size()), n_(c.size()), basis_(m_), nonbasis_(n_ + 1), t_(m_ + 2, std::vector<double>(n_ + 2, 0.0)) {
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        t_[i][j] = a[i][j];
      }
      basis_[i] = static_cast<long>(n_ + i);
      t_[i][n_] = -1.0;
      t_[i][n_ + 1] = b[i];
    }
    for (std::size_t j = 0; j < n_; ++j) {
      nonbasis_[j] = static_cast<long>(j);
      t_[m_][j] = -c[j];
    }
    nonbasis_[n_] = -1;
    t_[m_ + 1][n_] = 1.0;
  }

  auto solve() -> LpResult {
    auto result = LpResult{};
    if (m_ > 0) {
      auto r = std::size_t{0};
      for (std::size_t i = 1; i < m_; ++i) {
        if (t_[i][n_ + 1] < t_[r][n_ + 1]) {
          r = i;
        }
      }
      if (t_[r][n_ + 1] < -kEps) {
        pivot(r, n_);
        if (!run(true) || t_[m_ + 1][n_ + 1] < -kEps) {
          result.status = LpStatus::infeasible;
          return result;
        }
        for (std::size_t i = 0; i < m_; ++i) {
          if (basis_[i] == -1) {
            auto s = std::size_t{0};
            for (std::size_t j = 1; j <= n_; ++j) {
              if (t_[i][j] < t_[i][s] || (t_[i][j] == t_[i][s] && nonbasis_[j] < nonbasis_[s])) {
                s = j;
              }
            }
            pivot(i, s);
          }
        }
      }
    }
    if (!run(false)) {
      result.status = LpStatus::unbounded;
      result.value = std::numeric_limits<double>::infinity();
      return result;
    }
    result.status = LpStatus::optimal;
    result.x.assign(n_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      if (basis_[i] >= 0 && static_cast<std::size_t>(basis_[i]) < n_) {
        result.x[static_cast<std::size_t>(basis_[i])] = t_[i][n_ + 1];
      }
    }
    result.value = t_[m_][n_ + 1];
    return result;
  }

 private:
  static constexpr double kEps = 1e-11;

  void pivot(std::size_t r, std::size_t s) {
    auto const inv = 1.0 / t_[r][s];
    for (std::size_t i = 0; i < m_ + 2; ++i) {
      if (i == r || t_[i][s] == 0.0) {
        continue;
      }
      auto const f = t_[i][s] * inv;
      for (std::size_t j = 0; j < n_ + 2; ++j) {
        if (j != s) {
          t_[i][j] -= t_[r][j] * f;
        }
      }
    }
    for (std::size_t j = 0; j < n_ + 2; ++j) {
      if (j != s) {
        t_[r][j] *= inv;
      }
    }
    for (std::size_t i = 0; i < m_ + 2; ++i) {
      if (i != r) {
        t_[i][s] *= -inv;
      }
    }
    t_[r][s] = inv;
    std::swap(basis_[r], nonbasis_[s]);
  }

  auto run(bool phase_one) -> bool {
    auto const row = phase_one ? m_ + 1 : m_;
    while (true) {
      // Bland: lowest-index improving column
      auto s = kNone;
      for (std::size_t j = 0; j <= n_; ++j) {
        if (!phase_one && nonbasis_[j] == -1) {
          continue;
        }
        if (t_[row][j] < -kEps && (s == kNone || nonbasis_[j] < nonbasis_[s])) {
          s = j;
        }
      }
      if (s == kNone) {
        return true;
      }
      auto r = kNone;
      for (std::size_t i = 0; i < m_; ++i) {
        if (t_[i][s] <= kEps) {
          continue;
        }
        if (r == kNone) {
          r = i;
          continue;
        }
        auto const lhs = t_[i][n_ + 1] / t_[i][s];
        auto const rhs = t_[r][n_ + 1] / t_[r][s];
        if (lhs < rhs - kEps || (lhs <= rhs + kEps && basis_[i] < basis_[r])) {
          r = i;
        }
      }
      if (r == kNone) {
        return false;
      }
      pivot(r, s);
    }
  }

  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  std::size_t m_;
  std::size_t n_;
  std::vector<long> basis_;
  std::vector<long> nonbasis_;
  std::vector<std::vector<double>> t_;
};

[[nodiscard]] inline auto simplex_maximize(std::vector<std::vector<double>> const& a, std::vector<double> const& b,
                                           std::vector<double> const& c) -> LpResult {
  return DenseSimplex(a, b, c).solve();
}

}  // namespace voa::detail

#endif  // VOA_DETAIL_SIMPLEX_HPP_
