#ifndef VOA_DETAIL_OPTION_SET_HPP_
#define VOA_DETAIL_OPTION_SET_HPP_

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace voa {

/// Fixed-capacity set of option indices (up to 128 options), used to
/// represent portfolios.
class OptionSet {
 public:
  static constexpr std::size_t kCapacity = 128;

  constexpr OptionSet() = default;

  static auto from_indices(std::vector<std::size_t> const& idx) -> OptionSet {
    auto s = OptionSet{};
    for (auto i : idx) {
      s.insert(i);
    }
    return s;
  }

  constexpr void insert(std::size_t i) { words_[i >> 6] |= std::uint64_t{1} << (i & 63); }
  constexpr void erase(std::size_t i) { words_[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }
  [[nodiscard]] constexpr auto contains(std::size_t i) const -> bool { return (words_[i >> 6] >> (i & 63)) & 1U; }
  [[nodiscard]] constexpr auto size() const -> std::size_t {
    return static_cast<std::size_t>(std::popcount(words_[0]) + std::popcount(words_[1]));
  }
  [[nodiscard]] constexpr auto empty() const -> bool { return (words_[0] | words_[1]) == 0; }

  [[nodiscard]] constexpr auto minus(OptionSet const& o) const -> OptionSet {
    auto s = OptionSet{};
    s.words_ = {words_[0] & ~o.words_[0], words_[1] & ~o.words_[1]};
    return s;
  }

  [[nodiscard]] constexpr auto intersect(OptionSet const& o) const -> OptionSet {
    auto s = OptionSet{};
    s.words_ = {words_[0] & o.words_[0], words_[1] & o.words_[1]};
    return s;
  }

  template <typename F>
  constexpr void for_each(F&& f) const {
    for (std::size_t w = 0; w < 2; ++w) {
      auto bits = words_[w];
      while (bits != 0) {
        auto b = static_cast<std::size_t>(std::countr_zero(bits));
        f(w * 64 + b);
        bits &= bits - 1;
      }
    }
  }

  [[nodiscard]] auto indices() const -> std::vector<std::size_t> {
    auto out = std::vector<std::size_t>{};
    for_each([&](std::size_t i) { out.push_back(i); });
    return out;
  }

  friend constexpr auto operator==(OptionSet const&, OptionSet const&) -> bool = default;
  friend constexpr auto operator<(OptionSet const& a, OptionSet const& b) -> bool {
    return a.words_[1] != b.words_[1] ? a.words_[1] < b.words_[1] : a.words_[0] < b.words_[0];
  }

  [[nodiscard]] auto hash() const -> std::size_t {
    return std::hash<std::uint64_t>{}(words_[0] * 0x9E3779B97F4A7C15ULL ^ words_[1]);
  }

 private:
  std::array<std::uint64_t, 2> words_{};
};

}  // namespace voa

#endif  // VOA_DETAIL_OPTION_SET_HPP_
