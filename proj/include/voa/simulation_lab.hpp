#ifndef VOA_SIMULATION_LAB_HPP_
#define VOA_SIMULATION_LAB_HPP_

#include "agreement_value.hpp"
#include "appraisals.hpp"
#include "core_model.hpp"
#include "prediction.hpp"
#include "preference_engine.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <vector>

namespace voa {

class simulation_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ScoreSetting { V0, V1, V2 };
enum class WeightSetting { W0, W1 };
enum class CostSetting { none, C1, C2 };
enum class AgreementModel { A1, A2 };

/// How the spread of simulated individual appraisals is derived from the
/// cell bounds: (lo + hi) / 8 as printed, or the width-based (hi - lo) / 8.
enum class StdMode { literal, width };

enum class Policy { value_of_agreement, max_range, random, lower_bound };

inline constexpr std::size_t kMaxTruthRestarts = 10000;

struct InstanceConfig {
  std::size_t n_options = 25;
  std::size_t n_criteria = 5;
  std::size_t n_participants = 8;
  ScoreSetting score = ScoreSetting::V1;
  WeightSetting weight = WeightSetting::W0;
  CostSetting cost = CostSetting::none;
  AgreementModel agreement = AgreementModel::A1;
  double budget = 1000.0;
  double total_cost = 2500.0;
  StdMode std_mode = StdMode::literal;
  std::uint64_t seed = 0;
  std::size_t instance = 0;
};

[[nodiscard]] inline auto to_string(AgreementModel a) -> std::string { return a == AgreementModel::A1 ? "A1" : "A2"; }

[[nodiscard]] inline auto to_string(Policy p) -> std::string {
  switch (p) {
    case Policy::value_of_agreement:
      return "voa";
    case Policy::max_range:
      return "maxrange";
    case Policy::random:
      return "random";
    case Policy::lower_bound:
      return "lowerbound";
  }
  return "voa";
}

[[nodiscard]] inline auto parse_policy(std::string_view s) -> Policy {
  if (s == "voa") {
    return Policy::value_of_agreement;
  }
  if (s == "maxrange") {
    return Policy::max_range;
  }
  if (s == "random") {
    return Policy::random;
  }
  if (s == "lowerbound") {
    return Policy::lower_bound;
  }
  throw simulation_error("unknown policy '" + std::string(s) + "'");
}

/// Setting label without the agreement model, e.g. "V1-W0" or "V0-W1-C1".
[[nodiscard]] inline auto setting_name(InstanceConfig const& c) -> std::string {
  auto s = std::string{"V"} + std::to_string(static_cast<int>(c.score)) + "-W" +
           std::to_string(static_cast<int>(c.weight));
  if (c.cost != CostSetting::none) {
    s += c.cost == CostSetting::C1 ? "-C1" : "-C2";
  }
  return s;
}

/// Parses labels such as "V1-W0-A1", "V1-C1-A1" or "V0-W1-C1-A2" into a
/// configuration. Missing parts default to W0, no costs and A1.
[[nodiscard]] inline auto parse_setting(std::string_view text, InstanceConfig base = {}) -> InstanceConfig {
  auto seen = std::array<bool, 4>{};
  auto pos = std::size_t{0};
  base.weight = WeightSetting::W0;
  base.cost = CostSetting::none;
  base.agreement = AgreementModel::A1;
  auto fail = [&] { return simulation_error("invalid setting '" + std::string(text) + "'"); };
  while (pos <= text.size()) {
    auto end = text.find('-', pos);
    auto token = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    if (token.size() != 2) {
      throw fail();
    }
    auto d = token[1];
    switch (token[0]) {
      case 'V':
        if (seen[0] || d < '0' || d > '2') {
          throw fail();
        }
        base.score = static_cast<ScoreSetting>(d - '0');
        seen[0] = true;
        break;
      case 'W':
        if (seen[1] || (d != '0' && d != '1')) {
          throw fail();
        }
        base.weight = d == '0' ? WeightSetting::W0 : WeightSetting::W1;
        seen[1] = true;
        break;
      case 'C':
        if (seen[2] || (d != '1' && d != '2')) {
          throw fail();
        }
        base.cost = d == '1' ? CostSetting::C1 : CostSetting::C2;
        seen[2] = true;
        break;
      case 'A':
        if (seen[3] || (d != '1' && d != '2')) {
          throw fail();
        }
        base.agreement = d == '1' ? AgreementModel::A1 : AgreementModel::A2;
        seen[3] = true;
        break;
      default:
        throw fail();
    }
    if (end == std::string_view::npos) {
      break;
    }
    pos = end + 1;
  }
  if (!seen[0]) {
    throw fail();
  }
  auto const score_incomplete = base.score != ScoreSetting::V0;
  auto const weight_incomplete = base.weight == WeightSetting::W1;
  if (score_incomplete == weight_incomplete) {
    throw simulation_error("setting '" + std::string(text) +
                           "' must leave exactly one of scores (V1/V2) or weights (W1) incomplete");
  }
  return base;
}

/// A generated problem plus the hidden agreements a group would reach.
struct Instance {
  InstanceConfig config;
  DecisionProblem problem;
  AppraisalStore store;
  std::vector<double> true_cells;    // v^a_ij, row-major by option
  std::vector<double> true_weights;  // non-normalised w~^a_j (incomplete weights only)
  std::size_t restarts = 0;

  [[nodiscard]] auto weight_experiment() const -> bool { return config.weight == WeightSetting::W1; }
};

namespace detail {

enum class Stream : std::uint64_t { problem = 0, truth = 1, policy = 2 };

inline auto make_rng(InstanceConfig const& c, Stream stream, std::uint64_t extra = 0) -> std::mt19937_64 {
  auto seq = std::seed_seq{static_cast<std::uint32_t>(c.seed), static_cast<std::uint32_t>(c.seed >> 32U),
                           static_cast<std::uint32_t>(c.instance), static_cast<std::uint32_t>(stream),
                           static_cast<std::uint32_t>(extra)};
  return std::mt19937_64(seq);
}

inline auto uniform(std::mt19937_64& rng, double lo, double hi) -> double {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

template <typename T>
auto pick(std::mt19937_64& rng, std::vector<T> const& values) -> T {
  return values[std::uniform_int_distribution<std::size_t>(0, values.size() - 1)(rng)];
}

inline auto spread(Interval r, StdMode mode) -> double {
  return mode == StdMode::literal ? (r.lo + r.hi) / 8.0 : (r.hi - r.lo) / 8.0;
}

// Individual appraisals for one cell (or weight): two distinct random
// participants sit on the bounds, everybody else draws from a normal around
// the midpoint, redrawn until inside the bounds.
inline auto individual_values(std::mt19937_64& rng, Interval r, std::size_t n_participants, StdMode mode,
                              bool round_to_integer) -> std::vector<double> {
  auto out = std::vector<double>(n_participants, r.lo);
  if (r.degenerate()) {
    return out;
  }
  auto k1 = std::uniform_int_distribution<std::size_t>(0, n_participants - 1)(rng);
  auto k2 = std::uniform_int_distribution<std::size_t>(0, n_participants - 2)(rng);
  if (k2 >= k1) {
    ++k2;
  }
  auto const mid = (r.lo + r.hi) / 2.0;
  auto const sd = spread(r, mode);
  auto normal = std::normal_distribution<double>(mid, sd > 0.0 ? sd : 1.0);
  for (std::size_t k = 0; k < n_participants; ++k) {
    if (k == k1) {
      out[k] = r.lo;
    } else if (k == k2) {
      out[k] = r.hi;
    } else {
      auto v = 0.0;
      do {
        v = normal(rng);
        if (round_to_integer) {
          v = std::round(v);
        }
      } while (!r.contains(v));
      out[k] = v;
    }
  }
  return out;
}

}  // namespace detail

/// Triangular (A1, mode = prediction pulled into the range) or uniform (A2)
/// draw of an agreement inside the current range.
[[nodiscard]] inline auto draw_agreement(AgreementModel model, Interval range, double prediction,
                                         std::mt19937_64& rng) -> double {
  if (range.degenerate()) {
    return range.lo;
  }
  auto const u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  auto const a = range.lo;
  auto const b = range.hi;
  if (model == AgreementModel::A2) {
    return range.clamp(a + u * (b - a));
  }
  auto const c = range.clamp(prediction);
  auto const fc = (c - a) / (b - a);
  auto v = u < fc ? a + std::sqrt(u * (b - a) * (c - a)) : b - std::sqrt((1.0 - u) * (b - a) * (b - c));
  return range.clamp(v);
}

namespace detail {

inline auto generate_score_truth(Instance& inst, std::mt19937_64& rng) -> void {
  auto const& p = inst.problem;
  auto const n = p.n_options();
  auto const m = p.n_criteria();
  auto const preds = predict_all(p, inst.store, PredictorChoice{});
  auto const initial = SessionState::initial(p, inst.store);
  for (std::size_t attempt = 0; attempt <= kMaxTruthRestarts; ++attempt) {
    auto state = initial;
    auto truth = std::vector<double>(n * m);
    auto ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      for (std::size_t j = 0; j < m && ok; ++j) {
        auto v = draw_agreement(inst.config.agreement, state.cell(i, j), preds.cells[i * m + j], rng);
        truth[i * m + j] = v;
        ok = state.agree_cell(i, j, v) == AgreementOutcome::applied;
      }
    }
    if (ok) {
      inst.true_cells = std::move(truth);
      inst.restarts = attempt;
      return;
    }
  }
  throw simulation_error("could not generate consistent agreements");
}

inline auto generate_weight_truth(Instance& inst, std::mt19937_64& rng) -> void {
  auto const& p = inst.problem;
  auto const m = p.n_criteria();
  auto const preds = predict_all(p, inst.store, PredictorChoice{});
  auto const initial = SessionState::initial(p, inst.store);
  for (std::size_t attempt = 0; attempt <= kMaxTruthRestarts; ++attempt) {
    auto state = initial;
    auto truth = std::vector<double>(m);
    auto ok = true;
    for (std::size_t j = 0; j < m && ok; ++j) {
      auto range = state.weight_range(j);
      auto v = draw_agreement(inst.config.agreement, range, preds.weights[j], rng);
      truth[j] = v;
      if (!range.degenerate()) {
        ok = state.agree_weight(j, v) == AgreementOutcome::applied;
      }
    }
    if (ok) {
      inst.true_weights = std::move(truth);
      inst.restarts = attempt;
      return;
    }
  }
  throw simulation_error("could not generate consistent weight agreements");
}

}  // namespace detail

/// Builds a random problem, the participants' appraisals and the hidden
/// group agreements. The same (seed, instance) always yields the same
/// instance, independent of the policy later run on it.
[[nodiscard]] inline auto generate_instance(InstanceConfig const& config) -> Instance {
  if (config.n_participants < 2) {
    throw simulation_error("simulated groups need at least two participants");
  }
  auto rng = detail::make_rng(config, detail::Stream::problem);
  auto inst = Instance{};
  inst.config = config;
  auto& p = inst.problem;
  auto const n = config.n_options;
  auto const m = config.n_criteria;
  auto const np = config.n_participants;
  for (std::size_t i = 0; i < n; ++i) {
    p.options.push_back({"o" + std::to_string(i + 1), "Option " + std::to_string(i + 1), 1.0});
  }
  for (std::size_t j = 0; j < m; ++j) {
    p.criteria.push_back({"c" + std::to_string(j + 1), "Criterion " + std::to_string(j + 1)});
  }
  for (std::size_t k = 0; k < np; ++k) {
    p.participants.push_back({"p" + std::to_string(k + 1), "Participant " + std::to_string(k + 1)});
  }

  auto nominal = std::vector<double>(m);
  for (auto& w : nominal) {
    w = detail::uniform(rng, 0.0, 1.0);
  }
  auto const wsum = std::accumulate(nominal.begin(), nominal.end(), 0.0);
  for (auto& w : nominal) {
    w /= wsum;
  }
  inst.store = AppraisalStore(n, m, np);
  if (config.weight == WeightSetting::W0) {
    p.weights = FixedWeights{nominal};
  } else {
    // SWING form: the criterion with the largest nominal weight is the
    // reference at 100 and every other range is expressed relative to it.
    static auto const half_widths = std::vector<double>{0.025, 0.05, 0.075, 0.10, 0.125};
    auto const ref = static_cast<std::size_t>(std::max_element(nominal.begin(), nominal.end()) - nominal.begin());
    auto const scale = kReferenceSwing / nominal[ref];
    auto swing = SwingRanges{ref, {}};
    for (std::size_t j = 0; j < m; ++j) {
      if (j == ref) {
        swing.ranges.push_back({kReferenceSwing, kReferenceSwing});
        continue;
      }
      auto h = detail::pick(rng, half_widths);
      swing.ranges.push_back({std::max(0.0, nominal[j] - h) * scale, (nominal[j] + h) * scale});
    }
    for (std::size_t j = 0; j < m; ++j) {
      if (j == ref) {
        continue;
      }
      auto values = detail::individual_values(rng, swing.ranges[j], np, config.std_mode, false);
      for (std::size_t k = 0; k < np; ++k) {
        inst.store.set_weight(j, k, values[k]);
      }
    }
    p.weights = std::move(swing);
  }

  static auto const v1_widths = std::vector<double>{5.0, 10.0, 15.0, 20.0};
  static auto const v2_widths = std::vector<double>{10.0, 20.0, 30.0, 40.0};
  auto mids = std::vector<double>(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      auto range = Interval{};
      if (config.score == ScoreSetting::V0) {
        auto v = detail::uniform(rng, 0.0, 100.0);
        range = {v, v};
      } else {
        auto width = detail::pick(rng, config.score == ScoreSetting::V1 ? v1_widths : v2_widths);
        auto lo = detail::uniform(rng, 0.0, 100.0 - width);
        range = {lo, lo + width};
      }
      mids[i * m + j] = (range.lo + range.hi) / 2.0;
      auto values = detail::individual_values(rng, range, np, config.std_mode, true);
      for (std::size_t k = 0; k < np; ++k) {
        inst.store.set_score(i, j, k, values[k]);
      }
    }
  }

  if (config.cost != CostSetting::none) {
    auto const r_hi = config.cost == CostSetting::C1 ? 2.5 : 10.0;
    auto raw = std::vector<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto value = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        value += nominal[j] * mids[i * m + j];
      }
      raw[i] = std::max(value, 1e-6) / detail::uniform(rng, 1.0, r_hi);
    }
    auto const total = std::accumulate(raw.begin(), raw.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      p.options[i].cost = raw[i] * config.total_cost / total;
    }
    p.budget = config.budget;
  }
  p.validate();

  auto truth_rng = detail::make_rng(config, detail::Stream::truth);
  if (inst.weight_experiment()) {
    inst.true_cells.resize(n * m);
    for (std::size_t c = 0; c < n * m; ++c) {
      inst.true_cells[c] = mids[c];
    }
    detail::generate_weight_truth(inst, truth_rng);
  } else {
    detail::generate_score_truth(inst, truth_rng);
  }
  return inst;
}

struct SimOptions {
  PdaOptions pda;
  DominanceRule rule = DominanceRule::prose;
  PredictorChoice predictor;
  RecommendOptions recommend;
};

struct RunResult {
  std::size_t agreements = 0;
  std::size_t restarts = 0;
  double wall_ms = 0.0;
  std::size_t partial_steps = 0;
  std::vector<std::size_t> sequence;  // targets in elicitation order
};

namespace detail {

inline auto classify_counting(SessionState& state, SimOptions const& opts, std::size_t& partial_steps) -> void {
  classify(state, opts.pda, opts.rule);
  if (state.classification_partial()) {
    ++partial_steps;
  }
}

inline auto reveal_option(SessionState& state, Instance const& inst, std::size_t i) -> void {
  auto const m = state.n_criteria();
  for (std::size_t j = 0; j < m; ++j) {
    if (state.cell_agreed(i, j)) {
      continue;
    }
    if (state.agree_cell(i, j, inst.true_cells[i * m + j]) != AgreementOutcome::applied) {
      throw simulation_error("hidden agreement fell outside the tightened range");
    }
  }
}

inline auto reveal_weight(SessionState& state, Instance const& inst, std::size_t j) -> void {
  if (state.agreed_weights().contains(j)) {
    return;
  }
  if (state.agree_weight(j, inst.true_weights[j]) != AgreementOutcome::applied) {
    throw simulation_error("hidden weight agreement fell outside the tightened range");
  }
}

inline auto max_range_target(SessionState const& state, std::vector<std::size_t> const& candidates, bool criteria)
    -> std::size_t {
  auto widths = std::vector<Interval>{};
  if (criteria) {
    widths = normalised_weight_bounds(state.corners(), state.n_criteria());
  }
  auto best = candidates.front();
  auto best_width = -1.0;
  for (auto c : candidates) {
    auto w = criteria ? widths[c].width() : state.option_range(c).width();
    if (w > best_width) {
      best = c;
      best_width = w;
    }
  }
  return best;
}

}  // namespace detail

/// Initial state of an instance with every option classified.
[[nodiscard]] inline auto initial_state(Instance const& inst, SimOptions const& opts = {}) -> SessionState {
  auto state = SessionState::initial(inst.problem, inst.store);
  classify(state, opts.pda, opts.rule);
  return state;
}

/// Minimum number of weight agreements after which the classification is
/// resolved, over every order in which the group could have discussed the
/// criteria (with the same hidden agreements). Since tightening does not
/// depend on order, subsets by increasing size suffice. This is an offline
/// benchmark, so portfolio classification runs without a time limit.
[[nodiscard]] inline auto lower_bound_weights(Instance const& inst, SimOptions opts = {}) -> std::size_t {
  if (!inst.weight_experiment()) {
    throw simulation_error("lower bound enumeration only applies to incomplete weights");
  }
  opts.pda.time_budget = std::chrono::milliseconds{0};
  auto base = initial_state(inst, opts);
  if (resolved(base)) {
    return 0;
  }
  auto open = candidate_criteria(base);
  if (open.size() > 16) {
    throw simulation_error("too many open criteria for full enumeration");
  }
  auto masks = std::vector<std::uint32_t>(std::size_t{1} << open.size());
  std::iota(masks.begin(), masks.end(), 0U);
  std::stable_sort(masks.begin(), masks.end(),
                   [](auto a, auto b) { return std::popcount(a) < std::popcount(b); });
  for (auto mask : masks) {
    if (mask == 0) {
      continue;
    }
    auto state = base;
    for (std::size_t b = 0; b < open.size(); ++b) {
      if ((mask >> b) & 1U) {
        detail::reveal_weight(state, inst, open[b]);
      }
    }
    classify(state, opts.pda, opts.rule);
    if (resolved(state)) {
      return static_cast<std::size_t>(std::popcount(mask));
    }
  }
  return open.size();
}

/// Elicits agreements one target at a time until the robust option (or the
/// full portfolio classification) is known, and counts them.
[[nodiscard]] inline auto run_policy(Instance const& inst, Policy policy, SimOptions const& opts = {}) -> RunResult {
  auto const start = std::chrono::steady_clock::now();
  auto result = RunResult{};
  result.restarts = inst.restarts;
  if (policy == Policy::lower_bound) {
    result.agreements = lower_bound_weights(inst, opts);
  } else {
    auto state = SessionState::initial(inst.problem, inst.store);
    detail::classify_counting(state, opts, result.partial_steps);
    auto const preds = predict_all(inst.problem, inst.store, opts.predictor);
    auto rng = detail::make_rng(inst.config, detail::Stream::policy);
    auto const weights = inst.weight_experiment();
    while (!resolved(state)) {
      auto candidates = weights ? candidate_criteria(state) : candidate_options(state);
      if (candidates.empty()) {
        break;
      }
      auto target = candidates.front();
      if (policy == Policy::value_of_agreement) {
        auto rec = recommend(state, preds, opts.recommend);
        if (!rec) {
          break;
        }
        target = rec->target.index;
      } else if (policy == Policy::max_range) {
        target = detail::max_range_target(state, candidates, weights);
      } else {
        target = detail::pick(rng, candidates);
      }
      if (weights) {
        detail::reveal_weight(state, inst, target);
      } else {
        detail::reveal_option(state, inst, target);
      }
      result.sequence.push_back(target);
      ++result.agreements;
      detail::classify_counting(state, opts, result.partial_steps);
    }
  }
  result.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return result;
}

struct RunRecord {
  std::string setting;
  std::size_t n_options = 0;
  AgreementModel agreement = AgreementModel::A1;
  Policy policy = Policy::value_of_agreement;
  std::size_t instance = 0;
  std::uint64_t seed_base = 0;
  RunResult result;
};

struct ReportRow {
  std::string setting;
  std::size_t n_options = 0;
  AgreementModel agreement = AgreementModel::A1;
  Policy policy = Policy::value_of_agreement;
  double mean_agreements = 0.0;
  std::size_t n_runs = 0;
  std::uint64_t seed_base = 0;
};

/// Mean agreements per (setting, options, agreement model, policy) cell.
[[nodiscard]] inline auto report(std::span<const RunRecord> records) -> std::vector<ReportRow> {
  using Key = std::tuple<std::string, std::size_t, AgreementModel, Policy, std::uint64_t>;
  auto cells = std::map<Key, std::pair<double, std::size_t>>{};
  for (auto const& r : records) {
    auto& [sum, count] = cells[{r.setting, r.n_options, r.agreement, r.policy, r.seed_base}];
    sum += static_cast<double>(r.result.agreements);
    ++count;
  }
  auto rows = std::vector<ReportRow>{};
  for (auto const& [key, acc] : cells) {
    auto const& [setting, n, a, p, seed] = key;
    rows.push_back({setting, n, a, p, acc.first / static_cast<double>(acc.second), acc.second, seed});
  }
  return rows;
}

inline constexpr std::string_view kReportHeader =
    "setting,n_options,agreement_model,policy,mean_agreements,n_runs,seed_base";

[[nodiscard]] inline auto to_csv(std::span<const ReportRow> rows) -> std::string {
  auto out = std::ostringstream{};
  out << kReportHeader << '\n';
  for (auto const& r : rows) {
    char mean[32];
    std::snprintf(mean, sizeof mean, "%.4f", r.mean_agreements);
    out << r.setting << ',' << r.n_options << ',' << to_string(r.agreement) << ',' << to_string(r.policy) << ','
        << mean << ',' << r.n_runs << ',' << r.seed_base << '\n';
  }
  return out.str();
}

inline constexpr std::string_view kRecordsHeader =
    "setting,n_options,agreement_model,policy,instance,seed_base,agreements,restarts,partial_steps";

/// One line per run, ordered as given. Wall time is left out so that
/// repeated runs produce identical files.
[[nodiscard]] inline auto records_to_csv(std::span<const RunRecord> records) -> std::string {
  auto out = std::ostringstream{};
  out << kRecordsHeader << '\n';
  for (auto const& r : records) {
    out << r.setting << ',' << r.n_options << ',' << to_string(r.agreement) << ',' << to_string(r.policy) << ','
        << r.instance << ',' << r.seed_base << ',' << r.result.agreements << ',' << r.result.restarts << ','
        << r.result.partial_steps << '\n';
  }
  return out.str();
}

[[nodiscard]] inline auto records_from_csv(std::string_view text) -> std::vector<RunRecord> {
  auto out = std::vector<RunRecord>{};
  auto stream = std::istringstream{std::string(text)};
  auto line = std::string{};
  auto line_no = std::size_t{0};
  while (std::getline(stream, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty() || (line_no == 1 && line == kRecordsHeader)) {
      continue;
    }
    auto fields = std::vector<std::string>{};
    auto field = std::string{};
    auto fs = std::istringstream{line};
    while (std::getline(fs, field, ',')) {
      fields.push_back(field);
    }
    if (fields.size() != 9) {
      throw simulation_error("records line " + std::to_string(line_no) + ": expected 9 fields");
    }
    try {
      auto r = RunRecord{};
      r.setting = fields[0];
      r.n_options = std::stoull(fields[1]);
      if (fields[2] != "A1" && fields[2] != "A2") {
        throw simulation_error("unknown agreement model '" + fields[2] + "'");
      }
      r.agreement = fields[2] == "A1" ? AgreementModel::A1 : AgreementModel::A2;
      r.policy = parse_policy(fields[3]);
      r.instance = std::stoull(fields[4]);
      r.seed_base = std::stoull(fields[5]);
      r.result.agreements = std::stoull(fields[6]);
      r.result.restarts = std::stoull(fields[7]);
      r.result.partial_steps = std::stoull(fields[8]);
      out.push_back(std::move(r));
    } catch (simulation_error const& e) {
      throw simulation_error("records line " + std::to_string(line_no) + ": " + e.what());
    } catch (std::exception const&) {
      throw simulation_error("records line " + std::to_string(line_no) + ": malformed number");
    }
  }
  return out;
}

struct SignTest {
  std::size_t below = 0;  // pairs where a < b
  std::size_t above = 0;  // pairs where a > b
  std::size_t ties = 0;
  double p_value = 1.0;   // P(at least `below` successes | fair coin)
};

/// One-tailed paired sign test of "a tends to be smaller than b"; ties are
/// dropped.
[[nodiscard]] inline auto sign_test_less(std::span<const double> a, std::span<const double> b) -> SignTest {
  if (a.size() != b.size()) {
    throw simulation_error("sign test needs paired samples");
  }
  auto t = SignTest{};
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) {
      ++t.below;
    } else if (a[i] > b[i]) {
      ++t.above;
    } else {
      ++t.ties;
    }
  }
  auto const n = t.below + t.above;
  if (n == 0) {
    return t;
  }
  auto p = 0.0;
  for (auto k = t.below; k <= n; ++k) {
    auto const log_choose = std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
                            std::lgamma(static_cast<double>(n - k) + 1.0);
    p += std::exp(log_choose - static_cast<double>(n) * std::log(2.0));
  }
  t.p_value = std::min(1.0, p);
  return t;
}

struct BatchConfig {
  InstanceConfig base;
  std::size_t runs = 20;
  std::vector<Policy> policies{Policy::value_of_agreement, Policy::max_range, Policy::random};
  SimOptions sim;
  std::size_t jobs = 1;
};

/// Generates `runs` instances and runs every policy on each. Instances run
/// on up to `jobs` threads; records come back ordered by (instance, policy).
[[nodiscard]] inline auto run_batch(BatchConfig const& batch) -> std::vector<RunRecord> {
  auto records = std::vector<RunRecord>(batch.runs * batch.policies.size());
  auto next = std::size_t{0};
  auto mutex = std::mutex{};
  auto error = std::optional<std::string>{};
  auto worker = [&] {
    while (true) {
      auto r = std::size_t{0};
      {
        auto lock = std::scoped_lock(mutex);
        if (next >= batch.runs || error) {
          return;
        }
        r = next++;
      }
      try {
        auto cfg = batch.base;
        cfg.instance = r;
        auto inst = generate_instance(cfg);
        for (std::size_t q = 0; q < batch.policies.size(); ++q) {
          auto& rec = records[r * batch.policies.size() + q];
          rec.setting = setting_name(cfg);
          rec.n_options = cfg.n_options;
          rec.agreement = cfg.agreement;
          rec.policy = batch.policies[q];
          rec.instance = r;
          rec.seed_base = cfg.seed;
          rec.result = run_policy(inst, batch.policies[q], batch.sim);
        }
      } catch (std::exception const& e) {
        auto lock = std::scoped_lock(mutex);
        error = "instance " + std::to_string(r) + ": " + e.what();
      }
    }
  };
  auto const jobs = std::max<std::size_t>(1, std::min(batch.jobs, batch.runs));
  if (jobs == 1) {
    worker();
  } else {
    auto threads = std::vector<std::jthread>{};
    for (std::size_t t = 0; t < jobs; ++t) {
      threads.emplace_back(worker);
    }
  }
  if (error) {
    throw simulation_error(*error);
  }
  return records;
}

}  // namespace voa

#endif  // VOA_SIMULATION_LAB_HPP_
