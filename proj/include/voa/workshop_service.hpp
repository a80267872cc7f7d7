#ifndef VOA_WORKSHOP_SERVICE_HPP_
#define VOA_WORKSHOP_SERVICE_HPP_

#include "agreement_value.hpp"
#include "appraisals.hpp"
#include "core_model.hpp"
#include "prediction.hpp"
#include "preference_engine.hpp"
#include "problem_json.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace voa {

/// A value a participant can enter to veto an option outright.
inline constexpr double kProhibitiveScore = -300.0;

/// Raised for requests that reference unknown participants, options or
/// criteria, or carry values the session cannot accept.
class request_error : public model_error {
 public:
  using model_error::model_error;
};

/// Optimistic concurrency failure: the caller's expected version is stale.
class version_conflict : public std::runtime_error {
 public:
  version_conflict(std::uint64_t expected, std::uint64_t actual)
      : std::runtime_error("expected version " + std::to_string(expected) + " but session is at " +
                           std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}

  [[nodiscard]] auto expected() const { return expected_; }
  [[nodiscard]] auto actual() const { return actual_; }

 private:
  std::uint64_t expected_;
  std::uint64_t actual_;
};

/// A session log line that cannot be used. `line` is 1-based.
class log_error : public std::runtime_error {
 public:
  log_error(std::size_t line, std::string const& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  [[nodiscard]] auto line() const { return line_; }

 private:
  std::size_t line_;
};

struct ServiceConfig {
  double sentinel = kProhibitiveScore;
  PdaOptions pda;
  DominanceRule rule = DominanceRule::prose;
  RecommendOptions recommend;

  void validate() const {
    if (!std::isfinite(sentinel) || sentinel > -(kScaleMax - kScaleMin)) {
      throw model_error("the prohibitive score must lie far below the value scale (at most -100)");
    }
  }
};

// ---------------------------------------------------------------------------
// JSON helpers

namespace detail {

inline auto option_at(DecisionProblem const& p, nlohmann::json const& j, char const* key) -> std::size_t {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw request_error(std::string("missing '") + key + "'");
  }
  auto id = j.at(key).get<std::string>();
  auto idx = p.option_index(id);
  if (!idx) {
    throw request_error("unknown option '" + id + "'");
  }
  return *idx;
}

inline auto criterion_at(DecisionProblem const& p, nlohmann::json const& j, char const* key) -> std::size_t {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw request_error(std::string("missing '") + key + "'");
  }
  auto id = j.at(key).get<std::string>();
  auto idx = p.criterion_index(id);
  if (!idx) {
    throw request_error("unknown criterion '" + id + "'");
  }
  return *idx;
}

inline auto participant_at(DecisionProblem const& p, nlohmann::json const& j, char const* key) -> std::size_t {
  if (!j.contains(key) || !j.at(key).is_string()) {
    throw request_error(std::string("missing '") + key + "'");
  }
  auto id = j.at(key).get<std::string>();
  auto idx = p.participant_index(id);
  if (!idx) {
    throw request_error("unknown participant '" + id + "'");
  }
  return *idx;
}

inline auto number_at(nlohmann::json const& j, char const* key) -> double {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw request_error(std::string("'") + key + "' must be a number");
  }
  return j.at(key).get<double>();
}

inline auto interval_json(Interval r) -> nlohmann::json { return nlohmann::json::array({r.lo, r.hi}); }

inline auto fnv1a(std::string_view bytes) -> std::uint64_t {
  auto h = std::uint64_t{14695981039346656037ULL};
  for (auto c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace detail

[[nodiscard]] inline auto predictor_to_json(PredictorChoice const& c) -> nlohmann::json {
  auto j = nlohmann::json{{"kind", to_string(c.kind)}, {"theta", c.theta}};
  if (c.kind == PredictorKind::proposed) {
    j["fallback"] = to_string(c.fallback);
  }
  return j;
}

[[nodiscard]] inline auto predictor_from_json(nlohmann::json const& j) -> PredictorChoice {
  if (j.is_null()) {
    return PredictorChoice{};
  }
  if (j.is_string()) {
    return parse_predictor(j.get<std::string>());
  }
  if (!j.is_object() || !j.contains("kind")) {
    throw request_error("predictor must be a name or {\"kind\": ...}");
  }
  auto c = parse_predictor(j.at("kind").get<std::string>());
  c.theta = j.value("theta", 1.0);
  if (j.contains("fallback")) {
    c.fallback = parse_predictor(j.at("fallback").get<std::string>()).kind;
  }
  if (c.fallback == PredictorKind::proposed) {
    throw request_error("the proposed predictor needs a different fallback");
  }
  return c;
}

[[nodiscard]] inline auto config_to_json(ServiceConfig const& c) -> nlohmann::json {
  return {{"sentinel", c.sentinel},
          {"time_budget_ms", c.pda.time_budget.count()},
          {"joint_weight_dominance", c.pda.joint_weight_dominance},
          {"dominance", c.rule == DominanceRule::prose ? "prose" : "printed"},
          {"weight_tie_break",
           c.recommend.weight_tie_break == WeightTieBreak::range_width ? "range-width" : "max-excess"}};
}

[[nodiscard]] inline auto config_from_json(nlohmann::json const& j) -> ServiceConfig {
  auto c = ServiceConfig{};
  if (j.is_null()) {
    return c;
  }
  c.sentinel = j.value("sentinel", kProhibitiveScore);
  c.pda.time_budget = std::chrono::milliseconds{j.value("time_budget_ms", kDefaultTimeBudget.count())};
  c.pda.joint_weight_dominance = j.value("joint_weight_dominance", true);
  auto rule = j.value("dominance", std::string{"prose"});
  if (rule != "prose" && rule != "printed") {
    throw request_error("dominance must be 'prose' or 'printed'");
  }
  c.rule = rule == "prose" ? DominanceRule::prose : DominanceRule::printed;
  auto tie = j.value("weight_tie_break", std::string{"range-width"});
  if (tie != "range-width" && tie != "max-excess") {
    throw request_error("weight_tie_break must be 'range-width' or 'max-excess'");
  }
  c.recommend.weight_tie_break = tie == "range-width" ? WeightTieBreak::range_width : WeightTieBreak::max_excess;
  c.validate();
  return c;
}

[[nodiscard]] inline auto appraisals_to_json(DecisionProblem const& p, AppraisalStore const& s) -> nlohmann::json {
  auto scores = nlohmann::json::array();
  for (std::size_t i = 0; i < p.n_options(); ++i) {
    for (std::size_t j = 0; j < p.n_criteria(); ++j) {
      for (std::size_t k = 0; k < p.n_participants(); ++k) {
        if (auto v = s.score(i, j, k)) {
          scores.push_back({{"participant", p.participants[k].id},
                            {"option", p.options[i].id},
                            {"criterion", p.criteria[j].id},
                            {"value", *v}});
        }
      }
    }
  }
  auto weights = nlohmann::json::array();
  for (std::size_t j = 0; j < p.n_criteria(); ++j) {
    for (std::size_t k = 0; k < p.n_participants(); ++k) {
      if (auto v = s.weight(j, k)) {
        weights.push_back({{"participant", p.participants[k].id}, {"criterion", p.criteria[j].id}, {"value", *v}});
      }
    }
  }
  auto proposed = nlohmann::json::array();
  for (auto const& [key, v] : s.proposed_map()) {
    proposed.push_back({{"option", p.options[key.first].id}, {"criterion", p.criteria[key.second].id}, {"value", v}});
  }
  return {{"scores", scores}, {"weights", weights}, {"proposed", proposed}};
}

[[nodiscard]] inline auto appraisals_from_json(DecisionProblem const& p, nlohmann::json const& j) -> AppraisalStore {
  auto s = AppraisalStore(p);
  if (j.is_null()) {
    return s;
  }
  for (auto const& e : j.value("scores", nlohmann::json::array())) {
    s.set_score(detail::option_at(p, e, "option"), detail::criterion_at(p, e, "criterion"),
                detail::participant_at(p, e, "participant"), detail::number_at(e, "value"));
  }
  for (auto const& e : j.value("weights", nlohmann::json::array())) {
    s.set_weight(detail::criterion_at(p, e, "criterion"), detail::participant_at(p, e, "participant"),
                 detail::number_at(e, "value"));
  }
  for (auto const& e : j.value("proposed", nlohmann::json::array())) {
    s.set_proposed(detail::option_at(p, e, "option"), detail::criterion_at(p, e, "criterion"),
                   detail::number_at(e, "value"));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Requests and events

struct ScoreEntry {
  std::size_t option = 0;
  std::size_t criterion = 0;
  double value = 0.0;
};

struct WeightEntry {
  std::size_t criterion = 0;
  double value = 0.0;
};

/// One participant's individual scores and (optionally) SWING weights.
struct AppraisalSubmission {
  std::size_t participant = 0;
  std::vector<ScoreEntry> scores;
  std::vector<WeightEntry> weights;
};

enum class TargetType { cell, option, weight };

struct AgreementTarget {
  TargetType type = TargetType::cell;
  std::size_t option = 0;
  std::size_t criterion = 0;

  friend auto operator==(AgreementTarget const&, AgreementTarget const&) -> bool = default;
};

struct Agreement {
  AgreementTarget target;
  double value = 0.0;

  friend auto operator==(Agreement const&, Agreement const&) -> bool = default;
};

enum class EventKind {
  appraisal_submitted,
  criterion_agreed,
  option_agreed,
  weight_agreed,
  reinitialized,
  recommendation_issued,
};

[[nodiscard]] inline auto to_string(EventKind k) -> char const* {
  switch (k) {
    case EventKind::appraisal_submitted:
      return "AppraisalSubmitted";
    case EventKind::criterion_agreed:
      return "CriterionAgreed";
    case EventKind::option_agreed:
      return "OptionAgreed";
    case EventKind::weight_agreed:
      return "WeightAgreed";
    case EventKind::reinitialized:
      return "Reinitialized";
    case EventKind::recommendation_issued:
      return "RecommendationIssued";
  }
  return "AppraisalSubmitted";
}

[[nodiscard]] inline auto parse_event_kind(std::string_view s) -> EventKind {
  for (auto k : {EventKind::appraisal_submitted, EventKind::criterion_agreed, EventKind::option_agreed,
                 EventKind::weight_agreed, EventKind::reinitialized, EventKind::recommendation_issued}) {
    if (s == to_string(k)) {
      return k;
    }
  }
  throw request_error("unknown event kind '" + std::string(s) + "'");
}

/// Events that change the session; the others only document what happened.
[[nodiscard]] constexpr auto is_mutation(EventKind k) -> bool {
  return k == EventKind::appraisal_submitted || k == EventKind::criterion_agreed ||
         k == EventKind::option_agreed || k == EventKind::weight_agreed;
}

/// One log entry. `action` groups a mutation with the events it caused.
struct SessionEvent {
  EventKind kind = EventKind::appraisal_submitted;
  std::uint64_t action = 0;
  std::int64_t timestamp_ms = 0;
  nlohmann::json payload;
};

[[nodiscard]] inline auto event_to_json(SessionEvent const& e) -> nlohmann::json {
  return {{"type", "event"},
          {"kind", to_string(e.kind)},
          {"action", e.action},
          {"timestamp", e.timestamp_ms},
          {"payload", e.payload}};
}

[[nodiscard]] inline auto event_from_json(nlohmann::json const& j) -> SessionEvent {
  auto e = SessionEvent{};
  e.kind = parse_event_kind(j.at("kind").get<std::string>());
  e.action = j.at("action").get<std::uint64_t>();
  e.timestamp_ms = j.value("timestamp", std::int64_t{0});
  e.payload = j.value("payload", nlohmann::json::object());
  return e;
}

enum class AgreementStatus { applied, reinitialized };

struct AgreementResult {
  AgreementStatus status = AgreementStatus::applied;
  std::vector<Agreement> dropped;  // earlier agreements that no longer fit after a rebuild
};

enum class Audience { participant, facilitator };

[[nodiscard]] inline auto parse_audience(std::string_view s) -> Audience {
  if (s == "participant") {
    return Audience::participant;
  }
  if (s == "facilitator") {
    return Audience::facilitator;
  }
  throw request_error("audience must be 'participant' or 'facilitator'");
}

// ---------------------------------------------------------------------------
// Session

/// A live workshop: problem, individual appraisals, the agreements reached so
/// far and the event log they came from. Replaying the log from the initial
/// snapshot reproduces the state exactly.
class WorkshopSession {
 public:
  WorkshopSession(std::string id, DecisionProblem problem, PredictorChoice predictor = {}, ServiceConfig config = {},
                  std::optional<AppraisalStore> initial = std::nullopt)
      : id_(std::move(id)), problem_(std::move(problem)), predictor_(predictor), config_(config) {
    problem_.validate();
    config_.validate();
    initial_ = initial ? std::move(*initial) : AppraisalStore(problem_);
    if (initial_.n_options() != problem_.n_options() || initial_.n_criteria() != problem_.n_criteria() ||
        initial_.n_participants() != problem_.n_participants()) {
      throw model_error("appraisal table does not match the problem");
    }
    for (std::size_t i = 0; i < problem_.n_options(); ++i) {
      for (std::size_t j = 0; j < problem_.n_criteria(); ++j) {
        for (std::size_t k = 0; k < problem_.n_participants(); ++k) {
          if (auto v = initial_.score(i, j, k)) {
            check_score(*v);
          }
        }
      }
    }
    store_ = initial_;
    rebuild();
  }

  [[nodiscard]] auto id() const -> std::string const& { return id_; }
  [[nodiscard]] auto problem() const -> DecisionProblem const& { return problem_; }
  [[nodiscard]] auto initial_appraisals() const -> AppraisalStore const& { return initial_; }
  [[nodiscard]] auto appraisals() const -> AppraisalStore const& { return store_; }
  [[nodiscard]] auto state() const -> SessionState const& { return state_; }
  [[nodiscard]] auto predictions() const -> Predictions const& { return predictions_; }
  [[nodiscard]] auto predictor() const -> PredictorChoice const& { return predictor_; }
  [[nodiscard]] auto config() const -> ServiceConfig const& { return config_; }
  [[nodiscard]] auto events() const -> std::vector<SessionEvent> const& { return events_; }
  [[nodiscard]] auto agreements() const -> std::vector<Agreement> const& { return agreements_; }
  [[nodiscard]] auto reinit_count() const -> std::size_t { return reinit_count_; }
  [[nodiscard]] auto version() const -> std::uint64_t { return version_; }

  auto submit_appraisals(AppraisalSubmission const& sub, std::optional<std::uint64_t> expected = std::nullopt)
      -> AgreementResult {
    check_version(expected);
    auto payload = submission_to_json(sub);
    auto e = SessionEvent{EventKind::appraisal_submitted, next_action_, now(), std::move(payload)};
    auto result = apply(e);
    commit(std::move(e), result);
    return result;
  }

  auto record_agreement(Agreement const& a, std::optional<std::uint64_t> expected = std::nullopt)
      -> AgreementResult {
    check_version(expected);
    auto e = SessionEvent{kind_of(a.target), next_action_, now(), agreement_to_json(a)};
    auto result = apply(e);
    commit(std::move(e), result);
    return result;
  }

  /// Removes the last mutation together with the events it caused and
  /// rebuilds the session from the initial snapshot.
  void undo(std::optional<std::uint64_t> expected = std::nullopt) {
    check_version(expected);
    auto last = std::find_if(events_.rbegin(), events_.rend(), [](auto const& e) { return is_mutation(e.kind); });
    if (last == events_.rend()) {
      throw request_error("nothing to undo");
    }
    auto const action = last->action;
    std::erase_if(events_, [&](auto const& e) { return e.action == action; });
    replay_mutations();
    ++version_;
    recommendation_.reset();
  }

  /// Next target to discuss, or nothing once the problem is resolved.
  [[nodiscard]] auto recommendation() -> std::optional<Recommendation> const& {
    if (!recommendation_) {
      recommendation_ = recommend(state_, predictions_, config_.recommend);
    }
    return *recommendation_;
  }

  /// Chart payload for the facilitator screen or the participants' view.
  /// The participant payload never carries predicted values, phi or g
  /// measures.
  [[nodiscard]] auto chart(Audience audience) -> nlohmann::json {
    auto const facilitator = audience == Audience::facilitator;
    auto const portfolio = problem_.is_portfolio();
    auto const& rec = recommendation();
    auto predicted = std::vector<double>{};
    if (facilitator) {
      predicted = portfolio ? predicted_ratios(state_, predictions_) : predicted_values(state_, predictions_);
    }
    auto phi = std::optional<double>{};
    if (facilitator) {
      if (auto b = current_borderline(state_, predictions_)) {
        phi = b->value;
      }
    }
    auto bars = nlohmann::json::array();
    auto groups = std::map<std::string, nlohmann::json>{};
    for (auto const* g : {"definitely_in", "definitely_out", "robust", "dominated", "borderline"}) {
      groups[g] = nlohmann::json::array();
    }
    for (std::size_t i = 0; i < problem_.n_options(); ++i) {
      auto const bar = portfolio ? state_.ratio_range(i) : state_.option_range(i);
      auto const status = status_name(i);
      auto b = nlohmann::json{{"option", problem_.options[i].id},
                              {"label", problem_.options[i].label},
                              {"lo", bar.lo},
                              {"hi", bar.hi},
                              {"status", status},
                              {"agreed", state_.option_agreed(i)}};
      if (portfolio) {
        b["cost"] = problem_.options[i].cost;
        b["score"] = detail::interval_json(state_.option_range(i));
      }
      if (facilitator) {
        b["predicted"] = predicted[i];
        if (phi) {
          b["zone"] = bar.hi < *phi ? "red" : (bar.lo > *phi ? "green" : "straddle");
        }
      }
      groups[status].push_back(problem_.options[i].id);
      bars.push_back(std::move(b));
    }
    auto out = nlohmann::json{{"session", id_},
                              {"version", version_},
                              {"audience", facilitator ? "facilitator" : "participant"},
                              {"mode", portfolio ? "portfolio" : "single"},
                              {"bars", bars},
                              {"resolved", resolved(state_)},
                              {"partial", state_.classification_partial()},
                              {"reinitializations", reinit_count_}};
    if (portfolio) {
      out["budget"] = *problem_.budget;
      out["definitely_in"] = groups["definitely_in"];
      out["definitely_out"] = groups["definitely_out"];
      out["borderline"] = groups["borderline"];
    } else {
      out["robust"] = groups["robust"];
      out["dominated"] = groups["dominated"];
      out["borderline"] = groups["borderline"];
    }
    if (!state_.fixed_weights_mode()) {
      auto const norm = normalised_weight_bounds(state_.corners(), problem_.n_criteria());
      auto w_star = facilitator ? predicted_weights(state_, predictions_) : std::vector<double>{};
      auto weights = nlohmann::json::array();
      for (std::size_t j = 0; j < problem_.n_criteria(); ++j) {
        auto w = nlohmann::json{{"criterion", problem_.criteria[j].id},
                                {"swing", detail::interval_json(state_.weight_range(j))},
                                {"normalised", detail::interval_json(norm[j])},
                                {"agreed", state_.agreed_weights().contains(j)}};
        if (facilitator) {
          w["predicted_weight"] = w_star[j];
        }
        weights.push_back(std::move(w));
      }
      out["weights"] = std::move(weights);
    }
    if (rec) {
      out["recommendation"] = recommendation_json(*rec, facilitator);
    } else {
      out["recommendation"] = nullptr;
    }
    if (facilitator && phi) {
      out["phi"] = *phi;
    }
    return out;
  }

  [[nodiscard]] auto recommendation_json(Recommendation const& rec, bool facilitator) const -> nlohmann::json {
    auto const& t = rec.target;
    auto j = nlohmann::json{};
    if (t.kind == TargetKind::option) {
      j = {{"kind", "option"}, {"target", problem_.options[t.index].id}, {"label", problem_.options[t.index].label}};
    } else {
      j = {{"kind", "criterion"},
           {"target", problem_.criteria[t.index].id},
           {"label", problem_.criteria[t.index].label}};
    }
    if (facilitator) {
      j["g_a"] = t.g_a;
      j["g_b"] = t.g_b;
      j["phi"] = rec.phi;
    }
    return j;
  }

  /// Canonical dump of everything the engine state consists of.
  [[nodiscard]] auto state_json() const -> nlohmann::json {
    auto const n = problem_.n_options();
    auto const m = problem_.n_criteria();
    auto cells = nlohmann::json::array();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        cells.push_back(detail::interval_json(state_.cell(i, j)));
      }
    }
    auto caps = nlohmann::json::array();
    auto ranges = nlohmann::json::array();
    auto statuses = nlohmann::json::array();
    for (std::size_t i = 0; i < n; ++i) {
      caps.push_back(detail::interval_json(state_.cap(i)));
      ranges.push_back(detail::interval_json(state_.option_range(i)));
      statuses.push_back(to_string(state_.status(i)));
    }
    auto weights = nlohmann::json::array();
    for (auto const& w : state_.weight_ranges()) {
      weights.push_back(detail::interval_json(w));
    }
    auto agreed_cells = nlohmann::json::array();
    for (auto const& [key, v] : state_.agreed_cells()) {
      agreed_cells.push_back({key.first, key.second, v});
    }
    auto agreed_options = nlohmann::json::array();
    for (auto const& [i, v] : state_.agreed_options()) {
      agreed_options.push_back({i, v});
    }
    auto agreed_weights = nlohmann::json::array();
    for (auto const& [j, v] : state_.agreed_weights()) {
      agreed_weights.push_back({j, v});
    }
    return {{"cells", cells},
            {"caps", caps},
            {"ranges", ranges},
            {"weights", weights},
            {"agreed_cells", agreed_cells},
            {"agreed_options", agreed_options},
            {"agreed_weights", agreed_weights},
            {"statuses", statuses},
            {"partial", state_.classification_partial()},
            {"appraisals", appraisals_to_json(problem_, store_)},
            {"reinitializations", reinit_count_}};
  }

  /// FNV-1a over the canonical state dump. Doubles print in shortest
  /// round-trip form, so equal hashes mean bitwise equal values.
  [[nodiscard]] auto state_hash() const -> std::uint64_t { return detail::fnv1a(state_json().dump()); }

  [[nodiscard]] auto state_hash_hex() const -> std::string {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state_hash()));
    return buf;
  }

  [[nodiscard]] auto header_json() const -> nlohmann::json {
    return {{"type", "header"},
            {"format", "voa-session-log"},
            {"format_version", 1},
            {"session", id_},
            {"problem", to_json(problem_)},
            {"appraisals", appraisals_to_json(problem_, initial_)},
            {"predictor", predictor_to_json(predictor_)},
            {"config", config_to_json(config_)}};
  }

  [[nodiscard]] auto snapshot_json() const -> nlohmann::json {
    return {{"type", "snapshot"},
            {"version", version_},
            {"action", last_action()},
            {"state_hash", state_hash_hex()},
            {"state", state_json()}};
  }

  [[nodiscard]] auto export_json() const -> nlohmann::json {
    auto events = nlohmann::json::array();
    for (auto const& e : events_) {
      events.push_back(event_to_json(e));
    }
    auto j = header_json();
    j["events"] = std::move(events);
    j["snapshot"] = snapshot_json();
    return j;
  }

  /// Newline-delimited log: header, events, with a state snapshot after
  /// every `snapshot_every` mutations (0: only at the end).
  [[nodiscard]] auto to_ndjson(std::size_t snapshot_every = 0) const -> std::string {
    auto out = header_json().dump() + '\n';
    if (snapshot_every == 0) {
      for (auto const& e : events_) {
        out += event_to_json(e).dump() + '\n';
      }
      return out + snapshot_json().dump() + '\n';
    }
    auto replica = WorkshopSession(id_, problem_, predictor_, config_, initial_);
    auto mutations = std::size_t{0};
    auto pending = false;  // a mutation whose action is still open
    for (std::size_t r = 0; r < events_.size(); ++r) {
      auto const& e = events_[r];
      out += event_to_json(e).dump() + '\n';
      replica.replay_event(e);
      if (is_mutation(e.kind)) {
        ++mutations;
        pending = mutations % snapshot_every == 0;
      }
      // snapshots go after the derived events, once the action is complete
      auto action_done = r + 1 == events_.size() || events_[r + 1].action != e.action;
      if (pending && action_done) {
        out += replica.snapshot_json().dump() + '\n';
        pending = false;
      }
    }
    auto final_snapshot = snapshot_json();
    final_snapshot["version"] = version_;
    return out + final_snapshot.dump() + '\n';
  }

  static auto from_export(nlohmann::json const& j) -> WorkshopSession {
    auto s = from_header(j);
    for (auto const& e : j.value("events", nlohmann::json::array())) {
      s.replay_event(event_from_json(e));
    }
    if (j.contains("snapshot")) {
      s.adopt_version(j.at("snapshot").value("version", s.version_));
    }
    return s;
  }

  /// Undo removes events, so the version of a replayed log can lag behind
  /// the live one; snapshots carry the live version forward.
  void adopt_version(std::uint64_t v) { version_ = std::max(version_, v); }

  static auto from_header(nlohmann::json const& j) -> WorkshopSession {
    auto problem = problem_from_json(j.at("problem"));
    auto store = appraisals_from_json(problem, j.value("appraisals", nlohmann::json{}));
    return WorkshopSession(j.value("session", std::string{"replay"}), std::move(problem),
                           predictor_from_json(j.value("predictor", nlohmann::json{})),
                           config_from_json(j.value("config", nlohmann::json{})), std::move(store));
  }

  /// Feeds one logged event back in: mutations are re-executed, derived
  /// events are kept as recorded.
  void replay_event(SessionEvent const& e) {
    if (is_mutation(e.kind)) {
      apply(e);
      version_ = std::max(version_, e.action);
      next_action_ = std::max(next_action_, e.action + 1);
    }
    last_timestamp_ = std::max(last_timestamp_, e.timestamp_ms);
    events_.push_back(e);
    recommendation_.reset();
  }

  [[nodiscard]] auto agreement_from_json(nlohmann::json const& j) const -> Agreement {
    auto a = Agreement{};
    auto type = j.value("target", std::string{"cell"});
    if (type == "cell") {
      a.target = {TargetType::cell, detail::option_at(problem_, j, "option"),
                  detail::criterion_at(problem_, j, "criterion")};
    } else if (type == "option") {
      a.target = {TargetType::option, detail::option_at(problem_, j, "option"), 0};
    } else if (type == "weight") {
      a.target = {TargetType::weight, 0, detail::criterion_at(problem_, j, "criterion")};
    } else {
      throw request_error("unknown agreement target '" + type + "'");
    }
    a.value = detail::number_at(j, "value");
    return a;
  }

  [[nodiscard]] auto agreement_to_json(Agreement const& a) const -> nlohmann::json {
    auto j = nlohmann::json{{"value", a.value}};
    switch (a.target.type) {
      case TargetType::cell:
        j["target"] = "cell";
        j["option"] = problem_.options.at(a.target.option).id;
        j["criterion"] = problem_.criteria.at(a.target.criterion).id;
        break;
      case TargetType::option:
        j["target"] = "option";
        j["option"] = problem_.options.at(a.target.option).id;
        break;
      case TargetType::weight:
        j["target"] = "weight";
        j["criterion"] = problem_.criteria.at(a.target.criterion).id;
        break;
    }
    return j;
  }

  [[nodiscard]] auto submission_from_json(nlohmann::json const& j) const -> AppraisalSubmission {
    auto sub = AppraisalSubmission{};
    sub.participant = detail::participant_at(problem_, j, "participant");
    for (auto const& e : j.value("scores", nlohmann::json::array())) {
      sub.scores.push_back(
          {detail::option_at(problem_, e, "option"), detail::criterion_at(problem_, e, "criterion"),
           detail::number_at(e, "value")});
    }
    for (auto const& e : j.value("weights", nlohmann::json::array())) {
      sub.weights.push_back({detail::criterion_at(problem_, e, "criterion"), detail::number_at(e, "value")});
    }
    return sub;
  }

  [[nodiscard]] auto submission_to_json(AppraisalSubmission const& sub) const -> nlohmann::json {
    auto scores = nlohmann::json::array();
    for (auto const& s : sub.scores) {
      scores.push_back({{"option", problem_.options.at(s.option).id},
                        {"criterion", problem_.criteria.at(s.criterion).id},
                        {"value", s.value}});
    }
    auto weights = nlohmann::json::array();
    for (auto const& w : sub.weights) {
      weights.push_back({{"criterion", problem_.criteria.at(w.criterion).id}, {"value", w.value}});
    }
    return {{"participant", problem_.participants.at(sub.participant).id}, {"scores", scores}, {"weights", weights}};
  }

 private:
  static auto kind_of(AgreementTarget const& t) -> EventKind {
    switch (t.type) {
      case TargetType::cell:
        return EventKind::criterion_agreed;
      case TargetType::option:
        return EventKind::option_agreed;
      case TargetType::weight:
        return EventKind::weight_agreed;
    }
    return EventKind::criterion_agreed;
  }

  [[nodiscard]] auto status_name(std::size_t i) const -> std::string {
    switch (state_.status(i)) {
      case OptionStatus::definitely_in:
        return "definitely_in";
      case OptionStatus::definitely_out:
        return "definitely_out";
      case OptionStatus::robust:
        return "robust";
      case OptionStatus::dominated:
        return "dominated";
      case OptionStatus::undetermined:
        return "borderline";
    }
    return "borderline";
  }

  // Last action still in the log; undone actions keep their numbers retired.
  [[nodiscard]] auto last_action() const -> std::uint64_t { return events_.empty() ? 0 : events_.back().action; }

  void check_version(std::optional<std::uint64_t> expected) const {
    if (expected && *expected != version_) {
      throw version_conflict(*expected, version_);
    }
  }

  void check_score(double v) const {
    if (!std::isfinite(v) || (v != config_.sentinel && (v < kScaleMin || v > kScaleMax))) {
      throw request_error("scores must lie on the 0-100 scale or equal the prohibitive value " +
                          std::to_string(config_.sentinel));
    }
  }

  auto now() const -> std::int64_t {
    auto t = std::chrono::duration_cast<std::chrono::milliseconds>(
                 std::chrono::system_clock::now().time_since_epoch())
                 .count();
    return std::max<std::int64_t>(t, last_timestamp_);
  }

  // Appends a mutation plus its derived events and bumps the version.
  void commit(SessionEvent e, AgreementResult const& result) {
    auto const action = e.action;
    auto const ts = e.timestamp_ms;
    auto const payload = e.payload;
    events_.push_back(std::move(e));
    if (result.status == AgreementStatus::reinitialized) {
      auto dropped = nlohmann::json::array();
      for (auto const& a : result.dropped) {
        dropped.push_back(agreement_to_json(a));
      }
      events_.push_back(SessionEvent{EventKind::reinitialized, action, ts,
                                     {{"cause", payload}, {"dropped", dropped}, {"count", reinit_count_}}});
    }
    last_timestamp_ = ts;
    next_action_ = action + 1;
    ++version_;
    recommendation_.reset();
    if (auto const& rec = recommendation()) {
      events_.push_back(SessionEvent{EventKind::recommendation_issued, action, ts, recommendation_json(*rec, true)});
    }
  }

  // Executes a mutation against the current session without logging it.
  auto apply(SessionEvent const& e) -> AgreementResult {
    if (e.kind == EventKind::appraisal_submitted) {
      auto sub = submission_from_json(e.payload);
      apply_submission(sub);
      auto result = AgreementResult{};
      result.dropped = rebuild();
      return result;
    }
    auto a = agreement_from_json(e.payload);
    if (kind_of(a.target) != e.kind) {
      throw request_error("event kind does not match its agreement target");
    }
    return apply_agreement(a);
  }

  void apply_submission(AppraisalSubmission const& sub) {
    for (auto const& s : sub.scores) {
      check_score(s.value);
    }
    if (!sub.weights.empty() && problem_.has_fixed_weights()) {
      throw request_error("this problem has precise weights; individual weights are not collected");
    }
    for (auto const& w : sub.weights) {
      if (!std::isfinite(w.value) || w.value < 0.0) {
        throw request_error("individual weights must be finite and non-negative");
      }
      if (problem_.swing().reference == w.criterion && w.value != kReferenceSwing) {
        throw request_error("the reference criterion carries the weight 100");
      }
    }
    for (auto const& s : sub.scores) {
      store_.set_score(s.option, s.criterion, sub.participant, s.value);
    }
    for (auto const& w : sub.weights) {
      store_.set_weight(w.criterion, sub.participant, w.value);
    }
  }

  auto apply_agreement(Agreement const& a) -> AgreementResult {
    auto const& t = a.target;
    if (t.type != TargetType::weight) {
      check_score(a.value);
    }
    auto result = AgreementResult{};
    auto outcome = AgreementOutcome::applied;
    switch (t.type) {
      case TargetType::cell:
        outcome = state_.agree_cell(t.option, t.criterion, a.value);
        break;
      case TargetType::option:
        if (!state_.fixed_weights_mode()) {
          throw request_error("option-level agreements need precise weights; agree the criterion scores instead");
        }
        outcome = state_.agree_option(t.option, a.value);
        if (outcome != AgreementOutcome::applied) {
          throw request_error("the agreed overall score does not fit the option's range; agree its criterion "
                              "scores instead");
        }
        break;
      case TargetType::weight:
        if (state_.fixed_weights_mode()) {
          throw request_error("this problem has precise weights");
        }
        if (problem_.swing().reference == t.criterion) {
          throw request_error("the reference criterion's weight is fixed");
        }
        if (!std::isfinite(a.value) || a.value < 0.0) {
          throw request_error("weights must be finite and non-negative");
        }
        outcome = state_.agree_weight(t.criterion, a.value);
        break;
    }
    agreements_.push_back(a);
    if (outcome == AgreementOutcome::applied) {
      classify(state_, config_.pda, config_.rule);
      return result;
    }
    // Outside the range: every individual appraisal is overridden and the
    // programme restarts from the complete option set.
    if (t.type == TargetType::cell) {
      store_.override_cell(t.option, t.criterion, a.value);
    } else {
      store_.override_weight(t.criterion, a.value);
    }
    ++reinit_count_;
    result.status = AgreementStatus::reinitialized;
    result.dropped = rebuild();
    return result;
  }

  // Fresh state from the current appraisals, with surviving agreements
  // replayed in order. Returns the agreements that no longer fit.
  auto rebuild() -> std::vector<Agreement> {
    state_ = SessionState::initial(problem_, store_);
    predictions_ = predict_all(problem_, store_, predictor_);
    auto kept = std::vector<Agreement>{};
    auto dropped = std::vector<Agreement>{};
    for (auto const& a : agreements_) {
      auto outcome = AgreementOutcome::applied;
      switch (a.target.type) {
        case TargetType::cell:
          outcome = state_.agree_cell(a.target.option, a.target.criterion, a.value);
          break;
        case TargetType::option:
          outcome = state_.agree_option(a.target.option, a.value);
          break;
        case TargetType::weight:
          outcome = state_.agree_weight(a.target.criterion, a.value);
          break;
      }
      (outcome == AgreementOutcome::applied ? kept : dropped).push_back(a);
    }
    agreements_ = std::move(kept);
    classify(state_, config_.pda, config_.rule);
    recommendation_.reset();
    return dropped;
  }

  void replay_mutations() {
    store_ = initial_;
    agreements_.clear();
    reinit_count_ = 0;
    rebuild();
    for (auto const& e : events_) {
      if (is_mutation(e.kind)) {
        apply(e);
      }
    }
  }

  std::string id_;
  DecisionProblem problem_;
  PredictorChoice predictor_;
  ServiceConfig config_;
  AppraisalStore initial_;
  AppraisalStore store_;
  SessionState state_;
  Predictions predictions_;
  std::vector<Agreement> agreements_;
  std::vector<SessionEvent> events_;
  std::size_t reinit_count_ = 0;
  std::uint64_t version_ = 0;
  std::uint64_t next_action_ = 1;
  std::int64_t last_timestamp_ = 0;
  std::optional<std::optional<Recommendation>> recommendation_;
};

// ---------------------------------------------------------------------------
// Log replay and CSV import

struct ReplayResult {
  WorkshopSession session;
  std::size_t events = 0;
  std::size_t snapshots_checked = 0;
  std::optional<std::size_t> truncated_line;  // ignored incomplete final line
};

/// Rebuilds a session from a newline-delimited log. Snapshot hashes are
/// verified against the replayed state. A final line without a newline that
/// does not parse is treated as an interrupted write and skipped.
[[nodiscard]] inline auto replay_log(std::string_view text) -> ReplayResult {
  auto lines = std::vector<std::string_view>{};
  auto pos = std::size_t{0};
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) {
      lines.push_back(text.substr(pos));
      break;
    }
    lines.push_back(text.substr(pos, end - pos));
    pos = end + 1;
  }
  auto const unterminated = !text.empty() && text.back() != '\n';
  auto session = std::optional<WorkshopSession>{};
  auto result_events = std::size_t{0};
  auto checked = std::size_t{0};
  auto truncated = std::optional<std::size_t>{};
  for (std::size_t n = 0; n < lines.size(); ++n) {
    auto const line_no = n + 1;
    auto line = lines[n];
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      continue;
    }
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      if (unterminated && n + 1 == lines.size()) {
        truncated = line_no;
        break;
      }
      throw log_error(line_no, "not a JSON object");
    }
    try {
      auto type = j.value("type", std::string{});
      if (type == "header") {
        if (session) {
          throw log_error(line_no, "second header");
        }
        session.emplace(WorkshopSession::from_header(j));
      } else if (!session) {
        throw log_error(line_no, "log does not start with a header");
      } else if (type == "event") {
        session->replay_event(event_from_json(j));
        ++result_events;
      } else if (type == "snapshot") {
        auto expected = j.at("state_hash").get<std::string>();
        if (expected != session->state_hash_hex()) {
          throw log_error(line_no, "state hash mismatch (log " + expected + ", replay " + session->state_hash_hex() +
                                       ")");
        }
        session->adopt_version(j.value("version", std::uint64_t{0}));
        ++checked;
      } else {
        throw log_error(line_no, "unknown record type '" + type + "'");
      }
    } catch (log_error const&) {
      throw;
    } catch (std::exception const& e) {
      throw log_error(line_no, e.what());
    }
  }
  if (!session) {
    throw log_error(1, "log has no header");
  }
  return ReplayResult{std::move(*session), result_events, checked, truncated};
}

namespace detail {

inline auto trim(std::string_view s) -> std::string_view {
  auto const b = s.find_first_not_of(" \t\r\"");
  if (b == std::string_view::npos) {
    return {};
  }
  auto const e = s.find_last_not_of(" \t\r\"");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Parses rows `participant,option,criterion,value`. An empty option field
/// makes the row an individual weight. A first row starting with
/// "participant" is taken as a header. Rows are grouped per participant in
/// order of first appearance.
[[nodiscard]] inline auto parse_appraisal_csv(std::string_view text, DecisionProblem const& problem)
    -> std::vector<AppraisalSubmission> {
  auto out = std::vector<AppraisalSubmission>{};
  auto stream = std::istringstream{std::string(text)};
  auto line = std::string{};
  auto line_no = std::size_t{0};
  while (std::getline(stream, line)) {
    ++line_no;
    if (detail::trim(line).empty()) {
      continue;
    }
    auto fields = std::vector<std::string_view>{};
    auto view = std::string_view(line);
    auto start = std::size_t{0};
    while (true) {
      auto comma = view.find(',', start);
      fields.push_back(detail::trim(view.substr(start, comma == std::string_view::npos ? comma : comma - start)));
      if (comma == std::string_view::npos) {
        break;
      }
      start = comma + 1;
    }
    if (line_no == 1 && fields.front() == "participant") {
      continue;
    }
    auto fail = [&](std::string const& what) {
      return request_error("CSV line " + std::to_string(line_no) + ": " + what);
    };
    if (fields.size() != 4) {
      throw fail("expected 4 fields");
    }
    auto k = problem.participant_index(fields[0]);
    if (!k) {
      throw fail("unknown participant '" + std::string(fields[0]) + "'");
    }
    auto j = problem.criterion_index(fields[2]);
    if (!j) {
      throw fail("unknown criterion '" + std::string(fields[2]) + "'");
    }
    auto value = 0.0;
    try {
      auto used = std::size_t{0};
      value = std::stod(std::string(fields[3]), &used);
      if (used != fields[3].size()) {
        throw std::invalid_argument("trailing characters");
      }
    } catch (std::exception const&) {
      throw fail("value '" + std::string(fields[3]) + "' is not a number");
    }
    auto it = std::find_if(out.begin(), out.end(), [&](auto const& s) { return s.participant == *k; });
    if (it == out.end()) {
      out.push_back(AppraisalSubmission{*k, {}, {}});
      it = std::prev(out.end());
    }
    if (fields[1].empty()) {
      it->weights.push_back({*j, value});
    } else {
      auto i = problem.option_index(fields[1]);
      if (!i) {
        throw fail("unknown option '" + std::string(fields[1]) + "'");
      }
      it->scores.push_back({*i, *j, value});
    }
  }
  return out;
}

}  // namespace voa

#endif  // VOA_WORKSHOP_SERVICE_HPP_
