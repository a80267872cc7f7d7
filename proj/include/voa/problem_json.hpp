#ifndef VOA_PROBLEM_JSON_HPP_
#define VOA_PROBLEM_JSON_HPP_

#include "core_model.hpp"

#include <nlohmann/json.hpp>

#include <string>

// Problem document layout:
//
//   {
//     "options":      [{"id": "o1", "label": "...", "cost": 1.0}, ...],
//     "criteria":     [{"id": "c1", "label": "..."}, ...],
//     "participants": [{"id": "p1", "label": "..."}, ...],
//     "budget":       1000,                        // optional, portfolio mode
//     "weights":      {"fixed": [0.5, 0.5]}
//                  or {"swing": {"reference": "c1", "ranges": [[100, 100], [50, 150]]}}
//   }

namespace voa {

namespace detail {

template <typename Def>
auto defs_to_json(std::vector<Def> const& defs) -> nlohmann::json {
  auto arr = nlohmann::json::array();
  for (auto const& d : defs) {
    auto j = nlohmann::json{{"id", d.id}, {"label", d.label}};
    if constexpr (requires { d.cost; }) {
      j["cost"] = d.cost;
    }
    arr.push_back(std::move(j));
  }
  return arr;
}

template <typename Def>
auto defs_from_json(nlohmann::json const& arr, char const* what) -> std::vector<Def> {
  if (!arr.is_array()) {
    throw model_error(std::string("'") + what + "' must be an array");
  }
  auto out = std::vector<Def>{};
  for (auto const& item : arr) {
    auto d = Def{};
    if (item.is_string()) {
      d.id = item.get<std::string>();
    } else if (item.is_object()) {
      d.id = item.at("id").get<std::string>();
      d.label = item.value("label", std::string{});
      if constexpr (requires { d.cost; }) {
        d.cost = item.value("cost", 1.0);
      }
    } else {
      throw model_error(std::string("malformed entry in '") + what + "'");
    }
    if (d.label.empty()) {
      d.label = d.id;
    }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace detail

[[nodiscard]] inline auto to_json(DecisionProblem const& p) -> nlohmann::json {
  auto j = nlohmann::json{{"options", detail::defs_to_json(p.options)},
                          {"criteria", detail::defs_to_json(p.criteria)},
                          {"participants", detail::defs_to_json(p.participants)}};
  if (p.budget) {
    j["budget"] = *p.budget;
  }
  if (auto const* fixed = std::get_if<FixedWeights>(&p.weights)) {
    j["weights"] = {{"fixed", fixed->values}};
  } else {
    auto const& swing = std::get<SwingRanges>(p.weights);
    auto ranges = nlohmann::json::array();
    for (auto const& r : swing.ranges) {
      ranges.push_back({r.lo, r.hi});
    }
    auto s = nlohmann::json{{"ranges", ranges}};
    if (swing.reference) {
      s["reference"] = p.criteria.at(*swing.reference).id;
    }
    j["weights"] = {{"swing", s}};
  }
  return j;
}

/// Parses and validates a problem document. Any structural problem surfaces
/// as model_error.
[[nodiscard]] inline auto problem_from_json(nlohmann::json const& j) -> DecisionProblem {
  auto p = DecisionProblem{};
  try {
    p.options = detail::defs_from_json<OptionDef>(j.at("options"), "options");
    p.criteria = detail::defs_from_json<CriterionDef>(j.at("criteria"), "criteria");
    p.participants = detail::defs_from_json<ParticipantDef>(j.at("participants"), "participants");
    if (j.contains("budget") && !j.at("budget").is_null()) {
      p.budget = j.at("budget").get<double>();
    }
    auto const& w = j.at("weights");
    if (w.contains("fixed")) {
      p.weights = FixedWeights{w.at("fixed").get<std::vector<double>>()};
    } else if (w.contains("swing")) {
      auto const& s = w.at("swing");
      auto swing = SwingRanges{};
      for (auto const& r : s.at("ranges")) {
        if (!r.is_array() || r.size() != 2) {
          throw model_error("swing ranges must be [lo, hi] pairs");
        }
        swing.ranges.push_back({r[0].get<double>(), r[1].get<double>()});
      }
      if (s.contains("reference") && !s.at("reference").is_null()) {
        auto ref = s.at("reference").get<std::string>();
        swing.reference = p.criterion_index(ref);
        if (!swing.reference) {
          throw model_error("unknown reference criterion '" + ref + "'");
        }
      }
      p.weights = std::move(swing);
    } else {
      throw model_error("weights must be either 'fixed' or 'swing'");
    }
  } catch (nlohmann::json::exception const& e) {
    throw model_error(std::string("malformed problem document: ") + e.what());
  }
  p.validate();
  return p;
}

}  // namespace voa

#endif  // VOA_PROBLEM_JSON_HPP_
