#ifndef VOA_WORKSHOP_HTTP_HPP_
#define VOA_WORKSHOP_HTTP_HPP_

// HTTP/JSON front end for workshop sessions. Needs cpp-httplib
// (<httplib.h>) on the include path.

#include "workshop_service.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

namespace voa {

class session_not_found : public std::runtime_error {
 public:
  explicit session_not_found(std::string const& id) : std::runtime_error("unknown session '" + id + "'") {}
};

class duplicate_session : public std::runtime_error {
 public:
  explicit duplicate_session(std::string const& id) : std::runtime_error("session '" + id + "' already exists") {}
};

/// All live sessions. Each session has its own mutex, so mutations of one
/// session are serialized while different sessions proceed independently.
class SessionRegistry {
 public:
  struct Entry {
    std::mutex mutex;
    WorkshopSession session;

    explicit Entry(WorkshopSession s) : session(std::move(s)) {}
  };

  /// Creates a session from a POST /sessions body and returns its id.
  auto create(nlohmann::json const& body) -> std::string {
    if (!body.is_object() || !body.contains("problem")) {
      throw request_error("body must carry a 'problem'");
    }
    auto problem = problem_from_json(body.at("problem"));
    auto store = appraisals_from_json(problem, body.value("appraisals", nlohmann::json{}));
    auto predictor = predictor_from_json(body.value("predictor", nlohmann::json{}));
    auto config = config_from_json(body.value("config", nlohmann::json{}));
    auto lock = std::unique_lock(mutex_);
    auto id = std::string{};
    if (body.contains("id")) {
      id = body.at("id").get<std::string>();
      if (id.empty()) {
        throw request_error("session id must not be empty");
      }
      if (sessions_.contains(id)) {
        throw duplicate_session(id);
      }
    } else {
      do {
        id = "s" + std::to_string(++counter_);
      } while (sessions_.contains(id));
    }
    sessions_.emplace(id, std::make_shared<Entry>(WorkshopSession(id, std::move(problem), predictor, config,
                                                                  std::move(store))));
    return id;
  }

  auto add(WorkshopSession session) -> std::string {
    auto lock = std::unique_lock(mutex_);
    auto id = session.id();
    if (sessions_.contains(id)) {
      throw duplicate_session(id);
    }
    sessions_.emplace(id, std::make_shared<Entry>(std::move(session)));
    return id;
  }

  [[nodiscard]] auto find(std::string const& id) const -> std::shared_ptr<Entry> {
    auto lock = std::shared_lock(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) {
      throw session_not_found(id);
    }
    return it->second;
  }

  /// Runs `fn` on a session while holding its lock.
  template <typename Fn>
  auto with(std::string const& id, Fn&& fn) {
    auto entry = find(id);
    auto lock = std::scoped_lock(entry->mutex);
    return fn(entry->session);
  }

  [[nodiscard]] auto size() const -> std::size_t {
    auto lock = std::shared_lock(mutex_);
    return sessions_.size();
  }

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::size_t counter_ = 0;
};

namespace detail {

inline void send_json(httplib::Response& res, int status, nlohmann::json const& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline auto parse_body(httplib::Request const& req) -> nlohmann::json {
  if (req.body.empty()) {
    return nlohmann::json::object();
  }
  auto j = nlohmann::json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw request_error("request body must be a JSON object");
  }
  return j;
}

inline auto expected_version(nlohmann::json const& body) -> std::optional<std::uint64_t> {
  if (!body.contains("expected_version") || body.at("expected_version").is_null()) {
    return std::nullopt;
  }
  if (!body.at("expected_version").is_number_unsigned()) {
    throw request_error("expected_version must be a non-negative integer");
  }
  return body.at("expected_version").get<std::uint64_t>();
}

// Maps library errors onto status codes.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (session_not_found const& e) {
    send_json(res, 404, {{"error", e.what()}});
  } catch (duplicate_session const& e) {
    send_json(res, 409, {{"error", e.what()}});
  } catch (version_conflict const& e) {
    send_json(res, 409, {{"error", e.what()}, {"version", e.actual()}});
  } catch (model_error const& e) {
    send_json(res, 422, {{"error", e.what()}});
  } catch (nlohmann::json::exception const& e) {
    send_json(res, 400, {{"error", e.what()}});
  } catch (std::exception const& e) {
    send_json(res, 500, {{"error", e.what()}});
  }
}

inline auto result_json(WorkshopSession& s, AgreementResult const& r) -> nlohmann::json {
  auto dropped = nlohmann::json::array();
  for (auto const& a : r.dropped) {
    dropped.push_back(s.agreement_to_json(a));
  }
  auto statuses = nlohmann::json::object();
  for (std::size_t i = 0; i < s.problem().n_options(); ++i) {
    statuses[s.problem().options[i].id] = to_string(s.state().status(i));
  }
  auto const& rec = s.recommendation();
  return {{"version", s.version()},
          {"outcome", r.status == AgreementStatus::applied ? "applied" : "reinitialized"},
          {"dropped", dropped},
          {"statuses", statuses},
          {"resolved", resolved(s.state())},
          {"recommendation", rec ? s.recommendation_json(*rec, true) : nlohmann::json(nullptr)}};
}

}  // namespace detail

/// Installs the session endpoints on `server`.
inline void register_routes(httplib::Server& server, SessionRegistry& registry) {
  using httplib::Request;
  using httplib::Response;

  server.Post("/sessions", [&registry](Request const& req, Response& res) {
    detail::guarded(res, [&] {
      auto id = registry.create(detail::parse_body(req));
      detail::send_json(res, 201, {{"id", id}, {"version", 0}});
    });
  });

  server.Post(R"(/sessions/([^/]+)/appraisals)", [&registry](Request const& req, Response& res) {
    detail::guarded(res, [&] {
      auto body = detail::parse_body(req);
      auto out = registry.with(req.matches[1], [&](WorkshopSession& s) {
        auto expected = detail::expected_version(body);
        auto subs = std::vector<AppraisalSubmission>{};
        if (body.contains("csv")) {
          subs = parse_appraisal_csv(body.at("csv").get<std::string>(), s.problem());
        } else {
          subs.push_back(s.submission_from_json(body));
        }
        auto r = AgreementResult{};
        for (auto const& sub : subs) {
          auto step = s.submit_appraisals(sub, expected);
          expected.reset();
          r.dropped.insert(r.dropped.end(), step.dropped.begin(), step.dropped.end());
        }
        return detail::result_json(s, r);
      });
      detail::send_json(res, 200, out);
    });
  });

  server.Post(R"(/sessions/([^/]+)/agreements)", [&registry](Request const& req, Response& res) {
    detail::guarded(res, [&] {
      auto body = detail::parse_body(req);
      auto out = registry.with(req.matches[1], [&](WorkshopSession& s) {
        auto r = s.record_agreement(s.agreement_from_json(body), detail::expected_version(body));
        return detail::result_json(s, r);
      });
      detail::send_json(res, 200, out);
    });
  });

  server.Post(R"(/sessions/([^/]+)/undo)", [&registry](Request const& req, Response& res) {
    detail::guarded(res, [&] {
      auto body = detail::parse_body(req);
      auto out = registry.with(req.matches[1], [&](WorkshopSession& s) {
        s.undo(detail::expected_version(body));
        return nlohmann::json{{"version", s.version()}, {"state_hash", s.state_hash_hex()}};
      });
      detail::send_json(res, 200, out);
    });
  });

  server.Get(R"(/sessions/([^/]+)/chart)", [&registry](Request const& req, Response& res) {
    detail::guarded(res, [&] {
      auto audience = parse_audience(req.has_param("audience") ? req.get_param_value("audience") : "participant");
      auto out = registry.with(req.matches[1], [&](WorkshopSession& s) { return s.chart(audience); });
      detail::send_json(res, 200, out);
    });
  });

  server.Get(R"(/sessions/([^/]+)/recommendation)", [&registry](Request const& req, Response& res) {
    detail::guarded(res, [&] {
      auto out = registry.with(req.matches[1], [&](WorkshopSession& s) {
        auto const& rec = s.recommendation();
        auto j = nlohmann::json{{"version", s.version()}, {"resolved", resolved(s.state())}};
        j["recommendation"] = rec ? s.recommendation_json(*rec, true) : nlohmann::json(nullptr);
        return j;
      });
      detail::send_json(res, 200, out);
    });
  });

  server.Get(R"(/sessions/([^/]+)/export)", [&registry](Request const& req, Response& res) {
    detail::guarded(res, [&] {
      auto out = registry.with(req.matches[1], [&](WorkshopSession& s) { return s.export_json(); });
      detail::send_json(res, 200, out);
    });
  });
}

}  // namespace voa

#endif  // VOA_WORKSHOP_HTTP_HPP_
