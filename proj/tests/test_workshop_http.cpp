#include <voa/workshop_http.hpp>

#include <gtest/gtest.h>

#include "support/fixtures.hpp"

#include <thread>

using namespace voa;
using namespace voa::testing;
using nlohmann::json;

namespace {

class HttpApi : public ::testing::Test {
 protected:
  void SetUp() override {
    register_routes(server_, registry_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }

  void TearDown() override {
    server_.stop();
    thread_.join();
  }

  auto post(std::string const& path, json const& body) -> std::pair<int, json> {
    auto res = client_->Post(path, body.dump(), "application/json");
    EXPECT_TRUE(res) << path;
    return {res->status, json::parse(res->body)};
  }

  auto post_raw(std::string const& path, std::string const& body) -> int {
    auto res = client_->Post(path, body, "application/json");
    return res ? res->status : -1;
  }

  auto get(std::string const& path) -> std::pair<int, json> {
    auto res = client_->Get(path);
    EXPECT_TRUE(res) << path;
    return {res->status, json::parse(res->body)};
  }

  auto create_worked() -> std::string {
    auto p = worked_example_problem();
    auto [status, body] =
        post("/sessions", {{"problem", to_json(p)}, {"appraisals", appraisals_to_json(p, worked_example_store(p))}});
    EXPECT_EQ(status, 201);
    return body["id"].get<std::string>();
  }

  httplib::Server server_;
  SessionRegistry registry_;
  int port_ = 0;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
};

}  // namespace

TEST_F(HttpApi, CreateIssuesDistinctIds) {
  auto a = create_worked();
  auto b = create_worked();
  EXPECT_NE(a, b);
  EXPECT_EQ(registry_.size(), 2U);
  auto p = to_json(worked_example_problem());
  EXPECT_EQ(post("/sessions", {{"id", "room-1"}, {"problem", p}}).first, 201);
  EXPECT_EQ(post("/sessions", {{"id", "room-1"}, {"problem", p}}).first, 409);
  EXPECT_EQ(post("/sessions", {{"nothing", 1}}).first, 422);
  p["criteria"] = json::array();
  EXPECT_EQ(post("/sessions", {{"problem", p}}).first, 422);
  EXPECT_EQ(post_raw("/sessions", "{not json"), 422);
}

TEST_F(HttpApi, WorkedExampleOverHttp) {
  auto id = create_worked();
  auto [status, rec] = get("/sessions/" + id + "/recommendation");
  EXPECT_EQ(status, 200);
  EXPECT_EQ(rec["recommendation"]["target"], "o4");
  EXPECT_EQ(rec["recommendation"]["phi"], 66.0);

  auto [s1, r1] = post("/sessions/" + id + "/agreements",
                       {{"target", "cell"}, {"option", "o4"}, {"criterion", "c1"}, {"value", 78}, {"expected_version", 0}});
  EXPECT_EQ(s1, 200);
  EXPECT_EQ(r1["outcome"], "applied");
  EXPECT_EQ(r1["version"], 1);
  auto [s2, r2] = post("/sessions/" + id + "/agreements",
                       {{"target", "cell"}, {"option", "o4"}, {"criterion", "c2"}, {"value", 38}});
  EXPECT_EQ(s2, 200);

  auto [cs, chart] = get("/sessions/" + id + "/chart?audience=facilitator");
  EXPECT_EQ(cs, 200);
  EXPECT_EQ(chart["bars"][1]["hi"], 64.0);
  EXPECT_EQ(chart["bars"][1]["zone"], "red");
  auto [ps, participant] = get("/sessions/" + id + "/chart");
  EXPECT_EQ(ps, 200);
  EXPECT_EQ(participant["audience"], "participant");
  EXPECT_FALSE(participant["bars"][1].contains("predicted"));
  EXPECT_FALSE(participant.contains("phi"));
  EXPECT_EQ(get("/sessions/" + id + "/chart?audience=everyone").first, 422);
}

TEST_F(HttpApi, ReinitializationAndUndo) {
  auto id = create_worked();
  auto [s1, r1] = post("/sessions/" + id + "/agreements",
                       {{"target", "cell"}, {"option", "o1"}, {"criterion", "c1"}, {"value", 99}});
  EXPECT_EQ(s1, 200);
  EXPECT_EQ(r1["outcome"], "reinitialized");
  auto [s2, r2] = post("/sessions/" + id + "/undo", {{"expected_version", 1}});
  EXPECT_EQ(s2, 200);
  EXPECT_EQ(r2["version"], 2);
  EXPECT_EQ(post("/sessions/" + id + "/undo", json::object()).first, 422);
}

TEST_F(HttpApi, ErrorStatuses) {
  auto id = create_worked();
  EXPECT_EQ(get("/sessions/nope/chart").first, 404);
  EXPECT_EQ(post("/sessions/nope/agreements", {{"target", "cell"}}).first, 404);
  auto [vs, vb] = post("/sessions/" + id + "/agreements",
                       {{"target", "cell"}, {"option", "o4"}, {"criterion", "c1"}, {"value", 78}, {"expected_version", 5}});
  EXPECT_EQ(vs, 409);
  EXPECT_EQ(vb["version"], 0);
  EXPECT_EQ(post("/sessions/" + id + "/agreements", {{"target", "cell"}, {"option", "o9"}, {"criterion", "c1"}, {"value", 1}})
                .first,
            422);
  EXPECT_EQ(post("/sessions/" + id + "/agreements", {{"target", "option"}, {"option", "o1"}, {"value", 5}}).first, 422);
  EXPECT_EQ(post("/sessions/" + id + "/agreements", {{"target", "cell"}, {"option", "o1"}, {"criterion", "c1"}, {"value", "x"}})
                .first,
            422);
  EXPECT_EQ(post("/sessions/" + id + "/agreements", {{"target", "cell"}, {"expected_version", -1}}).first, 422);
  EXPECT_EQ(get("/sessions/" + id + "/recommendation").second["version"], 0);
}

TEST_F(HttpApi, AppraisalsAndCsvImport) {
  auto p = make_problem(2, 2, 2, FixedWeights{{0.5, 0.5}});
  auto [status, created] = post("/sessions", {{"problem", to_json(p)}});
  ASSERT_EQ(status, 201);
  auto id = created["id"].get<std::string>();
  auto [s1, r1] = post("/sessions/" + id + "/appraisals",
                       {{"participant", "p1"},
                        {"scores", {{{"option", "o1"}, {"criterion", "c1"}, {"value", 80}},
                                    {{"option", "o1"}, {"criterion", "c2"}, {"value", -300}}}}});
  EXPECT_EQ(s1, 200);
  EXPECT_EQ(r1["version"], 1);
  auto csv = std::string("participant,option,criterion,value\np1,o2,c1,40\np1,o2,c2,45\np2,o1,c1,70\np2,o1,c2,75\n"
                         "p2,o2,c1,35\np2,o2,c2,50\n");
  auto [s2, r2] = post("/sessions/" + id + "/appraisals", {{"csv", csv}});
  EXPECT_EQ(s2, 200);
  EXPECT_EQ(r2["version"], 3);
  EXPECT_EQ(post("/sessions/" + id + "/appraisals", {{"csv", "p3,o1,c1,5\n"}}).first, 422);
  EXPECT_EQ(post("/sessions/" + id + "/appraisals",
                 {{"participant", "p1"}, {"scores", {{{"option", "o1"}, {"criterion", "c1"}, {"value", 250}}}}})
                .first,
            422);
  auto [cs, chart] = get("/sessions/" + id + "/chart");
  EXPECT_EQ(chart["bars"][0]["lo"], 0.5 * 70 + 0.5 * -300);
}

TEST_F(HttpApi, ExportReplaysToTheSameState) {
  auto id = create_worked();
  (void)post("/sessions/" + id + "/agreements", {{"target", "cell"}, {"option", "o4"}, {"criterion", "c1"}, {"value", 78}});
  (void)post("/sessions/" + id + "/agreements", {{"target", "cell"}, {"option", "o2"}, {"criterion", "c1"}, {"value", 95}});
  auto [status, exported] = get("/sessions/" + id + "/export");
  EXPECT_EQ(status, 200);
  auto replica = WorkshopSession::from_export(exported);
  EXPECT_EQ(replica.state_hash_hex(), exported["snapshot"]["state_hash"]);
  auto live = registry_.with(id, [](WorkshopSession& s) { return s.state_hash_hex(); });
  EXPECT_EQ(replica.state_hash_hex(), live);
}

TEST_F(HttpApi, ConcurrentWritersAreSerialized) {
  auto id = create_worked();
  auto workers = std::vector<std::thread>{};
  auto ok = std::atomic<int>{0};
  for (int w = 0; w < 4; ++w) {
    workers.emplace_back([&, w] {
      auto client = httplib::Client("127.0.0.1", port_);
      for (int n = 0; n < 5; ++n) {
        auto body = json{{"participant", "p" + std::to_string(1 + w % 3)},
                         {"scores", {{{"option", "o3"}, {"criterion", "c1"}, {"value", 40 + n}}}}};
        auto res = client.Post("/sessions/" + id + "/appraisals", body.dump(), "application/json");
        if (res && res->status == 200) {
          ++ok;
        }
      }
    });
  }
  for (auto& t : workers) {
    t.join();
  }
  EXPECT_EQ(ok.load(), 20);
  EXPECT_EQ(get("/sessions/" + id + "/recommendation").second["version"], 20);
}
