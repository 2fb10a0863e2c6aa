#include <future>
#include <set>
#include <sstream>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "service.hpp"
#include "test_support.hpp"

namespace agentmem::service {
namespace {

using nlohmann::json;
using testing::TempDir;

json rpc(RpcSession& s, const std::string& line) {
  const auto reply = s.handle(line);
  EXPECT_TRUE(reply) << line;
  return reply ? json::parse(*reply) : json();
}

TEST(Rpc, MethodsAndErrorCodes) {
  TempDir dir;
  Engine engine(testing::config_in(dir));
  RpcSession s(engine);

  auto r = rpc(s, R"({"jsonrpc":"2.0","id":1,"method":"remember","params":{"content":"helm chart values override","agent":"claude"}})");
  ASSERT_TRUE(r.contains("result")) << r;
  const auto id = r["result"]["id"].get<std::uint64_t>();
  EXPECT_EQ(engine.agents().at(0).protocol, Protocol::MCP);

  r = rpc(s, R"({"jsonrpc":"2.0","id":2,"method":"recall","params":{"query":"helm values","agent":"claude"}})");
  ASSERT_TRUE(r["result"].is_array());
  ASSERT_EQ(r["result"].size(), 1u);
  EXPECT_EQ(r["result"][0]["id"], id);
  // Same shape as REST /search.
  EXPECT_EQ(r["result"], hits_to_json(engine.pipeline().search({"helm values", 10, {}})));

  r = rpc(s, R"({"jsonrpc":"2.0","id":3,"method":"memory_used","params":{"memory_id":)" + std::to_string(id) +
                 R"(,"query":"helm values"}})");
  EXPECT_EQ(r["result"]["recorded"], true);
  EXPECT_EQ(engine.learning_store().signals().back().channel, learning::Channel::ToolUsed);

  r = rpc(s, R"({"jsonrpc":"2.0","id":4,"method":"memory_used","params":{"memory_id":999}})");
  EXPECT_EQ(r["error"]["code"], -32602);
  EXPECT_EQ(r["error"]["data"]["error"], "NotFound");

  r = rpc(s, "{not json");
  EXPECT_EQ(r["error"]["code"], -32600);
  r = rpc(s, R"({"jsonrpc":"2.0","id":5,"method":"teleport"})");
  EXPECT_EQ(r["error"]["code"], -32601);
  r = rpc(s, R"({"jsonrpc":"2.0","id":6,"method":"recall","params":[1,2]})");
  EXPECT_EQ(r["error"]["code"], -32602);
  r = rpc(s, R"({"id":7,"method":"status"})");
  EXPECT_EQ(r["error"]["code"], -32600);
  r = rpc(s, R"({"jsonrpc":"2.0","id":8,"method":"status"})");
  EXPECT_EQ(r["result"]["memories"], 1);

  EXPECT_FALSE(s.handle(R"({"jsonrpc":"2.0","method":"status"})"));
  EXPECT_FALSE(s.handle("   "));
}

TEST(Rpc, LoopContinuesAfterMalformedLine) {
  TempDir dir;
  Engine engine(testing::config_in(dir));
  RpcSession s(engine);
  std::istringstream in("garbage\n{\"jsonrpc\":\"2.0\",\"id\":9,\"method\":\"status\"}\n");
  std::ostringstream out;
  s.run(in, out);
  std::istringstream lines(out.str());
  std::string first, second;
  std::getline(lines, first);
  std::getline(lines, second);
  EXPECT_EQ(json::parse(first)["error"]["code"], -32600);
  EXPECT_EQ(json::parse(second)["id"], 9);
}

class RestTest : public ::testing::Test {
 protected:
  void SetUp() override {
    engine_ = std::make_unique<Engine>(testing::config_in(dir_));
    server_ = std::make_unique<RestServer>(*engine_);
    port_ = server_->bind("127.0.0.1", 0);
    thread_ = std::thread([this] { server_->serve(); });
  }
  void TearDown() override {
    server_->stop();
    thread_.join();
  }
  httplib::Client client() {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(10, 0);
    return c;
  }

  TempDir dir_;
  std::unique_ptr<Engine> engine_;
  std::unique_ptr<RestServer> server_;
  int port_ = 0;
  std::thread thread_;
};

TEST_F(RestTest, MemoryLifecycle) {
  auto c = client();
  auto res = c.Get("/search?q=anything");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body), json::array());

  res = c.Post("/memories", R"({"content":"celery beat schedule"})", "application/json");
  EXPECT_EQ(res->status, 400);  // no X-Agent-Id

  httplib::Headers h = {{"X-Agent-Id", "gemini"}};
  res = c.Post("/memories", h, R"({"content":"celery beat schedule","tags":["python"],"importance":6})",
               "application/json");
  ASSERT_EQ(res->status, 201);
  const auto id = json::parse(res->body)["id"].get<std::uint64_t>();
  EXPECT_EQ(engine_->agents().at(0).protocol, Protocol::REST);

  res = c.Post("/memories", h, R"({"content":42})", "application/json");
  EXPECT_EQ(res->status, 400);
  res = c.Post("/memories", h, "{oops", "application/json");
  EXPECT_EQ(res->status, 400);

  res = c.Get("/memories/" + std::to_string(id));
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["content"], "celery beat schedule");
  res = c.Get("/search?q=celery&limit=5");
  EXPECT_EQ(json::parse(res->body).size(), 1u);

  res = c.Post("/feedback", h, R"({"memory_id":)" + std::to_string(id) + R"(,"query":"celery"})",
               "application/json");
  EXPECT_EQ(res->status, 202);
  EXPECT_EQ(engine_->learning_store().signal_count(), 1u);

  res = c.Get("/agents");
  std::set<std::string> names;
  for (const auto& a : json::parse(res->body)) names.insert(a["id"].get<std::string>());
  EXPECT_EQ(names, (std::set<std::string>{"anonymous", "gemini"}));  // unauthenticated reads count too
  res = c.Get("/agents/gemini/trust");
  EXPECT_EQ(res->status, 200);
  res = c.Get("/agents/nobody/trust");
  EXPECT_EQ(res->status, 404);

  res = c.Delete("/memories/" + std::to_string(id), h);
  EXPECT_EQ(res->status, 204);
  res = c.Get("/memories/" + std::to_string(id));
  EXPECT_EQ(res->status, 404);

  res = c.Post("/learning/reset", h, "", "application/json");
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(engine_->learning_store().signal_count(), 0u);
  res = c.Get("/graph/communities");
  EXPECT_EQ(res->status, 200);
  EXPECT_TRUE(json::parse(res->body).contains("levels"));
}

TEST_F(RestTest, LowTrustWriteIsForbidden) {
  engine_->register_agent({"mallory", Protocol::REST});
  for (int i = 0; i < 3; ++i) engine_->signal("mallory", trust::SignalKind::FlaggedContent);
  EXPECT_LT(engine_->trust_engine().trust("mallory"), 0.3);
  auto c = client();
  auto res = c.Post("/memories", {{"X-Agent-Id", "mallory"}}, R"({"content":"poison"})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 403);
  EXPECT_EQ(engine_->store().live_count(), 0u);
}

TEST_F(RestTest, EventStreamDeliversCreatedEvent) {
  std::promise<std::string> got;
  auto done = got.get_future();
  std::thread reader([&] {
    auto c = client();
    std::string buffer;
    bool delivered = false;
    c.Get("/events/stream?types=memory.created", [&](const char* data, std::size_t n) {
      buffer.append(data, n);
      if (buffer.find("event: memory.created") != std::string::npos) {
        got.set_value(buffer);
        delivered = true;
        return false;
      }
      return true;
    });
    if (!delivered) got.set_value(buffer);
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(300));
  auto c = client();
  auto res = c.Post("/memories", {{"X-Agent-Id", "writer"}}, R"({"content":"sse check"})", "application/json");
  ASSERT_EQ(res->status, 201);
  ASSERT_EQ(done.wait_for(std::chrono::seconds(10)), std::future_status::ready);
  const auto body = done.get();
  reader.join();
  EXPECT_NE(body.find("event: memory.created"), std::string::npos);
  EXPECT_NE(body.find("data: "), std::string::npos);
  EXPECT_EQ(body.find("agent.connected"), std::string::npos);
}

TEST(HttpStatus, Mapping) {
  EXPECT_EQ(http_status(ErrorCode::NotFound), 404);
  EXPECT_EQ(http_status(ErrorCode::TrustDenied), 403);
  EXPECT_EQ(http_status(ErrorCode::InvalidArgument), 400);
}

}  // namespace
}  // namespace agentmem::service
