#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <thread>

#include "doctest.h"
#include "evdetect/llm_client.hpp"
#include "fake_transport.hpp"

using namespace evdetect;

namespace {

ProviderConfig live_config(const std::string& env_name) {
  ProviderConfig cfg;
  cfg.mode = ProviderMode::live;
  cfg.api_key_env = env_name;
  return cfg;
}

}  // namespace

TEST_CASE("mock embedding: deterministic, unit norm, model-dependent") {
  const Vector a = mock_embed("abc", 16, "m");
  CHECK(a.size() == 16);
  CHECK(a == mock_embed("abc", 16, "m"));
  CHECK(std::abs(a.norm() - 1.0) <= 1e-6);
  CHECK(a != mock_embed("abc", 16, "other"));
}

TEST_CASE("mock embedding: no duplicates over 1000 texts") {
  std::set<std::vector<double>> seen;
  for (int i = 0; i < 1000; ++i) {
    const Vector v = mock_embed("text " + std::to_string(i), 16, "m");
    CHECK(std::abs(v.norm() - 1.0) <= 1e-6);
    seen.insert(std::vector<double>(v.begin(), v.end()));
  }
  CHECK(seen.size() == 1000);
}

TEST_CASE("mock chat reply format") {
  const std::string r = mock_chat_reply("hello");
  CHECK(r.size() == 14);
  CHECK(r.rfind("MOCK(", 0) == 0);
  CHECK(r.back() == ')');
  CHECK(r == "MOCK(" + to_hex(fnv1a64("hello")).substr(0, 8) + ")");
  CHECK(is_mock_reply(r));
  CHECK_FALSE(is_mock_reply("Sports"));
  ProviderClient client{ProviderConfig{}};
  CHECK(client.chat_complete("hello") == r);
  CHECK_THROWS_AS(client.chat_complete(""), PreconditionError);
}

TEST_CASE("live mode without a key fails before any request") {
  ::unsetenv("EVDETECT_TEST_MISSING_KEY");
  auto transport = std::make_shared<fixtures::ScriptedTransport>();
  ProviderClient client(live_config("EVDETECT_TEST_MISSING_KEY"), transport);
  CHECK_THROWS_AS(client.embed({"x"}), ConfigError);
  CHECK(transport->calls.empty());
}

TEST_CASE("live mode sends the key from the environment") {
  ::setenv("EVDETECT_TEST_KEY", "sk-test-123", 1);
  auto transport = std::make_shared<fixtures::ScriptedTransport>();
  ProviderClient client(live_config("EVDETECT_TEST_KEY"), transport);
  client.embed({"x"});
  REQUIRE(transport->calls.size() == 1);
  CHECK(transport->calls[0].api_key == "sk-test-123");
  ::unsetenv("EVDETECT_TEST_KEY");
}

TEST_CASE("batch_size 1 gives one request per text in order") {
  ProviderConfig cfg;
  cfg.batch_size = 1;
  cfg.mock_dim = 8;
  auto transport = std::make_shared<fixtures::ScriptedTransport>();
  ProviderClient client(cfg, transport);
  const auto v = client.embed({"first", "second"}, "m");
  REQUIRE(transport->calls.size() == 2);
  CHECK(transport->calls[0].body["input"][0] == "first");
  CHECK(transport->calls[1].body["input"][0] == "second");
  CHECK(v[0] == mock_embed("first", 8, "m"));
  CHECK(v[1] == mock_embed("second", 8, "m"));
}

TEST_CASE("retry: 429 then 200 succeeds after one retry with backoff") {
  ProviderConfig cfg;
  cfg.max_retries = 1;
  auto transport = std::make_shared<fixtures::ScriptedTransport>();
  transport->queue(429);
  ProviderClient client(cfg, transport);
  std::vector<double> slept;
  client.set_sleeper([&](double d) { slept.push_back(d); });
  CHECK(client.chat_complete("prompt") == mock_chat_reply("prompt"));
  CHECK(client.stats().requests == 2);
  REQUIRE(slept.size() == 1);
  CHECK(slept[0] >= cfg.backoff_base_seconds);
  CHECK(slept[0] < cfg.backoff_base_seconds * 1.5 + 1e-12);
}

TEST_CASE("retry: delays grow and client errors are not retried") {
  ProviderConfig cfg;
  cfg.max_retries = 3;
  auto transport = std::make_shared<fixtures::ScriptedTransport>();
  for (int i = 0; i < 4; ++i) transport->queue(503);
  ProviderClient client(cfg, transport);
  client.set_sleeper([](double) {});
  CHECK_THROWS_AS(client.chat_complete("p"), TransportError);
  const auto delays = client.stats().backoff_delays;
  REQUIRE(delays.size() == 3);
  CHECK(delays[1] > delays[0]);
  CHECK(delays[2] > delays[1]);

  auto t2 = std::make_shared<fixtures::ScriptedTransport>();
  t2->queue(400);
  ProviderClient c2(cfg, t2);
  c2.set_sleeper([](double) {});
  try {
    c2.chat_complete("p");
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(e.status() == 400);
    CHECK(e.attempts() == 1);
  }
}

TEST_CASE("cache: round trip, key separation, no secrets on disk") {
  const auto dir = std::filesystem::temp_directory_path() / "evdetect_test_cache";
  std::filesystem::remove_all(dir);
  ResponseCache cache(dir);
  CHECK_FALSE(cache.get("/embeddings", "m", "x").has_value());
  cache.put("/embeddings", "m", "x", nlohmann::json::array({1.0, 2.0}));
  REQUIRE(cache.get("/embeddings", "m", "x").has_value());
  CHECK((*cache.get("/embeddings", "m", "x"))[1] == 2.0);
  CHECK_FALSE(cache.get("/embeddings", "m2", "x").has_value());
  CHECK(ResponseCache::key("/embeddings", "m", "x") != ResponseCache::key("/embeddings", "m", "y"));

  ::setenv("EVDETECT_TEST_KEY2", "sk-secret-456", 1);
  ProviderConfig cfg = live_config("EVDETECT_TEST_KEY2");
  cfg.cache_dir = dir;
  ProviderClient client(cfg, std::make_shared<fixtures::ScriptedTransport>());
  client.embed({"hello"});
  client.chat_complete("hi");
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::ifstream in(entry.path());
    const std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(body.find("sk-secret-456") == std::string::npos);
  }
  ::unsetenv("EVDETECT_TEST_KEY2");
}

TEST_CASE("concurrent callers share the client safely") {
  ProviderConfig cfg;
  cfg.max_in_flight = 2;
  cfg.mock_dim = 4;
  ProviderClient client(cfg);
  std::vector<std::thread> threads;
  std::vector<std::string> replies(8);
  for (int t = 0; t < 8; ++t)
    threads.emplace_back([&, t] { replies[static_cast<std::size_t>(t)] = client.chat_complete("p" + std::to_string(t)); });
  for (auto& th : threads) th.join();
  for (int t = 0; t < 8; ++t) CHECK(replies[static_cast<std::size_t>(t)] == mock_chat_reply("p" + std::to_string(t)));
  CHECK(client.stats().requests == 8);
}

TEST_CASE("config validation") {
  ProviderConfig cfg;
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
