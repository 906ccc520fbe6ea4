#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "kbound/errors.hpp"
#include "kbound/gateway/caching_client.hpp"
#include "kbound/gateway/mock_model.hpp"
#include "kbound/gateway/remote_client.hpp"
#include "kbound/gateway/response_cache.hpp"
#include "kbound/gateway/scripted_judge.hpp"
#include "kbound/util/jsonl.hpp"
#include "kbound/util/rng.hpp"
#include "test_support.hpp"

namespace kbound::gateway {
namespace {

using nlohmann::json;
using kbound::testing::TempDir;

MockKnowledgeMap oslo_map() {
  MockKnowledgeMap m;
  m.add("s2", MockEntry{"Oslo", 0.7, {{"Bergen", 1.0}}});
  m.add("sure", MockEntry{"Paris", 1.0, {}});
  return m;
}

// Independent categorical sampler: inverse-CDF over p^(1/T) in list order,
// fed by the same portable stream the gateway documents.
std::string oracle_draw(const std::vector<std::pair<std::string, double>>& dist, double temperature,
                        std::uint64_t seed, const std::string& id, int index) {
  std::vector<double> w;
  double total = 0.0;
  for (const auto& [_, p] : dist) {
    w.push_back(p > 0.0 ? std::pow(p, 1.0 / temperature) : 0.0);
    total += w.back();
  }
  std::mt19937_64 engine(util::derive_seed(seed, id, static_cast<std::uint64_t>(index)));
  double u = util::canonical(engine) * total;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] > 0.0 && u < w[i]) return dist[i].first;
    u -= w[i];
  }
  for (std::size_t i = w.size(); i-- > 0;) {
    if (w[i] > 0.0) return dist[i].first;
  }
  return {};
}

TEST(MockModel, DistributionNormalizesWrongMass) {
  const auto d = MockKnowledgeMap::distribution(MockEntry{"A", 0.4, {{"B", 1.0}, {"C", 3.0}}});
  ASSERT_EQ(d.size(), 3u);
  EXPECT_DOUBLE_EQ(d[0].second, 0.4);
  EXPECT_DOUBLE_EQ(d[1].second, 0.15);
  EXPECT_DOUBLE_EQ(d[2].second, 0.45);
}

TEST(MockModel, RejectsInvalidEntries) {
  MockKnowledgeMap m;
  EXPECT_THROW(m.add("x", MockEntry{"A", 1.5, {}}), InvalidArgument);
  EXPECT_THROW(m.add("x", MockEntry{"A", 0.5, {}}), InvalidArgument);
  m.add("x", MockEntry{"A", 1.0, {}});
  EXPECT_THROW(m.add("x", MockEntry{"A", 1.0, {}}), InvalidArgument);
}

TEST(MockModel, DrawsMatchIndependentSampler) {
  auto model = testing::mock_model(oslo_map());
  const auto dist = MockKnowledgeMap::distribution(*model->knowledge().find("s2"));
  for (double t : {0.5, 1.0, 2.0}) {
    for (std::uint64_t seed : {0, 1, 42}) {
      const auto draws = sample_responses(*model, {"s2", "q", "img"}, 10, t, seed);
      for (int i = 0; i < 10; ++i) {
        EXPECT_EQ(draws[i].text, oracle_draw(dist, t, seed, "s2", i)) << "T=" << t << " seed=" << seed;
      }
    }
  }
}

TEST(MockModel, GoldenSeedZeroSequence) {
  auto model = testing::mock_model(oslo_map());
  const auto draws = sample_responses(*model, {"s2", "Which city is this?", "img"}, 10, 1.0, 0);
  std::vector<std::string> texts;
  for (const auto& d : draws) texts.push_back(d.text);
  // Frozen from the independent sampler above.
  const std::vector<std::string> golden = {"Oslo", "Oslo", "Bergen", "Oslo", "Oslo",
                                           "Oslo", "Oslo", "Oslo", "Bergen", "Oslo"};
  EXPECT_EQ(texts, golden);
}

TEST(MockModel, EmpiricalFrequencyTracksCorrectProb) {
  auto model = testing::mock_model(oslo_map());
  const auto draws = sample_responses(*model, {"s2", "q", "img"}, 20000, 1.0, 9);
  int correct = 0;
  for (const auto& d : draws) correct += d.text == "Oslo";
  // 0.7 with sd sqrt(0.21/20000) = 0.0032; allow 4 sd.
  EXPECT_NEAR(correct / 20000.0, 0.7, 0.013);
}

TEST(MockModel, TemperatureSharpens) {
  auto model = testing::mock_model(oslo_map());
  const auto draws = sample_responses(*model, {"s2", "q", "img"}, 20000, 0.5, 3);
  int correct = 0;
  for (const auto& d : draws) correct += d.text == "Oslo";
  EXPECT_NEAR(correct / 20000.0, 0.49 / (0.49 + 0.09), 0.012);
}

TEST(MockModel, GreedyAndZeroTemperaturePickMode) {
  auto model = testing::mock_model(oslo_map());
  EXPECT_EQ(greedy_answer(*model, {"s2", "q", "img"}).text, "Oslo");
  EXPECT_EQ(sample_responses(*model, {"s2", "q", "img"}, 3, 0.0, 5)[2].text, "Oslo");
}

TEST(MockModel, LogprobsAreUntemperedAndSpread) {
  auto model = testing::mock_model(oslo_map());
  const auto r = greedy_answer(*model, {"s2", "q", "img"});
  ASSERT_TRUE(r.total_logprob);
  EXPECT_NEAR(*r.total_logprob, std::log(0.7), 1e-12);
  ASSERT_TRUE(r.token_logprobs);
  EXPECT_EQ(r.token_logprobs->size(), 1u);
  const auto sure = greedy_answer(*model, {"sure", "q", "img"});
  EXPECT_EQ(*sure.total_logprob, 0.0);
}

TEST(MockModel, ScoringListedAndUnlisted) {
  auto model = testing::mock_model(oslo_map());
  const auto listed = score_sequence(*model, {"s2", "q", "img"}, "Bergen");
  EXPECT_NEAR(listed.total_logprob, std::log(0.3), 1e-12);
  const auto unlisted = score_sequence(*model, {"s2", "q", "img"}, "I don't know.");
  EXPECT_EQ(unlisted.token_logprobs.size(), 3u);
  EXPECT_DOUBLE_EQ(unlisted.total_logprob, 3 * kUnlistedTokenLogprob);
  EXPECT_THROW(score_sequence(*model, {"s2", "q", "img"}, ""), InvalidArgument);
}

TEST(MockModel, UnknownSampleThrows) {
  auto model = testing::mock_model(oslo_map());
  EXPECT_THROW(greedy_answer(*model, {"nope", "q", "img"}), UnknownMockSample);
}

TEST(Gateway, SampleResponsesValidatesArguments) {
  auto model = testing::mock_model(oslo_map());
  EXPECT_THROW(sample_responses(*model, {"s2", "q", "img"}, 0, 1.0, 0), InvalidArgument);
  EXPECT_THROW(sample_responses(*model, {"s2", "q", "img"}, 2, -1.0, 0), InvalidArgument);
  EXPECT_THROW(sample_responses(*model, {"s2", "q", "img"}, 2, NAN, 0), InvalidArgument);
}

TEST(Gateway, ConcurrencyDoesNotChangeDraws) {
  auto serial = testing::mock_model(oslo_map(), "m", 1);
  auto wide = testing::mock_model(oslo_map(), "m", 8);
  const auto a = sample_responses(*serial, {"s2", "q", "img"}, 64, 1.0, 17);
  const auto b = sample_responses(*wide, {"s2", "q", "img"}, 64, 1.0, 17);
  EXPECT_EQ(a, b);
  for (int i = 0; i < 64; ++i) EXPECT_EQ(b[i].sample_index, i);
}

TEST(Endpoint, Validation) {
  ModelEndpoint e = testing::mock_endpoint();
  e.max_parallel = 0;
  EXPECT_THROW(e.validate(), ConfigurationError);
  ModelEndpoint r;
  r.name = "r";
  r.kind = EndpointKind::kRemote;
  EXPECT_THROW(r.validate(), ConfigurationError);
}

TEST(Endpoint, JsonRoundTrip) {
  const auto j = json::parse(R"({"name":"m","kind":"remote","base_url":"http://x/v1","max_parallel":4,
                                 "request_timeout":12,"supports_scoring":true})");
  const auto e = endpoint_from_json(j);
  EXPECT_EQ(e.kind, EndpointKind::kRemote);
  EXPECT_EQ(e.max_parallel, 4);
  EXPECT_DOUBLE_EQ(e.request_timeout_s, 12.0);
  EXPECT_TRUE(e.supports_scoring);
  const auto back = endpoint_from_json(to_json(e));
  EXPECT_EQ(back.base_url, "http://x/v1");
}

TEST(ScriptedJudge, RulesAndDefault) {
  TempDir dir;
  util::write_json(dir / "judge.json", json::parse(R"({"rules":[{"contains":["Paris","Reference"],"reply":"YES"},
                                                               {"contains":"blurry","reply":"NO"}],
                                                      "default":"MAYBE"})"));
  auto judge = ScriptedJudge::load(testing::mock_endpoint("j"), dir / "judge.json");
  EXPECT_EQ(judge->greedy({"", "Reference answer: Paris", ""}).text, "YES");
  EXPECT_EQ(judge->greedy({"", "Paris alone", ""}).text, "MAYBE");
  EXPECT_EQ(judge->greedy({"", "a blurry photo", ""}).text, "NO");
  EXPECT_THROW(judge->score({"", "x", ""}, "y"), ScoringUnsupported);
}

TEST(ResponseCache, HitsSkipTheBackendAndPersist) {
  TempDir dir;
  auto inner = testing::mock_model(oslo_map());
  {
    auto cache = std::make_shared<ResponseCache>(dir.path());
    CachingClient client(inner, cache);
    const auto first = sample_responses(client, {"s2", "q", "img"}, 5, 1.0, 0);
    EXPECT_EQ(inner->backend_calls(), 5u);
    const auto again = sample_responses(client, {"s2", "q", "img"}, 5, 1.0, 0);
    EXPECT_EQ(inner->backend_calls(), 5u);
    EXPECT_EQ(first, again);
    score_sequence(client, {"s2", "q", "img"}, "Oslo");
    score_sequence(client, {"s2", "q", "img"}, "Bergen");
    EXPECT_EQ(inner->backend_calls(), 7u);
  }
  auto fresh_inner = testing::mock_model(oslo_map());
  auto cache = std::make_shared<ResponseCache>(dir.path());
  EXPECT_EQ(cache->size(), 7u);
  CachingClient client(fresh_inner, cache);
  sample_responses(client, {"s2", "q", "img"}, 5, 1.0, 0);
  EXPECT_EQ(fresh_inner->backend_calls(), 0u);
  sample_responses(client, {"s2", "q", "img"}, 5, 1.0, 1);
  EXPECT_EQ(fresh_inner->backend_calls(), 5u);
}

TEST(ResponseCache, TornTrailingLineIsIgnored) {
  TempDir dir;
  {
    ResponseCache cache(dir.path());
    cache.put("k1", json{{"text", "a"}});
  }
  std::ofstream(dir / "responses.jsonl", std::ios::app) << "{\"key\":\"k2\",\"val";
  ResponseCache cache(dir.path());
  EXPECT_EQ(cache.size(), 1u);
  ASSERT_TRUE(cache.get("k1"));
  EXPECT_FALSE(cache.get("k2"));
}

TEST(ResponseCache, FirstWriteWins) {
  TempDir dir;
  ResponseCache cache(dir.path());
  cache.put("k", json{{"v", 1}});
  cache.put("k", json{{"v", 2}});
  EXPECT_EQ((*cache.get("k"))["v"], 1);
}

TEST(CacheKey, DistinguishesEveryField) {
  const auto e = testing::mock_endpoint("m");
  const Query q{"s", "p", "i"};
  const auto base = CacheKey::make(e, q, DecodeMode::kSample, 1.0, 0, 0).digest();
  EXPECT_NE(base, CacheKey::make(e, q, DecodeMode::kSample, 0.9, 0, 0).digest());
  EXPECT_NE(base, CacheKey::make(e, q, DecodeMode::kSample, 1.0, 1, 0).digest());
  EXPECT_NE(base, CacheKey::make(e, q, DecodeMode::kSample, 1.0, 0, 1).digest());
  EXPECT_NE(base, CacheKey::make(e, {"s", "p2", "i"}, DecodeMode::kSample, 1.0, 0, 0).digest());
  EXPECT_NE(base, CacheKey::make(e, {"s", "p", "i2"}, DecodeMode::kSample, 1.0, 0, 0).digest());
  EXPECT_NE(base, CacheKey::make(e, q, DecodeMode::kGreedy, 1.0, 0, 0).digest());
  EXPECT_NE(CacheKey::make(e, q, DecodeMode::kScore, 0, 0, 0, "a").digest(),
            CacheKey::make(e, q, DecodeMode::kScore, 0, 0, 0, "b").digest());
}

// Local chat-completions stub. `handler` decides each reply.
class StubServer {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  explicit StubServer(Handler handler) : handler_(std::move(handler)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      {
        std::lock_guard lock(mutex_);
        bodies_.push_back(json::parse(req.body));
        auth_.push_back(req.get_header_value("Authorization"));
      }
      handler_(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }

  ModelEndpoint endpoint(bool scoring = false) const {
    ModelEndpoint e;
    e.name = "stub";
    e.kind = EndpointKind::kRemote;
    e.base_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1";
    e.model = "vlm-stub";
    e.request_timeout_s = 5;
    e.supports_scoring = scoring;
    return e;
  }
  std::vector<json> bodies() {
    std::lock_guard lock(mutex_);
    return bodies_;
  }
  std::vector<std::string> auth() {
    std::lock_guard lock(mutex_);
    return auth_;
  }

 private:
  httplib::Server server_;
  Handler handler_;
  int port_ = 0;
  std::thread thread_;
  std::mutex mutex_;
  std::vector<json> bodies_;
  std::vector<std::string> auth_;
};

json completion(const std::string& text, std::vector<double> lps) {
  json content = json::array();
  for (double v : lps) content.push_back({{"token", "t"}, {"logprob", v}});
  return {{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", text}}},
                                    {"logprobs", {{"content", content}}}}})}};
}

const RetryPolicy kFastRetry{3, std::chrono::milliseconds(1)};

TEST(RemoteClient, GenerationWireFormat) {
  StubServer server([](const httplib::Request&, httplib::Response& res) {
    res.set_content(completion("Oslo", {-0.1, -0.2}).dump(), "application/json");
  });
  ::setenv("KBOUND_TEST_TOKEN", "sekrit", 1);
  auto ep = server.endpoint();
  ep.auth_token_env = "KBOUND_TEST_TOKEN";
  RemoteClient client(ep, kFastRetry);
  const auto r = client.draw({"s1", "Which city?", "https://img.example/a.jpg"}, 1.0, 10, 3);
  EXPECT_EQ(r.text, "Oslo");
  ASSERT_TRUE(r.total_logprob);
  EXPECT_NEAR(*r.total_logprob, -0.3, 1e-12);
  EXPECT_EQ(r.sample_index, 3);

  const auto body = server.bodies().at(0);
  EXPECT_EQ(body["model"], "vlm-stub");
  EXPECT_EQ(body["temperature"], 1.0);
  EXPECT_EQ(body["seed"], 13);
  EXPECT_EQ(body["logprobs"], true);
  const auto& content = body["messages"][0]["content"];
  EXPECT_EQ(content[0]["type"], "image_url");
  EXPECT_EQ(content[0]["image_url"]["url"], "https://img.example/a.jpg");
  EXPECT_EQ(content[1]["text"], "Which city?");
  EXPECT_EQ(body.dump().find("s1"), std::string::npos) << "sample id must not be sent";
  EXPECT_EQ(server.auth().at(0), "Bearer sekrit");
}

TEST(RemoteClient, LocalImagesAreInlined) {
  TempDir dir;
  util::write_text(dir / "pic.png", "abc");
  EXPECT_EQ(image_data_url((dir / "pic.png").string()), "data:image/png;base64,YWJj");
  EXPECT_THROW(image_data_url((dir / "none.png").string()), InvalidRequest);
}

TEST(RemoteClient, RetriesTransientFailures) {
  std::atomic<int> calls{0};
  StubServer server([&](const httplib::Request&, httplib::Response& res) {
    if (calls++ < 2) {
      res.status = 503;
      return;
    }
    res.set_content(completion("ok", {}).dump(), "application/json");
  });
  RemoteClient client(server.endpoint(), kFastRetry);
  const auto r = client.greedy({"s", "q", "http://i"});
  EXPECT_EQ(r.text, "ok");
  EXPECT_FALSE(r.total_logprob);
  EXPECT_EQ(client.backend_calls(), 3u);
}

TEST(RemoteClient, GivesUpAfterRetryBudget) {
  StubServer server([](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  RemoteClient client(server.endpoint(), kFastRetry);
  EXPECT_THROW(client.greedy({"s", "q", "http://i"}), RemoteUnavailable);
  EXPECT_EQ(server.bodies().size(), 3u);
}

TEST(RemoteClient, ClientErrorsAreNotRetried) {
  StubServer server([](const httplib::Request&, httplib::Response& res) {
    res.status = 400;
    res.set_content("bad", "text/plain");
  });
  RemoteClient client(server.endpoint(), kFastRetry);
  EXPECT_THROW(client.greedy({"s", "q", "http://i"}), InvalidRequest);
  EXPECT_EQ(server.bodies().size(), 1u);
}

TEST(RemoteClient, MissingImageIsInvalidRequest) {
  StubServer server([](const httplib::Request&, httplib::Response& res) {
    res.set_content(completion("x", {}).dump(), "application/json");
  });
  RemoteClient client(server.endpoint(), kFastRetry);
  EXPECT_THROW(client.greedy({"s", "q", ""}), InvalidRequest);
  EXPECT_TRUE(server.bodies().empty());
}

TEST(RemoteClient, UnreachableHostIsRemoteUnavailable) {
  ModelEndpoint e;
  e.name = "dead";
  e.kind = EndpointKind::kRemote;
  e.base_url = "http://127.0.0.1:1/v1";
  e.request_timeout_s = 1;
  RemoteClient client(e, kFastRetry);
  EXPECT_THROW(client.greedy({"s", "q", "http://i"}), RemoteUnavailable);
}

TEST(RemoteClient, ScoringNeedsOptIn) {
  StubServer server([](const httplib::Request&, httplib::Response& res) {
    res.set_content(completion("I don't know.", {-0.5, -0.25, -0.25}).dump(), "application/json");
  });
  RemoteClient plain(server.endpoint(false), kFastRetry);
  EXPECT_THROW(plain.score({"s", "q", "http://i"}, "I don't know."), ScoringUnsupported);

  RemoteClient scoring(server.endpoint(true), kFastRetry);
  const auto s = scoring.score({"s", "q", "http://i"}, "I don't know.");
  EXPECT_EQ(s.token_logprobs.size(), 3u);
  EXPECT_NEAR(s.total_logprob, -1.0, 1e-12);
  const auto body = server.bodies().back();
  EXPECT_EQ(body["echo"], true);
  EXPECT_EQ(body["max_tokens"], 0);
  EXPECT_EQ(body["messages"][1]["role"], "assistant");
  EXPECT_EQ(body["messages"][1]["content"], "I don't know.");
}

TEST(MakeClient, PicksImplementationFromSource) {
  TempDir dir;
  util::write_json(dir / "map.json", oslo_map().to_json());
  util::write_json(dir / "judge.json", json{{"default", "YES"}});
  auto model_ep = testing::mock_endpoint("m");
  model_ep.mock_source = (dir / "map.json").string();
  auto judge_ep = testing::mock_endpoint("j");
  judge_ep.mock_source = (dir / "judge.json").string();
  EXPECT_EQ(make_client(model_ep)->greedy({"s2", "q", "i"}).text, "Oslo");
  EXPECT_EQ(make_client(judge_ep)->greedy({"s2", "q", "i"}).text, "YES");
  auto cached = make_client(model_ep, std::make_shared<ResponseCache>(dir / "cache"));
  EXPECT_NE(dynamic_cast<CachingClient*>(cached.get()), nullptr);
}

}  // namespace
}  // namespace kbound::gateway
