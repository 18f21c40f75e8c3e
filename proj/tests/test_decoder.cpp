#include "ambres/decoder.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "ambres/dfa.hpp"
#include "ambres/pipeline.hpp"
#include "ambres/rng.hpp"
#include "ambres/schema.hpp"
#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "support/json_oracle.hpp"

using namespace ambres;

namespace {

const PromptContext kCtx{"decode test prompt", std::nullopt, {}};

struct FavorToken final : TokenBackend {
  int32_t favored;
  int32_t n;
  FavorToken(int32_t favored, int32_t n) : favored(favored), n(n) {}
  std::vector<double> score(std::span<const int32_t>, const PromptContext&) override {
    std::vector<double> s(static_cast<size_t>(n), 0.0);
    s[static_cast<size_t>(favored)] = 10.0;
    return s;
  }
};

}  // namespace

TEST_CASE("masking forces a legal output even when the backend wants an illegal token") {
  const SchemaRuntime& rt = default_schema_runtime();
  const CompiledSchema& boolean = rt.compiled_for(SchemaNode::boolean_node());
  const int32_t x_id = static_cast<int32_t>('x') - 0x20;
  FavorToken backend(x_id, rt.vocab().size());
  DecodeResult r = decode(boolean.index, rt.vocab(), backend, DecodePolicy::greedy(), 32, kCtx);
  CHECK(r.terminated_by == TerminationReason::Eos);
  CHECK((r.text == "true" || r.text == "false"));
}

TEST_CASE("adversarial mock backends always produce schema instances") {
  const SchemaRuntime& rt = default_schema_runtime();
  BuiltinSchemas schemas = builtin_schemas();
  for (uint64_t seed = 0; seed < 100; ++seed) {
    auto backend = mock_backend(seed, rt.vocab().size());
    DecodeResult r =
        decode(rt.grounding().index, rt.vocab(), *backend, DecodePolicy::greedy(), 4096, kCtx);
    REQUIRE(r.terminated_by == TerminationReason::Eos);
    CAPTURE(r.text);
    REQUIRE(test_oracle::valid_instance(schemas.grounding, r.text));
  }
}

TEST_CASE("scripted backend drives the exact token sequence when legal") {
  const SchemaRuntime& rt = default_schema_runtime();
  const std::string target = "[\"blue cup\"]";
  auto backend = scripted_backend(rt.tokenize_chars(target), rt.vocab().size(), rt.vocab().eos_id);
  DecodeResult r = decode(rt.grounding().index, rt.vocab(), *backend, DecodePolicy::greedy(),
                          kDefaultMaxTokens, kCtx);
  CHECK(r.text == target);
  CHECK(r.terminated_by == TerminationReason::Eos);
  CHECK(r.steps == static_cast<int>(target.size()) + 1);  // + eos
}

TEST_CASE("scripted backend with an illegal step still yields schema-valid text") {
  const SchemaRuntime& rt = default_schema_runtime();
  // script starts a string then demands a raw '"' terminator twice in a row,
  // which is illegal mid-escape; decode must substitute a legal token
  std::vector<int32_t> script = rt.tokenize_chars("[\"a");
  script.push_back(static_cast<int32_t>('\\') - 0x20);
  script.push_back(static_cast<int32_t>('x') - 0x20);  // '\x' is not a supported escape
  auto backend = scripted_backend(script, rt.vocab().size(), rt.vocab().eos_id);
  DecodeResult r = decode(rt.grounding().index, rt.vocab(), *backend, DecodePolicy::greedy(),
                          kDefaultMaxTokens, kCtx);
  CHECK(r.terminated_by == TerminationReason::Eos);
  CHECK(test_oracle::valid_instance(builtin_schemas().grounding, r.text));
}

TEST_CASE("script exhaustion in a non-accepting state falls back to the lowest legal id") {
  const SchemaRuntime& rt = default_schema_runtime();
  // exhaust the script right after '[' + '"' -- not accepting, eos masked
  auto backend = scripted_backend(rt.tokenize_chars("[\""), rt.vocab().size(), rt.vocab().eos_id);
  DecodeResult r = decode(rt.grounding().index, rt.vocab(), *backend, DecodePolicy::greedy(),
                          kDefaultMaxTokens, kCtx);
  CHECK(r.terminated_by == TerminationReason::Eos);
  CHECK(test_oracle::valid_instance(builtin_schemas().grounding, r.text));
  // after the scripted prefix, ties resolve to the lowest legal token id:
  // ' ' (id 0) inside string content
  CHECK(r.text.substr(0, 3) == "[\" ");
}

TEST_CASE("mock backend determinism and spread") {
  const int32_t n = 64;
  auto backend = mock_backend(42, n);
  std::vector<int32_t> prefix = {1, 2, 3};
  auto s1 = backend->score(prefix, kCtx);
  auto s2 = backend->score(prefix, kCtx);
  CHECK(s1 == s2);
  CHECK(s1.size() == static_cast<size_t>(n));
  for (double v : s1) CHECK(std::isfinite(v));

  // different prefixes and different seeds disagree somewhere
  auto s3 = backend->score(std::vector<int32_t>{1, 2}, kCtx);
  CHECK(s1 != s3);
  int differing_pairs = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    auto a = mock_backend(seed, n)->score(prefix, kCtx);
    auto b = mock_backend(seed + 1000, n)->score(prefix, kCtx);
    if (a != b) ++differing_pairs;
  }
  CHECK(differing_pairs == 100);
}

TEST_CASE("greedy decoding is deterministic; sampling is deterministic per seed") {
  const SchemaRuntime& rt = default_schema_runtime();
  auto backend = mock_backend(5, rt.vocab().size());
  DecodeResult g1 = decode(rt.grounding().index, rt.vocab(), *backend, DecodePolicy::greedy(),
                           4096, kCtx);
  DecodeResult g2 = decode(rt.grounding().index, rt.vocab(), *backend, DecodePolicy::greedy(),
                           4096, kCtx);
  CHECK(g1.text == g2.text);
  CHECK(g1.token_ids == g2.token_ids);

  DecodeResult t1 = decode(rt.grounding().index, rt.vocab(), *backend,
                           DecodePolicy::sampled(0.8, 99), 4096, kCtx);
  DecodeResult t2 = decode(rt.grounding().index, rt.vocab(), *backend,
                           DecodePolicy::sampled(0.8, 99), 4096, kCtx);
  CHECK(t1.text == t2.text);
  CHECK(test_oracle::valid_instance(builtin_schemas().grounding, t1.text));
}

TEST_CASE("masking is non-invasive when the backend argmax is always legal") {
  const SchemaRuntime& rt = default_schema_runtime();
  const std::string target = "{\"ambiguity\": true, \"explanation\": \"x\", \"clarifying_question\": \"\"}";
  auto backend = scripted_backend(rt.tokenize_chars(target), rt.vocab().size(), rt.vocab().eos_id);

  // unconstrained greedy replay of the same backend
  std::string unconstrained;
  std::vector<int32_t> prefix;
  for (size_t k = 0; k < target.size() + 1; ++k) {
    auto scores = backend->score(prefix, kCtx);
    size_t best = 0;
    for (size_t i = 1; i < scores.size(); ++i)
      if (scores[i] > scores[best]) best = i;
    if (static_cast<int32_t>(best) == rt.vocab().eos_id) break;
    prefix.push_back(static_cast<int32_t>(best));
    unconstrained += rt.vocab().tokens[best];
  }

  DecodeResult constrained = decode(rt.ambiguity().index, rt.vocab(), *backend,
                                    DecodePolicy::greedy(), kDefaultMaxTokens, kCtx);
  CHECK(constrained.text == unconstrained);
  CHECK(constrained.text == target);
}

TEST_CASE("decode flags truncation instead of accepting a prefix") {
  const SchemaRuntime& rt = default_schema_runtime();
  auto backend = mock_backend(5, rt.vocab().size());
  DecodeResult r = decode(rt.grounding().index, rt.vocab(), *backend, DecodePolicy::greedy(), 2, kCtx);
  CHECK(r.terminated_by == TerminationReason::MaxTokens);
  CHECK_FALSE(test_oracle::valid_instance(builtin_schemas().grounding, r.text));
}

TEST_CASE("decode validates the backend contract") {
  const SchemaRuntime& rt = default_schema_runtime();

  struct ShortBackend final : TokenBackend {
    std::vector<double> score(std::span<const int32_t>, const PromptContext&) override {
      return {1.0, 2.0};
    }
  } short_backend;
  CHECK_THROWS_AS(decode(rt.grounding().index, rt.vocab(), short_backend, DecodePolicy::greedy(),
                         16, kCtx),
                  BackendFailure);

  struct NanBackend final : TokenBackend {
    int32_t n;
    explicit NanBackend(int32_t n) : n(n) {}
    std::vector<double> score(std::span<const int32_t>, const PromptContext&) override {
      std::vector<double> s(static_cast<size_t>(n), 0.0);
      s[3] = std::nan("");
      return s;
    }
  } nan_backend(rt.vocab().size());
  CHECK_THROWS_AS(decode(rt.grounding().index, rt.vocab(), nan_backend, DecodePolicy::greedy(),
                         16, kCtx),
                  BackendFailure);

  auto ok = mock_backend(0, rt.vocab().size());
  CHECK_THROWS_AS(decode(rt.grounding().index, rt.vocab(), *ok, DecodePolicy::greedy(), 0, kCtx),
                  Error);
  PromptContext empty_prompt{"", std::nullopt, {}};
  CHECK_THROWS_AS(
      decode(rt.grounding().index, rt.vocab(), *ok, DecodePolicy::greedy(), 16, empty_prompt),
      Error);
}

TEST_CASE("unpruned automata with stuck states are reported, not looped") {
  // manual DFA: start --a--> sink, sink has no outgoing edges and does not accept
  Dfa dfa;
  dfa.transitions.resize(2);
  dfa.transitions[0]['a'] = 1;
  dfa.accepting = {false, false};
  Vocabulary vocab = Vocabulary::make({"a", ""}, 1);
  TokenIndex index = build_token_index(dfa, vocab);
  FavorToken backend(0, 2);
  CHECK_THROWS_AS(decode(index, vocab, backend, DecodePolicy::greedy(), 8, kCtx), NoAllowedToken);
}

// ---- remote backend wire protocol ----------------------------------------

namespace {

struct ScoreServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> requests{0};
  nlohmann::json last_request;
  std::mutex mutex;

  explicit ScoreServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server.Post("/score", [this, handler](const httplib::Request& req, httplib::Response& res) {
      {
        std::lock_guard<std::mutex> lock(mutex);
        ++requests;
        try {
          last_request = nlohmann::json::parse(req.body);
        } catch (...) {
        }
      }
      handler(req, res);
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~ScoreServer() {
    server.stop();
    thread.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port); }
};

}  // namespace

TEST_CASE("http backend round-trips well-formed score responses") {
  const int32_t n = 7;
  ScoreServer server([n](const httplib::Request&, httplib::Response& res) {
    std::vector<double> scores(n);
    for (int32_t i = 0; i < n; ++i) scores[static_cast<size_t>(i)] = 0.25 * i;
    res.set_content(nlohmann::json{{"scores", scores}}.dump(), "application/json");
  });

  auto backend = http_backend(server.endpoint(), n, 2000);
  PromptContext ctx{"remote scoring", ImageRef::inline_bytes({1, 2, 3}), {}};
  std::vector<int32_t> prefix = {4, 5};
  auto scores = backend->score(prefix, ctx);
  REQUIRE(scores.size() == static_cast<size_t>(n));
  for (int32_t i = 0; i < n; ++i) CHECK(scores[static_cast<size_t>(i)] == doctest::Approx(0.25 * i));

  // request body carries the documented fields
  std::lock_guard<std::mutex> lock(server.mutex);
  CHECK(server.last_request.at("prompt") == "remote scoring");
  CHECK(server.last_request.at("prefix_ids") == std::vector<int32_t>{4, 5});
  CHECK(server.last_request.at("image_b64") == base64_encode(std::vector<uint8_t>{1, 2, 3}));
}

TEST_CASE("http backend rejects responses with the wrong score count") {
  ScoreServer server([](const httplib::Request&, httplib::Response& res) {
    res.set_content(nlohmann::json{{"scores", {1.0, 2.0, 3.0}}}.dump(), "application/json");
  });
  auto backend = http_backend(server.endpoint(), 4, 2000);
  CHECK_THROWS_AS(backend->score({}, kCtx), ProtocolError);
}

TEST_CASE("http backend maps malformed bodies and bad statuses to the right errors") {
  ScoreServer bad_json([](const httplib::Request&, httplib::Response& res) {
    res.set_content("not json", "application/json");
  });
  auto b1 = http_backend(bad_json.endpoint(), 4, 2000);
  CHECK_THROWS_AS(b1->score({}, kCtx), ProtocolError);

  ScoreServer server_error([](const httplib::Request&, httplib::Response& res) {
    res.status = 500;
    res.set_content("{}", "application/json");
  });
  auto b2 = http_backend(server_error.endpoint(), 4, 2000);
  CHECK_THROWS_AS(b2->score({}, kCtx), BackendFailure);
}

TEST_CASE("http backend fails after the single retry when nothing listens") {
  auto backend = http_backend("http://127.0.0.1:1", 4, 200);
  CHECK_THROWS_AS(backend->score({}, kCtx), BackendFailure);
}

TEST_CASE("http backend retries once on a transport error") {
  // first response is aborted mid-body, second is served
  std::atomic<int> calls{0};
  ScoreServer server([&calls](const httplib::Request&, httplib::Response& res) {
    if (calls.fetch_add(1) == 0) {
      res.set_content_provider(
          64, "application/json",
          [](size_t, size_t, httplib::DataSink&) { return false; });  // abort the connection
      return;
    }
    res.set_content(nlohmann::json{{"scores", {0.0, 1.0, 2.0, 3.0}}}.dump(), "application/json");
  });
  auto backend = http_backend(server.endpoint(), 4, 2000);
  auto scores = backend->score({}, kCtx);
  CHECK(scores[3] == doctest::Approx(3.0));
  CHECK(calls.load() == 2);
}

TEST_CASE("greedy decode through the wire protocol") {
  const SchemaRuntime& rt = default_schema_runtime();
  const int32_t n = rt.vocab().size();
  const std::string target = "true";
  ScoreServer server([&, n](const httplib::Request& req, httplib::Response& res) {
    auto body = nlohmann::json::parse(req.body);
    const size_t k = body.at("prefix_ids").size();
    std::vector<double> scores(static_cast<size_t>(n), 0.0);
    if (k < target.size())
      scores[static_cast<size_t>(target[k] - 0x20)] = 5.0;
    else
      scores[static_cast<size_t>(rt.vocab().eos_id)] = 5.0;
    res.set_content(nlohmann::json{{"scores", scores}}.dump(), "application/json");
  });
  auto backend = http_backend(server.endpoint(), n, 2000);
  const CompiledSchema& boolean = rt.compiled_for(SchemaNode::boolean_node());
  DecodeResult r = decode(boolean.index, rt.vocab(), *backend, DecodePolicy::greedy(), 16, kCtx);
  CHECK(r.text == "true");
  CHECK(r.terminated_by == TerminationReason::Eos);
}
