#include "ambres/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "ambres/rng.hpp"
#include "httplib.h"
#include "json.hpp"

namespace ambres {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_scores(const std::vector<double>& scores, int32_t vocab_size) {
  if (static_cast<int32_t>(scores.size()) != vocab_size)
    throw BackendFailure("backend returned " + std::to_string(scores.size()) + " scores, expected " +
                         std::to_string(vocab_size));
  for (double s : scores)
    if (!std::isfinite(s)) throw BackendFailure("backend returned a non-finite score");
}

struct Candidate {
  int32_t token;
  int32_t successor;  // -1 for eos
  double score;
};

int32_t pick_greedy(const std::vector<Candidate>& cands) {
  size_t best = 0;
  for (size_t i = 1; i < cands.size(); ++i) {
    if (cands[i].score > cands[best].score ||
        (cands[i].score == cands[best].score && cands[i].token < cands[best].token))
      best = i;
  }
  return static_cast<int32_t>(best);
}

int32_t pick_sampled(const std::vector<Candidate>& cands, double temperature, std::mt19937_64& rng) {
  double max_score = kNegInf;
  for (const auto& c : cands) max_score = std::max(max_score, c.score);
  const double t = temperature > 0 ? temperature : 1e-6;
  std::vector<double> weights(cands.size());
  double total = 0;
  for (size_t i = 0; i < cands.size(); ++i) {
    weights[i] = std::exp((cands[i].score - max_score) / t);
    total += weights[i];
  }
  double u = (static_cast<double>(rng() >> 11) * 0x1.0p-53) * total;
  double acc = 0;
  for (size_t i = 0; i < cands.size(); ++i) {
    acc += weights[i];
    if (u < acc) return static_cast<int32_t>(i);
  }
  return static_cast<int32_t>(cands.size() - 1);
}

class MockBackend final : public TokenBackend {
 public:
  MockBackend(uint64_t seed, int32_t vocab_size) : seed_(seed), n_(vocab_size) {}

  std::vector<double> score(std::span<const int32_t> prefix, const PromptContext& ctx) override {
    uint64_t state = splitmix64(seed_ ^ fnv1a64(ctx.prompt_text));
    for (int32_t id : prefix) state = splitmix64(state ^ (static_cast<uint64_t>(id) + 0x9e3779b9ull));
    std::vector<double> scores(static_cast<size_t>(n_));
    for (int32_t i = 0; i < n_; ++i) {
      uint64_t h = splitmix64(state + static_cast<uint64_t>(i));
      scores[static_cast<size_t>(i)] = static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;  // [-1, 1)
    }
    return scores;
  }

 private:
  uint64_t seed_;
  int32_t n_;
};

class ScriptedBackend final : public TokenBackend {
 public:
  ScriptedBackend(std::vector<int32_t> script, int32_t vocab_size, int32_t eos_id)
      : script_(std::move(script)), n_(vocab_size), eos_id_(eos_id) {
    if (script_.empty()) throw Error("scripted backend requires a non-empty script");
  }

  std::vector<double> score(std::span<const int32_t> prefix, const PromptContext&) override {
    std::vector<double> scores(static_cast<size_t>(n_), 0.0);
    const size_t k = prefix.size();
    const int32_t favored = k < script_.size() ? script_[k] : eos_id_;
    if (favored >= 0 && favored < n_) scores[static_cast<size_t>(favored)] = 1.0;
    return scores;
  }

 private:
  std::vector<int32_t> script_;
  int32_t n_;
  int32_t eos_id_;
};

class HttpBackend final : public TokenBackend {
 public:
  HttpBackend(const std::string& endpoint, int32_t vocab_size, int timeout_ms)
      : n_(vocab_size), timeout_ms_(timeout_ms) {
    // split "scheme://host:port/base" into client target and base path
    auto scheme_end = endpoint.find("://");
    size_t path_start = endpoint.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start == std::string::npos) {
      host_ = endpoint;
    } else {
      host_ = endpoint.substr(0, path_start);
      base_path_ = endpoint.substr(path_start);
      while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
    }
  }

  std::vector<double> score(std::span<const int32_t> prefix, const PromptContext& ctx) override {
    nlohmann::json body;
    body["prompt"] = ctx.prompt_text;
    if (ctx.image) {
      body["image_b64"] = base64_encode(image_bytes(*ctx.image));
    } else {
      body["image_b64"] = nullptr;
    }
    body["prefix_ids"] = std::vector<int32_t>(prefix.begin(), prefix.end());
    const std::string payload = body.dump();

    httplib::Result res = post_once(payload);
    if (!res) res = post_once(payload);  // one retry on transport error
    if (!res) throw BackendFailure("score request failed twice: " + httplib::to_string(res.error()));
    if (res->status != 200)
      throw BackendFailure("score request returned status " + std::to_string(res->status));

    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolError(std::string("malformed score response: ") + e.what());
    }
    if (!reply.is_object() || !reply.contains("scores") || !reply["scores"].is_array())
      throw ProtocolError("score response missing \"scores\" array");
    const auto& arr = reply["scores"];
    if (static_cast<int32_t>(arr.size()) != n_)
      throw ProtocolError("score response has " + std::to_string(arr.size()) + " entries, expected " +
                          std::to_string(n_));
    std::vector<double> scores;
    scores.reserve(arr.size());
    for (const auto& v : arr) {
      if (!v.is_number()) throw ProtocolError("score entries must be numbers");
      double d = v.get<double>();
      if (!std::isfinite(d)) throw ProtocolError("score entries must be finite");
      scores.push_back(d);
    }
    return scores;
  }

 private:
  httplib::Result post_once(const std::string& payload) {
    httplib::Client client(host_);
    client.set_connection_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);
    client.set_read_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);
    return client.Post(base_path_ + "/score", payload, "application/json");
  }

  static std::vector<uint8_t> image_bytes(const ImageRef& image) {
    if (image.kind == ImageRef::Kind::Inline) return image.bytes;
    std::ifstream in(image.path, std::ios::binary);
    if (!in) throw BackendFailure("cannot read image file " + image.path);
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), {});
  }

  int32_t n_;
  int timeout_ms_;
  std::string host_;
  std::string base_path_;
};

}  // namespace

DecodeResult decode(const TokenIndex& index, const Vocabulary& vocab, TokenBackend& backend,
                    const DecodePolicy& policy, int max_tokens, const PromptContext& ctx) {
  if (max_tokens < 1) throw Error("max_tokens must be >= 1");
  if (ctx.prompt_text.empty()) throw Error("prompt_text must be non-empty");

  DecodeResult result;
  std::mt19937_64 sampler(policy.seed);
  int32_t state = index.start;

  for (int i = 0; i < max_tokens; ++i) {
    std::vector<double> scores;
    try {
      scores = backend.score(result.token_ids, ctx);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw BackendFailure(std::string("backend threw: ") + e.what());
    }
    check_scores(scores, vocab.size());

    AllowedSet allowed = allowed_tokens(index, state);
    if (allowed.entries.empty() && !allowed.eos)
      throw NoAllowedToken("state " + std::to_string(state) +
                           " permits neither tokens nor eos; DFA was not pruned");

    std::vector<Candidate> cands;
    cands.reserve(allowed.entries.size() + 1);
    for (const auto& e : allowed.entries)
      cands.push_back({e.token, e.successor, scores[static_cast<size_t>(e.token)]});
    if (allowed.eos) cands.push_back({vocab.eos_id, -1, scores[static_cast<size_t>(vocab.eos_id)]});

    int32_t pick = policy.kind == DecodePolicy::Kind::Greedy
                       ? pick_greedy(cands)
                       : pick_sampled(cands, policy.temperature, sampler);
    const Candidate& chosen = cands[static_cast<size_t>(pick)];
    ++result.steps;

    if (chosen.successor < 0) {
      result.terminated_by = TerminationReason::Eos;
      return result;
    }
    state = chosen.successor;
    result.token_ids.push_back(chosen.token);
    result.text += vocab.tokens[static_cast<size_t>(chosen.token)];
  }
  result.terminated_by = TerminationReason::MaxTokens;
  return result;
}

std::unique_ptr<TokenBackend> mock_backend(uint64_t seed, int32_t vocab_size) {
  return std::make_unique<MockBackend>(seed, vocab_size);
}

std::unique_ptr<TokenBackend> scripted_backend(std::vector<int32_t> script, int32_t vocab_size,
                                               int32_t eos_id) {
  return std::make_unique<ScriptedBackend>(std::move(script), vocab_size, eos_id);
}

std::unique_ptr<TokenBackend> http_backend(const std::string& endpoint, int32_t vocab_size,
                                           int timeout_ms) {
  return std::make_unique<HttpBackend>(endpoint, vocab_size, timeout_ms);
}

std::string base64_encode(std::span<const uint8_t> data) {
  static const char* alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  size_t i = 0;
  for (; i + 3 <= data.size(); i += 3) {
    uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    out.push_back(alphabet[(v >> 18) & 63]);
    out.push_back(alphabet[(v >> 12) & 63]);
    out.push_back(alphabet[(v >> 6) & 63]);
    out.push_back(alphabet[v & 63]);
  }
  if (i + 1 == data.size()) {
    uint32_t v = data[i] << 16;
    out.push_back(alphabet[(v >> 18) & 63]);
    out.push_back(alphabet[(v >> 12) & 63]);
    out += "==";
  } else if (i + 2 == data.size()) {
    uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
    out.push_back(alphabet[(v >> 18) & 63]);
    out.push_back(alphabet[(v >> 12) & 63]);
    out.push_back(alphabet[(v >> 6) & 63]);
    out += "=";
  }
  return out;
}

}  // namespace ambres
