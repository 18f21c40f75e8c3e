#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ambres/errors.hpp"
#include "ambres/token_index.hpp"

namespace ambres {

struct ImageRef {
  enum class Kind { Path, Inline };
  Kind kind = Kind::Path;
  std::string path;            // Kind::Path
  std::vector<uint8_t> bytes;  // Kind::Inline

  static ImageRef from_path(std::string p) { return {Kind::Path, std::move(p), {}}; }
  static ImageRef inline_bytes(std::vector<uint8_t> b) { return {Kind::Inline, {}, std::move(b)}; }
};

struct PromptContext {
  std::string prompt_text;  // must be non-empty
  std::optional<ImageRef> image;
  std::map<std::string, std::string> metadata;
};

// Stand-in for the model's next-token scorer. Implementations must be
// deterministic given (prefix, context, backend seed) and must return
// exactly one finite score per vocabulary entry.
class TokenBackend {
 public:
  virtual ~TokenBackend() = default;
  virtual std::vector<double> score(std::span<const int32_t> prefix, const PromptContext& ctx) = 0;
};

struct DecodePolicy {
  enum class Kind { Greedy, Temperature };
  Kind kind = Kind::Greedy;
  double temperature = 1.0;
  uint64_t seed = 0;

  static DecodePolicy greedy() { return {}; }
  static DecodePolicy sampled(double temperature, uint64_t seed) {
    return {Kind::Temperature, temperature, seed};
  }
};

enum class TerminationReason { Eos, MaxTokens };

struct DecodeResult {
  std::string text;                // concatenation of emitted token strings
  std::vector<int32_t> token_ids;  // emitted tokens, excluding eos
  int steps = 0;                   // selections made, including the final eos
  TerminationReason terminated_by = TerminationReason::Eos;
};

inline constexpr int kDefaultMaxTokens = 512;

// Drives the backend through the token index: scores of tokens outside
// the current state's allowed set are masked to -inf before selection,
// eos likewise unless the state is accepting. Every eos-terminated
// result is therefore accepted by the schema DFA.
DecodeResult decode(const TokenIndex& index, const Vocabulary& vocab, TokenBackend& backend,
                    const DecodePolicy& policy, int max_tokens, const PromptContext& ctx);

/// Seeded pseudo-random finite scores; deterministic per (seed, prefix, prompt).
std::unique_ptr<TokenBackend> mock_backend(uint64_t seed, int32_t vocab_size);

// At step k the intended token script[k] gets the maximal score and all
// others strictly lower; past the end of the script, eos is favored.
// Ties among non-favored tokens resolve to the lowest legal id.
std::unique_ptr<TokenBackend> scripted_backend(std::vector<int32_t> script, int32_t vocab_size,
                                               int32_t eos_id);

// Remote scorer speaking the wire protocol: POST <endpoint>/score with
// {"prompt","image_b64","prefix_ids"}, response {"scores":[...]} of
// exactly vocab_size finite numbers. Retries once on transport error.
std::unique_ptr<TokenBackend> http_backend(const std::string& endpoint, int32_t vocab_size,
                                           int timeout_ms = 30000);

std::string base64_encode(std::span<const uint8_t> data);

}  // namespace ambres
