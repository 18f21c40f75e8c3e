#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ambres/dfa.hpp"
#include "ambres/errors.hpp"

namespace ambres {

// Tokenizer vocabulary: dense ids, one designated end-of-sequence token
// whose string is empty; every other token string is non-empty.
struct Vocabulary {
  std::vector<std::string> tokens;
  int32_t eos_id = 0;

  static Vocabulary make(std::vector<std::string> tokens, int32_t eos_id);
  int32_t size() const { return static_cast<int32_t>(tokens.size()); }
};

// Per-state map of permitted vocabulary tokens and successor states,
// precomputed by walking every token from every live DFA state. Lookup
// at generation time is a direct index, independent of vocabulary size.
struct TokenIndex {
  struct Entry {
    int32_t token;
    int32_t successor;
  };
  int32_t start = 0;
  std::vector<std::vector<Entry>> state_entries;  // sorted by token id
  std::vector<bool> eos_permitted;                // = state is accepting

  int32_t state_count() const { return static_cast<int32_t>(state_entries.size()); }
  size_t entry_count() const;
};

struct AllowedSet {
  std::span<const TokenIndex::Entry> entries;
  bool eos = false;
};

TokenIndex build_token_index(const Dfa& dfa, const Vocabulary& vocab);

/// O(1): returns the precomputed per-state set; no walking at query time.
AllowedSet allowed_tokens(const TokenIndex& index, int32_t state);

/// Precomputed successor for an allowed (state, token) pair.
int32_t step(const TokenIndex& index, int32_t state, int32_t token);

/// Diagnostic dump, one line per state: `state <s>: <tok>-><s'> ...; eos=<bool>`
std::string dump_token_index(const TokenIndex& index);

}  // namespace ambres
