#include "ambres/token_index.hpp"

#include <algorithm>

namespace ambres {

Vocabulary Vocabulary::make(std::vector<std::string> tokens, int32_t eos_id) {
  if (tokens.empty()) throw Error("vocabulary must not be empty");
  if (eos_id < 0 || eos_id >= static_cast<int32_t>(tokens.size()))
    throw Error("eos_id out of range");
  for (int32_t i = 0; i < static_cast<int32_t>(tokens.size()); ++i) {
    if (i == eos_id) {
      if (!tokens[static_cast<size_t>(i)].empty())
        throw Error("eos token string must be empty");
    } else if (tokens[static_cast<size_t>(i)].empty()) {
      throw Error("non-eos token strings must be non-empty");
    }
  }
  return Vocabulary{std::move(tokens), eos_id};
}

size_t TokenIndex::entry_count() const {
  size_t n = 0;
  for (const auto& v : state_entries) n += v.size();
  return n;
}

TokenIndex build_token_index(const Dfa& dfa, const Vocabulary& vocab) {
  TokenIndex index;
  index.start = dfa.start;
  index.state_entries.resize(static_cast<size_t>(dfa.state_count()));
  index.eos_permitted.assign(dfa.accepting.begin(), dfa.accepting.end());

  for (int32_t s = 0; s < dfa.state_count(); ++s) {
    auto& entries = index.state_entries[static_cast<size_t>(s)];
    for (int32_t t = 0; t < vocab.size(); ++t) {
      if (t == vocab.eos_id) continue;
      int32_t cur = s;
      bool alive = true;
      for (char c : vocab.tokens[static_cast<size_t>(t)]) {
        auto n = dfa.next(cur, c);
        if (!n) {
          alive = false;
          break;
        }
        cur = *n;
      }
      if (alive) entries.push_back({t, cur});
    }
    entries.shrink_to_fit();
  }
  return index;
}

AllowedSet allowed_tokens(const TokenIndex& index, int32_t state) {
  if (state < 0 || state >= index.state_count())
    throw UnknownState("state " + std::to_string(state) + " is not in the token index");
  return AllowedSet{index.state_entries[static_cast<size_t>(state)],
                    index.eos_permitted[static_cast<size_t>(state)]};
}

int32_t step(const TokenIndex& index, int32_t state, int32_t token) {
  AllowedSet allowed = allowed_tokens(index, state);
  auto it = std::lower_bound(allowed.entries.begin(), allowed.entries.end(), token,
                             [](const TokenIndex::Entry& e, int32_t t) { return e.token < t; });
  if (it == allowed.entries.end() || it->token != token)
    throw DisallowedToken("token " + std::to_string(token) + " not permitted in state " +
                          std::to_string(state));
  return it->successor;
}

std::string dump_token_index(const TokenIndex& index) {
  std::string out;
  for (int32_t s = 0; s < index.state_count(); ++s) {
    out += "state " + std::to_string(s) + ":";
    for (const auto& e : index.state_entries[static_cast<size_t>(s)])
      out += " " + std::to_string(e.token) + "->" + std::to_string(e.successor);
    out += "; eos=";
    out += index.eos_permitted[static_cast<size_t>(s)] ? "true" : "false";
    out += "\n";
  }
  return out;
}

}  // namespace ambres
