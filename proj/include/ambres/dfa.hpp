#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "ambres/regex.hpp"

namespace ambres {

// Deterministic automaton over characters. States carry dense ids; after
// pruning every state is reachable from the start and can reach an
// accepting state.
struct Dfa {
  int32_t start = 0;
  std::vector<std::map<unsigned char, int32_t>> transitions;
  std::vector<bool> accepting;

  int32_t state_count() const { return static_cast<int32_t>(transitions.size()); }

  std::optional<int32_t> next(int32_t state, char c) const {
    const auto& row = transitions[static_cast<size_t>(state)];
    auto it = row.find(static_cast<unsigned char>(c));
    if (it == row.end()) return std::nullopt;
    return it->second;
  }

  /// Anchored acceptance: walks the full text from the start state.
  bool accepts(std::string_view text) const {
    int32_t s = start;
    for (char c : text) {
      auto n = next(s, c);
      if (!n) return false;
      s = *n;
    }
    return accepting[static_cast<size_t>(s)];
  }
};

inline constexpr int32_t kDfaStateBudget = 100000;

// Compiles a pattern to a pruned DFA: syntax tree -> position NFA ->
// subset construction -> dead/unreachable-state pruning. Throws
// RegexParseError, StateBudgetExceeded, or EmptyLanguage (when no string
// is accepted at all).
Dfa compile_regex(const std::string& pattern, const RegexOptions& options = {});

// Removes unreachable and dead states; language unchanged. Throws
// EmptyLanguage if the start state itself is dead.
Dfa prune_dead_states(const Dfa& dfa);

}  // namespace ambres
