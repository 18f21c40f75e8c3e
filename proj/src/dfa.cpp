#include "ambres/dfa.hpp"

#include <algorithm>
#include <deque>
#include <queue>

namespace ambres {

namespace {

// firstpos/lastpos/followpos over linearized leaf positions, with an
// endmarker position appended so acceptance is "endmarker reachable".
struct PositionAutomaton {
  std::vector<CharSet> leaf_chars;            // per position
  std::vector<std::vector<int32_t>> follow;   // per position, sorted unique
  std::vector<int32_t> first;                 // firstpos of the augmented root
  int32_t end_pos = 0;                        // endmarker position id
};

struct NodeFacts {
  bool nullable = false;
  std::vector<int32_t> first, last;
};

std::vector<int32_t> merge_sorted(const std::vector<int32_t>& a, const std::vector<int32_t>& b) {
  std::vector<int32_t> out;
  out.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void add_follow(PositionAutomaton& pa, const std::vector<int32_t>& from, const std::vector<int32_t>& to) {
  for (int32_t p : from) {
    auto& f = pa.follow[static_cast<size_t>(p)];
    f = merge_sorted(f, to);
  }
}

NodeFacts analyze(const RegexAst& node, PositionAutomaton& pa) {
  NodeFacts facts;
  switch (node.kind) {
    case RegexAst::Kind::Empty:
      facts.nullable = true;
      return facts;
    case RegexAst::Kind::Chars: {
      int32_t p = static_cast<int32_t>(pa.leaf_chars.size());
      pa.leaf_chars.push_back(node.chars);
      pa.follow.emplace_back();
      facts.nullable = false;
      facts.first = {p};
      facts.last = {p};
      return facts;
    }
    case RegexAst::Kind::Concat: {
      facts.nullable = true;
      for (const RegexAst& child : node.children) {
        NodeFacts c = analyze(child, pa);
        add_follow(pa, facts.last, c.first);
        if (facts.nullable) facts.first = merge_sorted(facts.first, c.first);
        if (c.nullable) facts.last = merge_sorted(facts.last, c.last);
        else facts.last = c.last;
        facts.nullable = facts.nullable && c.nullable;
      }
      return facts;
    }
    case RegexAst::Kind::Alternate: {
      facts.nullable = false;
      for (const RegexAst& child : node.children) {
        NodeFacts c = analyze(child, pa);
        facts.nullable = facts.nullable || c.nullable;
        facts.first = merge_sorted(facts.first, c.first);
        facts.last = merge_sorted(facts.last, c.last);
      }
      return facts;
    }
    case RegexAst::Kind::Star: {
      NodeFacts c = analyze(node.children[0], pa);
      add_follow(pa, c.last, c.first);
      facts.nullable = true;
      facts.first = c.first;
      facts.last = c.last;
      return facts;
    }
  }
  throw Error("unreachable regex node kind");
}

PositionAutomaton build_positions(const RegexAst& root) {
  PositionAutomaton pa;
  NodeFacts r = analyze(root, pa);
  // endmarker
  pa.end_pos = static_cast<int32_t>(pa.leaf_chars.size());
  pa.leaf_chars.emplace_back();
  pa.follow.emplace_back();
  add_follow(pa, r.last, {pa.end_pos});
  pa.first = r.nullable ? merge_sorted(r.first, {pa.end_pos}) : r.first;
  return pa;
}

}  // namespace

Dfa compile_regex(const std::string& pattern, const RegexOptions& options) {
  RegexAst ast = parse_regex(pattern, options);
  PositionAutomaton pa = build_positions(ast);

  Dfa dfa;
  std::map<std::vector<int32_t>, int32_t> ids;
  std::deque<std::vector<int32_t>> pending;

  auto intern = [&](std::vector<int32_t> set) -> int32_t {
    auto it = ids.find(set);
    if (it != ids.end()) return it->second;
    int32_t id = static_cast<int32_t>(ids.size());
    if (id >= kDfaStateBudget)
      throw StateBudgetExceeded("subset construction exceeded " + std::to_string(kDfaStateBudget) + " states");
    ids.emplace(set, id);
    dfa.transitions.emplace_back();
    dfa.accepting.push_back(std::binary_search(set.begin(), set.end(), pa.end_pos));
    pending.push_back(std::move(set));
    return id;
  };

  dfa.start = intern(pa.first);
  while (!pending.empty()) {
    std::vector<int32_t> set = std::move(pending.front());
    pending.pop_front();
    int32_t id = ids.at(set);

    // chars actually usable from this subset
    CharSet usable;
    for (int32_t p : set) usable |= pa.leaf_chars[static_cast<size_t>(p)];

    for (unsigned char c : options.alphabet) {
      if (!usable.test(c)) continue;
      std::vector<int32_t> target;
      for (int32_t p : set) {
        if (pa.leaf_chars[static_cast<size_t>(p)].test(c))
          target = merge_sorted(target, pa.follow[static_cast<size_t>(p)]);
      }
      if (target.empty()) continue;
      int32_t tid = intern(std::move(target));
      dfa.transitions[static_cast<size_t>(id)][c] = tid;
    }
  }
  return prune_dead_states(dfa);
}

Dfa prune_dead_states(const Dfa& dfa) {
  const size_t n = dfa.transitions.size();

  std::vector<bool> reachable(n, false);
  std::queue<int32_t> bfs;
  bfs.push(dfa.start);
  reachable[static_cast<size_t>(dfa.start)] = true;
  while (!bfs.empty()) {
    int32_t s = bfs.front();
    bfs.pop();
    for (const auto& [c, t] : dfa.transitions[static_cast<size_t>(s)]) {
      if (!reachable[static_cast<size_t>(t)]) {
        reachable[static_cast<size_t>(t)] = true;
        bfs.push(t);
      }
    }
  }

  // live = accepting reachable via reversed edges
  std::vector<std::vector<int32_t>> rev(n);
  for (size_t s = 0; s < n; ++s)
    for (const auto& [c, t] : dfa.transitions[s]) rev[static_cast<size_t>(t)].push_back(static_cast<int32_t>(s));
  std::vector<bool> live(n, false);
  for (size_t s = 0; s < n; ++s) {
    if (dfa.accepting[s] && !live[s]) {
      live[s] = true;
      bfs.push(static_cast<int32_t>(s));
    }
  }
  while (!bfs.empty()) {
    int32_t s = bfs.front();
    bfs.pop();
    for (int32_t p : rev[static_cast<size_t>(s)]) {
      if (!live[static_cast<size_t>(p)]) {
        live[static_cast<size_t>(p)] = true;
        bfs.push(p);
      }
    }
  }

  if (!live[static_cast<size_t>(dfa.start)])
    throw EmptyLanguage("automaton accepts no string");

  std::vector<int32_t> remap(n, -1);
  Dfa out;
  for (size_t s = 0; s < n; ++s) {
    if (reachable[s] && live[s]) {
      remap[s] = out.state_count();
      out.transitions.emplace_back();
      out.accepting.push_back(dfa.accepting[s]);
    }
  }
  out.start = remap[static_cast<size_t>(dfa.start)];
  for (size_t s = 0; s < n; ++s) {
    if (remap[s] < 0) continue;
    for (const auto& [c, t] : dfa.transitions[s]) {
      if (remap[static_cast<size_t>(t)] >= 0)
        out.transitions[static_cast<size_t>(remap[s])][c] = remap[static_cast<size_t>(t)];
    }
  }
  return out;
}

}  // namespace ambres
