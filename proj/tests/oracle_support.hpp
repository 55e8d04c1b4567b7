#pragma once

#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <tuple>

#include "mela/mela.hpp"

namespace mela::test {

using OracleKey = std::tuple<std::string, std::string, SystemState>;

inline std::string loc_text(const std::optional<Location>& l) { return l ? to_string(*l) : "-"; }

inline std::map<OracleKey, double> aggregate_view(const Model& m, const SystemState& s,
                                                  const SemanticsOptions& o = {}) {
  std::map<OracleKey, double> out;
  for (const auto& t : enabled_transitions(m, s, o))
    out[{t.label.action, loc_text(t.label.location), apply_transition(s, t)}] += t.rate;
  return out;
}

// Self-loops leave the chain unchanged, so they are left out.
inline std::map<OracleKey, double> individual_view(const Model& m, const SystemState& s,
                                                   const SemanticsOptions& o = {}) {
  std::map<OracleKey, double> out;
  for (const auto& t : individual_transitions(m, s, {o.unpaired_influence, 64}))
    if (t.kind != IndividualKind::NoUpdate && t.target != s)
      out[{t.label.action, loc_text(t.label.location), t.target}] += t.value;
  return out;
}

// Empty when both views agree within 1e-12 relative; otherwise a description.
inline std::optional<std::string> oracle_mismatch(const Model& m, const SystemState& s,
                                                  const SemanticsOptions& o = {}) {
  const auto a = aggregate_view(m, s, o);
  const auto b = individual_view(m, s, o);
  if (a.size() != b.size())
    return "channel count " + std::to_string(a.size()) + " vs oracle " + std::to_string(b.size());
  for (const auto& [k, v] : a) {
    auto it = b.find(k);
    if (it == b.end()) return "oracle lacks " + std::get<0>(k) + "@" + std::get<1>(k);
    if (std::abs(v - it->second) > 1e-12 * std::max(std::abs(v), std::abs(it->second)))
      return std::get<0>(k) + " rate " + format_number(v) + " vs oracle " + format_number(it->second);
  }
  return std::nullopt;
}

// States with at most `limit` agents: BFS from the initial state when it is
// small enough, topped up with random count vectors over the model's series.
inline std::vector<SystemState> small_states(const Model& m, std::int64_t limit, std::size_t want,
                                             std::uint64_t seed) {
  std::set<SystemState> seen;
  std::vector<SystemState> out;
  const SystemState init = initial_state(m);
  if (init.population() <= limit) {
    std::deque<SystemState> queue{init};
    seen.insert(init);
    while (!queue.empty()) {
      const auto s = queue.front();
      queue.pop_front();
      out.push_back(s);
      for (const auto& t : enabled_transitions(m, s)) {
        auto n = apply_transition(s, t);
        if (n.population() <= limit && seen.insert(n).second) queue.push_back(std::move(n));
      }
    }
  }
  std::mt19937_64 gen(seed);
  for (int attempt = 0; out.size() < want && attempt < 100000; ++attempt) {
    SystemState s;
    s.env = init.env;
    const auto total = static_cast<std::int64_t>(gen() % static_cast<std::uint64_t>(limit + 1));
    for (std::int64_t i = 0; i < total; ++i) s.add(m.series_key(gen() % m.series_count()), 1);
    if (seen.insert(s).second) out.push_back(std::move(s));
  }
  return out;
}

// Reachable states by depth-first search over the individual-level
// transition system, keeping only states within the cap.
inline void reach(const Model& m, const SystemState& s, std::int64_t cap, std::set<SystemState>& seen) {
  if (!seen.insert(s).second) return;
  for (const auto& t : individual_transitions(m, s, {false, 1 << 20})) {
    if (t.kind == IndividualKind::NoUpdate) continue;
    bool within = true;
    for (const auto& [k, n] : t.target.counts) within = within && n <= cap;
    if (within) reach(m, t.target, cap, seen);
  }
}

}  // namespace mela::test
