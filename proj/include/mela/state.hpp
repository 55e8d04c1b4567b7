#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "mela/diagnostics.hpp"
#include "mela/location.hpp"

namespace mela {

// (agent state, location): one population series. `agent` indexes the
// model's agent definitions.
struct SpeciesKey {
  int agent = 0;
  Location loc;
  auto operator<=>(const SpeciesKey&) const = default;
};

// Signed population change, sorted by key, with no zero entries.
using Delta = std::vector<std::pair<SpeciesKey, std::int64_t>>;

inline void add_to(Delta& d, const SpeciesKey& k, std::int64_t v) {
  for (auto& [key, amount] : d)
    if (key == k) {
      amount += v;
      return;
    }
  d.emplace_back(k, v);
}

// Sort and drop zero entries.
inline void normalize(Delta& d) {
  std::sort(d.begin(), d.end());
  std::erase_if(d, [](const auto& e) { return e.second == 0; });
}

// Population state in congruence-normal form: P(l)[x] | P(l)[y] is stored
// as a single entry x+y and zero entries are never kept. Environment
// factors are a multiset indexed by env definition.
struct SystemState {
  std::map<SpeciesKey, std::int64_t> counts;
  std::map<int, std::int64_t> env;

  std::int64_t count(const SpeciesKey& k) const {
    auto it = counts.find(k);
    return it == counts.end() ? 0 : it->second;
  }
  std::int64_t count(int agent, const Location& l) const { return count(SpeciesKey{agent, l}); }

  std::int64_t total(int agent) const {
    std::int64_t n = 0;
    for (auto it = counts.lower_bound(SpeciesKey{agent, Location{}}); it != counts.end() && it->first.agent == agent;
         ++it)
      n += it->second;
    return n;
  }

  std::int64_t population() const {
    std::int64_t n = 0;
    for (const auto& [k, v] : counts) n += v;
    return n;
  }

  // Adds `v` copies of k (negative removes). Throws if the count would go
  // negative.
  void add(const SpeciesKey& k, std::int64_t v) {
    if (v == 0) return;
    auto it = counts.find(k);
    const std::int64_t now = (it == counts.end() ? 0 : it->second) + v;
    if (now < 0) throw InvariantViolation("population count would become negative");
    if (now == 0) {
      counts.erase(it);
    } else if (it == counts.end()) {
      counts.emplace(k, now);
    } else {
      it->second = now;
    }
  }

  void apply(const Delta& d) {
    for (const auto& [k, v] : d)
      if (v < 0 && count(k) + v < 0) throw InvariantViolation("population count would become negative");
    for (const auto& [k, v] : d) add(k, v);
  }

  bool operator==(const SystemState&) const = default;
  auto operator<=>(const SystemState&) const = default;
};

inline std::ostream& operator<<(std::ostream& os, const SystemState& s) {
  os << "{";
  const char* sep = "";
  for (const auto& [k, n] : s.counts) {
    os << sep << k.agent << "@" << to_string(k.loc) << ":" << n;
    sep = ", ";
  }
  for (const auto& [e, n] : s.env) {
    os << sep << "env" << e << ":" << n;
    sep = ", ";
  }
  return os << "}";
}

}  // namespace mela
