#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mela/model.hpp"
#include "mela/printer.hpp"
#include "mela/semantics.hpp"

namespace mela {

enum class CapPolicy { Truncate, Error };

inline std::string to_string(CapPolicy p) { return p == CapPolicy::Truncate ? "truncate" : "error"; }

struct EnumerationOptions {
  std::map<SpeciesKey, std::int64_t> caps;
  std::optional<std::int64_t> default_cap;  // for series without an explicit cap
  std::size_t max_states = 100000;
  CapPolicy policy = CapPolicy::Truncate;
  SemanticsOptions semantics;
};

struct CtmcEntry {
  std::size_t from = 0;
  std::size_t to = 0;
  double rate = 0.0;
  std::string action;
  bool operator==(const CtmcEntry&) const = default;
};

struct CtmcExplicit {
  std::vector<std::string> series;  // column names of the state vectors
  std::vector<std::string> envs;    // "Name=count"
  std::vector<SystemState> states;  // BFS discovery order
  std::vector<CtmcEntry> entries;   // off-diagonal, one per (from, to, action)
  std::vector<TransitionLabel> labels;  // representative label per entry; not exported
  std::size_t truncated = 0;

  // Labels are not part of the exchange format and are ignored.
  bool operator==(const CtmcExplicit& o) const {
    return series == o.series && envs == o.envs && states == o.states && entries == o.entries &&
           truncated == o.truncated;
  }

  // Generator row sums with the diagonal set to minus the exit rate.
  std::vector<double> row_sums() const {
    std::vector<double> exit(states.size(), 0.0), sum(states.size(), 0.0);
    for (const auto& e : entries) exit[e.from] += e.rate;
    for (std::size_t i = 0; i < states.size(); ++i) sum[i] = -exit[i];
    for (const auto& e : entries) sum[e.from] += e.rate;
    return sum;
  }
};

class StateSpaceLimitExceeded : public std::runtime_error {
 public:
  StateSpaceLimitExceeded(std::size_t limit, std::size_t explored, std::size_t truncated)
      : std::runtime_error("state space exceeds " + std::to_string(limit) + " states"),
        limit(limit), explored(explored), truncated(truncated) {}
  std::size_t limit, explored, truncated;
};

class CapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline CtmcExplicit enumerate_state_space(const Model& model, const EnumerationOptions& opt = {}) {
  CtmcExplicit out;
  for (std::size_t i = 0; i < model.series_count(); ++i) out.series.push_back(model.series_name(i));
  auto within_caps = [&](const SystemState& s) -> const SpeciesKey* {
    for (const auto& [k, n] : s.counts) {
      auto it = opt.caps.find(k);
      const auto cap = it != opt.caps.end() ? std::optional(it->second) : opt.default_cap;
      if (cap && n > *cap) return &k;
    }
    return nullptr;
  };

  std::map<SystemState, std::size_t> seen;
  const SystemState init = initial_state(model);
  for (const auto& [e, n] : init.env) out.envs.push_back(model.env(e).name + "=" + std::to_string(n));
  if (within_caps(init)) throw CapExceeded("initial state exceeds the caps");
  seen.emplace(init, 0);
  out.states.push_back(init);

  for (std::size_t i = 0; i < out.states.size(); ++i) {
    const SystemState from = out.states[i];
    std::map<std::pair<std::size_t, std::string>, std::size_t> merged;
    for (const auto& t : enabled_transitions(model, from, opt.semantics)) {
      SystemState to = apply_transition(from, t);
      if (const SpeciesKey* k = within_caps(to)) {
        if (opt.policy == CapPolicy::Error) throw CapExceeded("transition '" + t.label.action + "' exceeds cap of " + model.format(*k));
        ++out.truncated;
        continue;
      }
      auto [it, fresh] = seen.emplace(to, out.states.size());
      if (fresh) {
        if (out.states.size() >= opt.max_states)
          throw StateSpaceLimitExceeded(opt.max_states, out.states.size(), out.truncated);
        out.states.push_back(std::move(to));
      }
      const auto key = std::make_pair(it->second, t.label.action);
      if (auto m = merged.find(key); m != merged.end()) {
        out.entries[m->second].rate += t.rate;
      } else {
        merged.emplace(key, out.entries.size());
        out.entries.push_back(CtmcEntry{i, it->second, t.rate, t.label.action});
        out.labels.push_back(t.label);
      }
    }
  }
  return out;
}

namespace detail {

inline std::string state_line(const Model& model, std::size_t index, const SystemState& s) {
  std::vector<std::int64_t> v(model.series_count(), 0);
  for (const auto& [k, n] : s.counts) v[model.series_index(k)] = n;
  std::string line = std::to_string(index);
  for (auto n : v) line += " " + std::to_string(n);
  return line;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p);
  if (!f) throw std::ios_base::failure("cannot write " + p.string());
  return f;
}

inline std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream f(p);
  if (!f) throw std::ios_base::failure("cannot read " + p.string());
  return f;
}

}  // namespace detail

// Writes states.txt, transitions.txt and meta.json into `dir`.
inline void export_ctmc(const Model& model, const CtmcExplicit& c, const std::filesystem::path& dir,
                        const EnumerationOptions& opt = {}) {
  std::filesystem::create_directories(dir);
  {
    auto f = detail::open_out(dir / "states.txt");
    f << "states " << c.states.size() << " series " << c.series.size() << '\n';
    f << "series";
    for (const auto& s : c.series) f << ' ' << s;
    f << "\nenv";
    for (const auto& e : c.envs) f << ' ' << e;
    f << '\n';
    for (std::size_t i = 0; i < c.states.size(); ++i) f << detail::state_line(model, i, c.states[i]) << '\n';
  }
  {
    auto f = detail::open_out(dir / "transitions.txt");
    f << "transitions " << c.entries.size() << '\n';
    for (const auto& e : c.entries) f << e.from << ' ' << e.to << ' ' << format_number(e.rate) << ' ' << e.action << '\n';
  }
  nlohmann::json meta;
  meta["states"] = c.states.size();
  meta["transitions"] = c.entries.size();
  meta["truncated_transitions"] = c.truncated;
  meta["policy"] = to_string(opt.policy);
  meta["max_states"] = opt.max_states;
  meta["series"] = c.series;
  nlohmann::json caps = nlohmann::json::object();
  for (const auto& [k, n] : opt.caps) caps[model.format(k)] = n;
  meta["caps"] = caps;
  meta["default_cap"] = opt.default_cap ? nlohmann::json(*opt.default_cap) : nlohmann::json(nullptr);
  detail::open_out(dir / "meta.json") << meta.dump(2) << '\n';
}

inline CtmcExplicit import_ctmc(const Model& model, const std::filesystem::path& dir) {
  auto bad = [&](const std::string& what) { return std::runtime_error("malformed CTMC export: " + what); };
  CtmcExplicit c;
  {
    auto f = detail::open_in(dir / "states.txt");
    std::string word, line;
    std::size_t n = 0, k = 0;
    if (!(f >> word >> n) || word != "states" || !(f >> word >> k) || word != "series") throw bad("states header");
    std::getline(f, line);
    std::getline(f, line);
    std::istringstream series(line);
    series >> word;
    for (std::string s; series >> s;) {
      const auto key = model.parse_key(s);
      if (!key) throw bad("unknown series " + s);
      c.series.push_back(s);
    }
    if (c.series.size() != k) throw bad("series count");
    std::getline(f, line);
    std::istringstream envs(line);
    envs >> word;
    SystemState env_part;
    for (std::string e; envs >> e;) {
      c.envs.push_back(e);
      const auto eq = e.find('=');
      const int idx = model.env_index(e.substr(0, eq));
      if (eq == std::string::npos || idx < 0) throw bad("env entry " + e);
      env_part.env[idx] = std::stoll(e.substr(eq + 1));
    }
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t index = 0;
      if (!(f >> index) || index != i) throw bad("state index");
      SystemState s = env_part;
      for (std::size_t j = 0; j < k; ++j) {
        std::int64_t v = 0;
        if (!(f >> v)) throw bad("state counts");
        s.add(*model.parse_key(c.series[j]), v);
      }
      c.states.push_back(std::move(s));
    }
  }
  {
    auto f = detail::open_in(dir / "transitions.txt");
    std::string word;
    std::size_t m = 0;
    if (!(f >> word >> m) || word != "transitions") throw bad("transitions header");
    for (std::size_t i = 0; i < m; ++i) {
      CtmcEntry e;
      std::string rate;
      if (!(f >> e.from >> e.to >> rate >> e.action)) throw bad("transition line");
      e.rate = std::stod(rate);
      c.entries.push_back(std::move(e));
    }
  }
  auto meta = nlohmann::json::parse(detail::open_in(dir / "meta.json"));
  c.truncated = meta.at("truncated_transitions").get<std::size_t>();
  return c;
}

}  // namespace mela
