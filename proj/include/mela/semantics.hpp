#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mela/eval.hpp"
#include "mela/model.hpp"
#include "mela/state.hpp"

namespace mela {

// Population effect of a transition: '.' for the initiator alone, or the
// initiator's and the influenced agent's modes for a paired influence.
struct LabelMode {
  Mode initiator = Mode::Keep;
  std::optional<Mode> influenced;
  bool operator==(const LabelMode&) const = default;
};

inline std::string to_string(LabelMode m) {
  if (!m.influenced) return print(m.initiator);
  if (m.initiator == Mode::Keep && *m.influenced == Mode::Keep) return ".";
  return std::string(print(m.initiator)) + "/" + print(*m.influenced);
}

enum class Influence { None, Target, Passive };

// (mode, influence, action, value, location). `value` is the per-individual
// rate (rate x probability for paired influences, times the destination
// probability for movements). `location` is absent only for environment
// firings that updated nobody.
struct TransitionLabel {
  LabelMode mode;
  Influence influence = Influence::None;
  TargetSet targets;
  std::string action;
  double value = 0.0;
  std::optional<Location> location;
  bool operator==(const TransitionLabel&) const = default;
};

struct AggregateTransition {
  TransitionLabel label;
  double rate = 0.0;  // aggregate CTMC rate, > 0
  Delta delta;        // nonempty
};

struct SemanticsOptions {
  // Let an influence action with no passive partner in its target set fire
  // on its own (the atomic influence axioms). Off by default: interactions
  // need a partner.
  bool unpaired_influence = false;
};

// Aggregate rate forms, shared with the fluid channels so both evaluate the
// same floating-point expression.
template <typename T>
T solo_rate(T n, T r, T pbar) {
  return n * r * pbar;
}
template <typename T>
T pair_rate(T n, T m, T r, T p, T pa, T pb) {
  return n * m * r * p * pa * pb;
}
template <typename T>
T env_rate(T ne, T m, T r, T p, T pb) {
  return ne * m * r * p * pb;
}

// Where a participant ends up: its continuation (with probability) or
// nothing for a destroying mode.
struct Outcome {
  std::optional<SpeciesKey> next;
  double probability = 1.0;
};

// Population change of one participant at `self` acting with `mode`.
inline void add_effect(Delta& d, const SpeciesKey& self, Mode mode, const std::optional<SpeciesKey>& next) {
  switch (mode) {
    case Mode::Keep:
      add_to(d, self, -1);
      add_to(d, *next, +1);
      break;
    case Mode::Create:
      add_to(d, *next, +1);
      break;
    case Mode::Destroy:
      add_to(d, self, -1);
      break;
  }
}

template <typename Counts>
std::vector<Outcome> outcomes(const Model& model, const FlatPrefix& fp, const Binding& b, Counts&& counts) {
  const Prefix& p = *fp.prefix;
  if (p.action.mode == Mode::Destroy) return {Outcome{}};
  const int next = model.agent_index(p.next.agent);
  std::vector<Outcome> out;
  for (const auto& [loc, prob] : eval_destination<double>(p.next.dest, model, b, counts))
    if (prob > 0.0) out.push_back(Outcome{SpeciesKey{next, loc}, prob});
  return out;
}

inline SystemState initial_state(const Model& model) {
  SystemState s;
  for (const auto& e : model.def().init) {
    if (const int a = model.agent_index(e.name); a >= 0) {
      s.add(SpeciesKey{a, *e.where}, e.multiplicity);
    } else {
      s.env[model.env_index(e.name)] += e.multiplicity;
    }
  }
  return s;
}

namespace detail {

template <typename Fn>
void for_each_partner(const SystemState& state, int agent, const TargetSet& targets, Fn&& fn) {
  if (targets.all) {
    for (auto it = state.counts.lower_bound(SpeciesKey{agent, Location{}});
         it != state.counts.end() && it->first.agent == agent; ++it)
      fn(it->first.loc, it->second);
  } else {
    for (const auto& l : targets.locs)
      if (const auto m = state.count(agent, l); m > 0) fn(l, m);
  }
}

[[noreturn]] inline void rethrow_with_context(const EvalError& e, const std::string& action, const Location* where) {
  std::string ctx = "action '" + action + "'";
  if (where) ctx += " at " + to_string(*where);
  throw EvalError(ctx + ": " + e.what());
}

}  // namespace detail

// All transitions of the aggregate CTMC enabled in `state`, in a
// deterministic order: agents by (agent, location), then prefixes in source
// order, then environment factors. Self-loops are not emitted.
inline std::vector<AggregateTransition> enabled_transitions(const Model& model, const SystemState& state,
                                                            const SemanticsOptions& options = {}) {
  std::vector<AggregateTransition> out;
  const Space& space = model.space();
  auto counts = state_counts(state);

  for (const auto& [key, n_int] : state.counts) {
    const double n = static_cast<double>(n_int);
    for (const auto& fp : model.prefixes(key.agent)) {
      const ActionSpec& a = fp.prefix->action;
      if (a.kind == ActionKind::Passive) continue;
      try {
        const Binding b{fp.vars, key.loc};
        const double r = eval_rate_checked<double>(a.value, model, b, counts);
        if (r == 0.0) continue;

        if (a.kind == ActionKind::NoInfluence) {
          for (const auto& o : outcomes(model, fp, b, counts)) {
            AggregateTransition t;
            add_effect(t.delta, key, a.mode, o.next);
            normalize(t.delta);
            if (t.delta.empty()) continue;
            t.rate = solo_rate(n, r, o.probability);
            t.label = TransitionLabel{LabelMode{a.mode, std::nullopt}, Influence::None, {}, a.name,
                                      r * o.probability, key.loc};
            out.push_back(std::move(t));
          }
          continue;
        }

        const TargetSet targets = eval_target_set(a.targets, b, space);
        const auto mine = outcomes(model, fp, b, counts);
        std::int64_t partners = 0;
        for (const auto& site : model.passive_sites(a.name)) {
          const ActionSpec& pa = site.site.prefix->action;
          detail::for_each_partner(state, site.agent, targets, [&](const Location& lq, std::int64_t m_int) {
            const std::int64_t m_eff = m_int - (site.agent == key.agent && lq == key.loc ? 1 : 0);
            if (m_eff <= 0) return;
            const Binding bq{site.site.vars, lq};
            const double p = eval_probability<double>(pa.value, model, bq, counts);
            if (p == 0.0) return;
            partners += m_eff;
            const SpeciesKey other{site.agent, lq};
            const auto theirs = outcomes(model, site.site, bq, counts);
            for (const auto& oa : mine)
              for (const auto& ob : theirs) {
                AggregateTransition t;
                add_effect(t.delta, key, a.mode, oa.next);
                add_effect(t.delta, other, pa.mode, ob.next);
                normalize(t.delta);
                if (t.delta.empty()) continue;
                t.rate = pair_rate(n, static_cast<double>(m_eff), r, p, oa.probability, ob.probability);
                t.label = TransitionLabel{LabelMode{a.mode, pa.mode}, Influence::Target, targets, a.name,
                                          r * p * oa.probability * ob.probability, lq};
                out.push_back(std::move(t));
              }
          });
        }
        if (options.unpaired_influence && partners == 0) {
          for (const auto& o : mine) {
            AggregateTransition t;
            add_effect(t.delta, key, a.mode, o.next);
            normalize(t.delta);
            if (t.delta.empty()) continue;
            t.rate = solo_rate(n, r, o.probability);
            t.label = TransitionLabel{LabelMode{a.mode, std::nullopt}, Influence::Target, targets, a.name,
                                      r * o.probability, key.loc};
            out.push_back(std::move(t));
          }
        }
      } catch (const EvalError& e) {
        detail::rethrow_with_context(e, a.name, &key.loc);
      }
    }
  }

  for (const auto& [e, ne_int] : state.env) {
    const EnvDef& env = model.env(e);
    try {
      const Binding none{};
      const double r = eval_rate_checked<double>(env.rate, model, none, counts);
      if (r == 0.0) continue;
      const TargetSet targets = eval_target_set(env.targets, none, space);
      for (const auto& site : model.passive_sites(env.action)) {
        const ActionSpec& pa = site.site.prefix->action;
        detail::for_each_partner(state, site.agent, targets, [&](const Location& lq, std::int64_t m) {
          const Binding bq{site.site.vars, lq};
          const double p = eval_probability<double>(pa.value, model, bq, counts);
          if (p == 0.0) return;
          const SpeciesKey other{site.agent, lq};
          for (const auto& ob : outcomes(model, site.site, bq, counts)) {
            AggregateTransition t;
            add_effect(t.delta, other, pa.mode, ob.next);
            normalize(t.delta);
            if (t.delta.empty()) continue;
            t.rate = env_rate(static_cast<double>(ne_int), static_cast<double>(m), r, p, ob.probability);
            t.label = TransitionLabel{LabelMode{Mode::Keep, pa.mode}, Influence::Target, targets, env.action,
                                      r * p * ob.probability, lq};
            out.push_back(std::move(t));
          }
        });
      }
    } catch (const EvalError& err) {
      detail::rethrow_with_context(err, env.action, nullptr);
    }
  }
  return out;
}

// Applies a transition's delta. Environment factors never change.
inline SystemState apply_transition(const SystemState& state, const AggregateTransition& t) {
  SystemState next = state;
  next.apply(t.delta);
  return next;
}

inline std::string format_delta(const Model& model, const Delta& d) {
  std::string out;
  for (const auto& [k, v] : d) {
    if (!out.empty()) out += ',';
    out += model.format(k) + ":" + (v > 0 ? "+" : "") + std::to_string(v);
  }
  return out;
}

// Enabled-transition table as TSV: action, mode, influence, location, rate, delta.
inline std::string transitions_tsv(const Model& model, const std::vector<AggregateTransition>& ts) {
  std::ostringstream os;
  os << "action\tmode\tinfluence\tlocation\trate\tdelta\n";
  for (const auto& t : ts) {
    os << t.label.action << '\t' << to_string(t.label.mode) << '\t'
       << (t.label.influence == Influence::None ? std::string("-") : to_string(t.label.targets)) << '\t'
       << (t.label.location ? to_string(*t.label.location) : std::string("-")) << '\t' << format_number(t.rate)
       << '\t' << format_delta(model, t.delta) << '\n';
  }
  return os.str();
}

}  // namespace mela
