#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mela/eval.hpp"
#include "mela/model.hpp"
#include "mela/semantics.hpp"
#include "mela/state.hpp"

// Individual-level transition system: every agent is a separate process
// term and interactions are enumerated over ordered pairs of distinct
// individuals. Quadratic in the population and only meant as a reference
// for small states.

namespace mela {

enum class IndividualKind { Effective, NoUpdate, Unpaired };

struct IndividualTransition {
  TransitionLabel label;
  double value = 0.0;  // rate contributed by this individual (pair) alone
  SystemState target;
  IndividualKind kind = IndividualKind::Effective;
};

struct IndividualOptions {
  bool unpaired_influence = false;
  std::size_t max_agents = 64;
};

namespace detail {

struct Individual {
  int agent = 0;
  Location loc;
};

struct BoundPrefix {
  const Prefix* prefix = nullptr;
  Binding binding;
};

// Summands offered by the term `t` evaluated under `b`, unfolding constants
// by evaluating their location argument.
inline void offered(const Model& model, const ProcessTerm& t, const Binding& b, int depth,
                    std::vector<BoundPrefix>& out) {
  if (depth > 64) throw EvalError("unguarded recursion too deep");
  if (const auto* p = std::get_if<Prefix>(&t.node)) {
    out.push_back(BoundPrefix{p, b});
  } else if (const auto* c = std::get_if<Choice>(&t.node)) {
    offered(model, *c->left, b, depth, out);
    offered(model, *c->right, b, depth, out);
  } else if (const auto* r = std::get_if<ConstantRef>(&t.node)) {
    const AgentDef& def = model.agent(model.agent_index(r->name));
    offered(model, def.body, Binding{&def.params, eval_location(r->where, b)}, depth + 1, out);
  }
}

inline std::vector<BoundPrefix> offered(const Model& model, const Individual& i) {
  const AgentDef& def = model.agent(i.agent);
  std::vector<BoundPrefix> out;
  offered(model, def.body, Binding{&def.params, i.loc}, 0, out);
  return out;
}

// State after individual `self` performs `mode` and continues as `next`.
inline void replace(SystemState& s, const Individual& self, Mode mode, const std::optional<SpeciesKey>& next) {
  if (mode != Mode::Create) s.add(SpeciesKey{self.agent, self.loc}, -1);
  if (mode != Mode::Destroy) s.add(*next, +1);
}

struct Branch {
  std::optional<SpeciesKey> next;
  double probability = 1.0;
};

template <typename Counts>
std::vector<Branch> branches(const Model& model, const BoundPrefix& bp, Counts& counts) {
  if (bp.prefix->action.mode == Mode::Destroy) return {Branch{}};
  const int agent = model.agent_index(bp.prefix->next.agent);
  std::vector<Branch> out;
  for (const auto& [l, p] : eval_destination<double>(bp.prefix->next.dest, model, bp.binding, counts))
    out.push_back(Branch{SpeciesKey{agent, l}, p});
  return out;
}

}  // namespace detail

// All individual-level transitions out of `state`. Pairs (i, j) are ordered
// with i != j; environment instances are crossed with individuals. Paired
// influences also report their no-update branch r(1 - p).
inline std::vector<IndividualTransition> individual_transitions(const Model& model, const SystemState& state,
                                                                const IndividualOptions& options = {}) {
  using detail::Individual;
  std::vector<Individual> people;
  for (const auto& [k, n] : state.counts) {
    if (people.size() + static_cast<std::size_t>(n) > options.max_agents)
      throw std::length_error("individual transition system limited to " + std::to_string(options.max_agents) +
                              " agents");
    for (std::int64_t c = 0; c < n; ++c) people.push_back(Individual{k.agent, k.loc});
  }
  auto counts = state_counts(state);
  std::vector<std::vector<detail::BoundPrefix>> menus;
  for (const auto& i : people) menus.push_back(detail::offered(model, i));

  std::vector<IndividualTransition> out;
  auto emit = [&](TransitionLabel label, double value, SystemState target, IndividualKind kind) {
    if (value <= 0.0) return;
    if (kind == IndividualKind::Effective && target == state) kind = IndividualKind::NoUpdate;
    out.push_back(IndividualTransition{std::move(label), value, std::move(target), kind});
  };

  for (std::size_t i = 0; i < people.size(); ++i) {
    const Individual& me = people[i];
    for (const auto& bp : menus[i]) {
      const ActionSpec& a = bp.prefix->action;
      if (a.kind == ActionKind::Passive) continue;
      const double r = eval_rate_checked<double>(a.value, model, bp.binding, counts);

      if (a.kind == ActionKind::NoInfluence) {
        for (const auto& br : detail::branches(model, bp, counts)) {
          SystemState t = state;
          detail::replace(t, me, a.mode, br.next);
          emit(TransitionLabel{LabelMode{a.mode, std::nullopt}, Influence::None, {}, a.name, r * br.probability, me.loc},
               r * br.probability, std::move(t), IndividualKind::Effective);
        }
        continue;
      }

      const TargetSet targets = eval_target_set(a.targets, bp.binding, model.space());
      bool partnered = false;
      for (std::size_t j = 0; j < people.size(); ++j) {
        if (j == i || !targets.contains(people[j].loc)) continue;
        for (const auto& bq : menus[j]) {
          const ActionSpec& q = bq.prefix->action;
          if (q.kind != ActionKind::Passive || q.name != a.name) continue;
          const double p = eval_probability<double>(q.value, model, bq.binding, counts);
          partnered = partnered || p > 0.0;
          for (const auto& ba : detail::branches(model, bp, counts))
            for (const auto& bb : detail::branches(model, bq, counts)) {
              SystemState t = state;
              detail::replace(t, me, a.mode, ba.next);
              detail::replace(t, people[j], q.mode, bb.next);
              const double v = r * p * ba.probability * bb.probability;
              emit(TransitionLabel{LabelMode{a.mode, q.mode}, Influence::Target, targets, a.name, v, people[j].loc}, v,
                   std::move(t), IndividualKind::Effective);
            }
          emit(TransitionLabel{LabelMode{Mode::Keep, Mode::Keep}, Influence::Target, targets, a.name, r * (1.0 - p),
                               people[j].loc},
               r * (1.0 - p), state, IndividualKind::NoUpdate);
        }
      }
      if (options.unpaired_influence && !partnered) {
        for (const auto& br : detail::branches(model, bp, counts)) {
          SystemState t = state;
          detail::replace(t, me, a.mode, br.next);
          emit(TransitionLabel{LabelMode{a.mode, std::nullopt}, Influence::Target, targets, a.name,
                               r * br.probability, me.loc},
               r * br.probability, std::move(t), IndividualKind::Unpaired);
        }
      }
    }
  }

  for (const auto& [e, ne] : state.env) {
    const EnvDef& env = model.env(e);
    const Binding none{};
    const double r = eval_rate_checked<double>(env.rate, model, none, counts);
    const TargetSet targets = eval_target_set(env.targets, none, model.space());
    for (std::int64_t instance = 0; instance < ne; ++instance)
      for (std::size_t j = 0; j < people.size(); ++j) {
        if (!targets.contains(people[j].loc)) continue;
        for (const auto& bq : menus[j]) {
          const ActionSpec& q = bq.prefix->action;
          if (q.kind != ActionKind::Passive || q.name != env.action) continue;
          const double p = eval_probability<double>(q.value, model, bq.binding, counts);
          for (const auto& bb : detail::branches(model, bq, counts)) {
            SystemState t = state;
            detail::replace(t, people[j], q.mode, bb.next);
            const double v = r * p * bb.probability;
            emit(TransitionLabel{LabelMode{Mode::Keep, q.mode}, Influence::Target, targets, env.action, v,
                                 people[j].loc},
                 v, std::move(t), IndividualKind::Effective);
          }
          emit(TransitionLabel{LabelMode{Mode::Keep, Mode::Keep}, Influence::Target, targets, env.action,
                               r * (1.0 - p), people[j].loc},
               r * (1.0 - p), state, IndividualKind::NoUpdate);
        }
      }
  }
  return out;
}

}  // namespace mela
