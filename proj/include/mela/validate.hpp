#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "mela/ast.hpp"
#include "mela/diagnostics.hpp"
#include "mela/printer.hpp"
#include "mela/space.hpp"

namespace mela {

namespace detail {

class Validator {
 public:
  explicit Validator(const ModelDef& m) : m_(m) {}

  std::vector<Diagnostic> run() {
    try {
      space_ = Space::build(m_.space);
    } catch (const SpaceError& e) {
      error(m_.space_pos, std::string("invalid space: ") + e.what());
    }
    arity_ = space_arity(m_.space);

    for (const auto& p : m_.params) params_.emplace(p.name, p.value);
    for (const auto& a : m_.agents) agents_.emplace(a.name, &a);
    for (const auto& e : m_.envs) envs_.emplace(e.name, &e);

    for (const auto& a : m_.agents) agent(a);
    for (const auto& e : m_.envs) env(e);
    init();
    guardedness();
    pairing();
    return std::move(diags_);
  }

 private:
  void error(SourcePos pos, std::string msg) { diags_.push_back({Severity::Error, pos, std::move(msg)}); }
  void warning(SourcePos pos, std::string msg) { diags_.push_back({Severity::Warning, pos, std::move(msg)}); }

  // Variables allowed in coordinate expressions of the current context.
  const std::vector<std::string>* vars_ = nullptr;

  bool coord_constant(const CoordExpr& e) const {
    if (std::holds_alternative<CoordVar>(e.node)) return false;
    if (const auto* b = std::get_if<CoordBinary>(&e.node)) return coord_constant(*b->lhs) && coord_constant(*b->rhs);
    return true;
  }

  std::optional<int> coord_value(const CoordExpr& e) const {
    if (const auto* lit = std::get_if<CoordLiteral>(&e.node)) return lit->value;
    if (const auto* b = std::get_if<CoordBinary>(&e.node)) {
      auto l = coord_value(*b->lhs), r = coord_value(*b->rhs);
      if (!l || !r) return std::nullopt;
      switch (b->op) {
        case CoordOp::Add: return *l + *r;
        case CoordOp::Sub: return *l - *r;
        case CoordOp::Mul: return *l * *r;
        case CoordOp::Div:
          if (*r == 0) return std::nullopt;
          return (*l - (((*l % *r) + *r) % *r)) / *r;
        case CoordOp::Mod:
          if (*r == 0) return std::nullopt;
          return ((*l % *r) + *r) % *r;
      }
    }
    return std::nullopt;
  }

  void coord(const CoordExpr& e, SourcePos pos) {
    if (const auto* v = std::get_if<CoordVar>(&e.node)) {
      bool bound = false;
      if (vars_)
        for (const auto& name : *vars_) bound |= name == v->name;
      if (!bound) error(pos, "unknown location variable '" + v->name + "'");
    } else if (const auto* b = std::get_if<CoordBinary>(&e.node)) {
      coord(*b->lhs, pos);
      coord(*b->rhs, pos);
      if ((b->op == CoordOp::Div || b->op == CoordOp::Mod) && coord_value(*b->rhs) == 0)
        error(pos, "division by zero in location expression");
    }
  }

  // Checks arity and variables; constant locations must lie inside the space.
  void location(const LocationExpr& l, SourcePos pos, int expected_arity) {
    if (static_cast<int>(l.arity()) != expected_arity) {
      error(pos, "location '" + print_item(l) + "' has " + std::to_string(l.arity()) + " coordinates, expected " +
                     std::to_string(expected_arity));
      return;
    }
    bool constant = true;
    for (const auto& c : l.coords) {
      coord(c, pos);
      constant &= coord_constant(c);
    }
    if (constant && space_ && expected_arity == arity_) {
      int coords[3] = {0, 0, 0};
      for (std::size_t i = 0; i < l.arity(); ++i) {
        auto v = coord_value(l.coords[i]);
        if (!v) return;
        coords[i] = *v;
      }
      const Location loc = make_location(coords, l.arity());
      if (!space_->contains(loc)) error(pos, "location " + to_string(loc) + " outside space");
    }
  }

  void rate(const RateExpr& e, SourcePos pos) {
    std::visit(
        [&](const auto& n) {
          using N = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<N, ParamRef>) {
            if (!params_.count(n.name)) error(n.pos, "unknown parameter '" + n.name + "'");
          } else if constexpr (std::is_same_v<N, CountTerm>) {
            if (!agents_.count(n.agent)) error(n.pos, "count of undefined agent '" + n.agent + "'");
            if (n.where) location(*n.where, n.pos, arity_);
          } else if constexpr (std::is_same_v<N, RateBinary>) {
            rate(*n.lhs, pos);
            rate(*n.rhs, pos);
          }
        },
        e.node);
  }

  std::optional<double> constant_value(const RateExpr& e) const {
    return std::visit(
        [&](const auto& n) -> std::optional<double> {
          using N = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<N, Number>) return n.value;
          else if constexpr (std::is_same_v<N, ParamRef>) {
            auto it = params_.find(n.name);
            if (it == params_.end()) return std::nullopt;
            return it->second;
          } else if constexpr (std::is_same_v<N, CountTerm>) return std::nullopt;
          else {
            auto l = constant_value(*n.lhs), r = constant_value(*n.rhs);
            if (!l || !r) return std::nullopt;
            switch (n.op) {
              case RateOp::Add: return *l + *r;
              case RateOp::Sub: return *l - *r;
              case RateOp::Mul: return *l * *r;
              case RateOp::Div:
                if (*r == 0) return std::nullopt;
                return *l / *r;
              case RateOp::Min: return std::min(*l, *r);
              case RateOp::Max: return std::max(*l, *r);
            }
            return std::nullopt;
          }
        },
        e.node);
  }

  void target_set(const LocationSetExpr& s, SourcePos pos) {
    if (const auto* list = std::get_if<ListSet>(&s.node))
      for (const auto& item : list->items) location(item, pos, arity_);
  }

  void destination(const DestinationExpr& d, SourcePos pos) {
    std::visit(
        [&](const auto& n) {
          using N = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<N, LocationExpr>) {
            location(n, pos, arity_);
          } else if constexpr (std::is_same_v<N, NeighbourDest>) {
            location(n.of, pos, arity_);
            if (n.outer && !std::holds_alternative<NestedSpace>(m_.space.shape))
              error(pos, "new_v(...) requires a nested space");
          } else if constexpr (std::is_same_v<N, UniformDest>) {
            for (const auto& item : n.items) location(item, pos, arity_);
          } else {
            for (const auto& [item, p] : n.items) {
              location(item, pos, arity_);
              rate(p, pos);
              if (auto v = constant_value(p); v && (*v < 0.0 || *v > 1.0))
                error(pos, "destination probability " + format_number(*v) + " outside [0,1]");
            }
          }
        },
        d.node);
  }

  void prefix(const AgentDef& owner, const Prefix& p) {
    const ActionSpec& a = p.action;
    rate(a.value, a.pos);
    if (a.kind == ActionKind::Passive) {
      if (auto v = constant_value(a.value); v && (*v < 0.0 || *v > 1.0))
        error(a.pos, "probability of passive action '" + a.name + "' is " + format_number(*v) + ", outside [0,1]");
    } else if (auto v = constant_value(a.value); v && *v < 0.0) {
      error(a.pos, "rate of action '" + a.name + "' is negative");
    }
    if (a.kind == ActionKind::Influence) target_set(a.targets, a.pos);
    if (!agents_.count(p.next.agent)) {
      error(p.next.pos, envs_.count(p.next.agent)
                            ? "continuation '" + p.next.agent + "' is an environment factor, not an agent"
                            : "undefined agent '" + p.next.agent + "'");
    }
    destination(p.next.dest, p.next.pos);
    (void)owner;
  }

  void term(const AgentDef& owner, const ProcessTerm& t, bool top) {
    std::visit(
        [&](const auto& n) {
          using N = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<N, Prefix>) {
            prefix(owner, n);
          } else if constexpr (std::is_same_v<N, Choice>) {
            term(owner, *n.left, false);
            term(owner, *n.right, false);
          } else if constexpr (std::is_same_v<N, ConstantRef>) {
            auto it = agents_.find(n.name);
            if (it == agents_.end()) {
              error(n.pos, "undefined agent '" + n.name + "'");
              return;
            }
            bool same = n.where.arity() == owner.params.size();
            for (std::size_t i = 0; same && i < n.where.arity(); ++i) {
              const auto* v = std::get_if<CoordVar>(&n.where.coords[i].node);
              same = v && v->name == owner.params[i];
            }
            if (!same)
              error(n.pos, "unguarded reference to '" + n.name + "' must keep the agent's own location (" +
                               print_args(loc_expr_of(owner)) + ")");
          } else {
            if (!top) error(owner.pos, "'nil' may only appear as a whole agent body");
          }
        },
        t.node);
  }

  static LocationExpr loc_expr_of(const AgentDef& a) {
    LocationExpr e;
    for (const auto& p : a.params) e.coords.push_back(mela::coord(p));
    return e;
  }

  void agent(const AgentDef& a) {
    if (static_cast<int>(a.params.size()) != arity_)
      error(a.pos, "agent '" + a.name + "' has " + std::to_string(a.params.size()) +
                       " location coordinates but the space has " + std::to_string(arity_));
    std::set<std::string> seen;
    for (const auto& p : a.params)
      if (!seen.insert(p).second) error(a.pos, "location variable '" + p + "' repeated in agent '" + a.name + "'");
    vars_ = &a.params;
    term(a, a.body, true);
    vars_ = nullptr;

    // an agent offering both sides of the same action
    std::map<std::string, std::pair<bool, bool>> sides;
    std::vector<const ProcessTerm*> summands;
    collect_summands(a.body, summands);
    for (const auto* s : summands)
      if (const auto* p = std::get_if<Prefix>(&s->node)) {
        if (p->action.kind == ActionKind::Influence) sides[p->action.name].first = true;
        if (p->action.kind == ActionKind::Passive) sides[p->action.name].second = true;
      }
    for (const auto& [name, both] : sides)
      if (both.first && both.second)
        warning(a.pos, "agent '" + a.name + "' has both passive and active forms of action '" + name + "'");
  }

  void env(const EnvDef& e) {
    vars_ = nullptr;
    target_set(e.targets, e.pos);
    rate(e.rate, e.pos);
    if (auto v = constant_value(e.rate); v && *v < 0.0) error(e.pos, "rate of action '" + e.action + "' is negative");
    if (e.continuation != e.name)
      error(e.pos, "environment factor '" + e.name + "' must continue as itself, not '" + e.continuation + "'");
  }

  void init() {
    if (m_.init.empty()) error(SourcePos{}, "init must contain at least one component");
    for (const auto& entry : m_.init) {
      if (agents_.count(entry.name)) {
        if (!entry.where) {
          error(entry.pos, "agent '" + entry.name + "' in init needs a location");
          continue;
        }
        if (entry.where->arity != arity_) {
          error(entry.pos, "location " + to_string(*entry.where) + " of '" + entry.name + "' has " +
                               std::to_string(entry.where->arity) + " coordinates, expected " +
                               std::to_string(arity_));
        } else if (space_ && !space_->contains(*entry.where)) {
          error(entry.pos, "location " + to_string(*entry.where) + " outside space");
        }
      } else if (envs_.count(entry.name)) {
        if (entry.where) error(entry.pos, "environment factor '" + entry.name + "' has no location");
      } else {
        error(entry.pos, "undefined agent or environment factor '" + entry.name + "' in init");
      }
      if (entry.multiplicity < 1) error(entry.pos, "multiplicity must be a positive integer");
    }
  }

  // Unguarded references (constants in choice position) must not form a
  // cycle, otherwise the transition derivation would not terminate.
  void guardedness() {
    std::map<std::string, std::vector<std::string>> edges;
    for (const auto& a : m_.agents) {
      std::vector<const ProcessTerm*> summands;
      collect_summands(a.body, summands);
      for (const auto* s : summands)
        if (const auto* r = std::get_if<ConstantRef>(&s->node)) edges[a.name].push_back(r->name);
    }
    std::map<std::string, int> colour;  // 0 white, 1 grey, 2 black
    std::set<std::string> reported;
    std::function<void(const std::string&)> dfs = [&](const std::string& n) {
      colour[n] = 1;
      for (const auto& m : edges[n]) {
        if (colour[m] == 1) {
          if (reported.insert(m).second) {
            auto it = agents_.find(m);
            error(it == agents_.end() ? SourcePos{} : it->second->pos, "unguarded recursion through '" + m + "'");
          }
        } else if (colour[m] == 0) {
          dfs(m);
        }
      }
      colour[n] = 2;
    };
    for (const auto& a : m_.agents)
      if (colour[a.name] == 0) dfs(a.name);
  }

  void pairing() {
    std::map<std::string, SourcePos> active, passive;
    for (const auto& a : m_.agents) {
      std::vector<const ProcessTerm*> summands;
      collect_summands(a.body, summands);
      for (const auto* s : summands)
        if (const auto* p = std::get_if<Prefix>(&s->node)) {
          if (p->action.kind == ActionKind::Influence) active.emplace(p->action.name, p->action.pos);
          if (p->action.kind == ActionKind::Passive) passive.emplace(p->action.name, p->action.pos);
        }
    }
    for (const auto& e : m_.envs) active.emplace(e.action, e.pos);
    for (const auto& [name, pos] : passive)
      if (!active.count(name)) warning(pos, "unmatched passive action '" + name + "'");
    for (const auto& [name, pos] : active)
      if (!passive.count(name)) warning(pos, "unmatched influence action '" + name + "'");
  }

  const ModelDef& m_;
  std::optional<Space> space_;
  int arity_ = 1;
  std::unordered_map<std::string, double> params_;
  std::unordered_map<std::string, const AgentDef*> agents_;
  std::unordered_map<std::string, const EnvDef*> envs_;
  std::vector<Diagnostic> diags_;
};

}  // namespace detail

// Static checks. Returns an empty sequence iff the model is well formed;
// errors and warnings are distinguished by severity.
inline std::vector<Diagnostic> validate(const ModelDef& model) { return detail::Validator(model).run(); }

}  // namespace mela
