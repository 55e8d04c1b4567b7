#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mela/box.hpp"
#include "mela/diagnostics.hpp"
#include "mela/location.hpp"
#include "mela/space.hpp"

namespace mela {

// ---------------------------------------------------------------------------
// Coordinate and location expressions

struct CoordExpr;

enum class CoordOp { Add, Sub, Mul, Div, Mod };

struct CoordLiteral {
  int value = 0;
  bool operator==(const CoordLiteral&) const = default;
};

struct CoordVar {
  std::string name;
  bool operator==(const CoordVar&) const = default;
};

struct CoordBinary {
  CoordOp op = CoordOp::Add;
  Box<CoordExpr> lhs;
  Box<CoordExpr> rhs;
  bool operator==(const CoordBinary&) const = default;
};

struct CoordExpr {
  std::variant<CoordLiteral, CoordVar, CoordBinary> node;
  bool operator==(const CoordExpr&) const = default;
};

// One coordinate expression per location component.
struct LocationExpr {
  std::vector<CoordExpr> coords;
  std::size_t arity() const { return coords.size(); }
  bool operator==(const LocationExpr&) const = default;
};

// ---------------------------------------------------------------------------
// Rate / probability expressions

struct RateExpr;

enum class RateOp { Add, Sub, Mul, Div, Min, Max };

struct Number {
  double value = 0.0;
  bool operator==(const Number&) const = default;
};

struct ParamRef {
  std::string name;
  SourcePos pos;
  bool operator==(const ParamRef&) const = default;
};

// #Agent(loc): population of an agent state at a location. Without a
// location the count is summed over the whole space.
struct CountTerm {
  std::string agent;
  std::optional<LocationExpr> where;
  SourcePos pos;
  bool operator==(const CountTerm&) const = default;
};

struct RateBinary {
  RateOp op = RateOp::Add;
  Box<RateExpr> lhs;
  Box<RateExpr> rhs;
  bool operator==(const RateBinary&) const = default;
};

struct RateExpr {
  std::variant<Number, ParamRef, CountTerm, RateBinary> node;
  bool operator==(const RateExpr&) const = default;
};

// ---------------------------------------------------------------------------
// Influence target sets and destinations

struct HereSet {
  bool operator==(const HereSet&) const = default;
};
struct AllSet {
  bool operator==(const AllSet&) const = default;
};
struct ListSet {
  std::vector<LocationExpr> items;
  bool operator==(const ListSet&) const = default;
};

struct LocationSetExpr {
  std::variant<HereSet, ListSet, AllSet> node;
  bool operator==(const LocationSetExpr&) const = default;
};

// new(l): uniform over the space neighbourhood of `of`. With `outer` set
// (new_v) it is uniform over the outer-graph neighbours of a nested space,
// landing on the entry cell.
struct NeighbourDest {
  LocationExpr of;
  bool outer = false;
  bool operator==(const NeighbourDest&) const = default;
};

// U(l1, ..., ln)
struct UniformDest {
  std::vector<LocationExpr> items;
  bool operator==(const UniformDest&) const = default;
};

// dist(l1[p1], ..., ln[pn])
struct EmpiricalDest {
  std::vector<std::pair<LocationExpr, RateExpr>> items;
  bool operator==(const EmpiricalDest&) const = default;
};

struct DestinationExpr {
  std::variant<LocationExpr, NeighbourDest, UniformDest, EmpiricalDest> node;
  bool operator==(const DestinationExpr&) const = default;
};

// ---------------------------------------------------------------------------
// Process terms

enum class ActionKind { NoInfluence, Influence, Passive };
enum class Mode { Keep, Create, Destroy };

struct ActionSpec {
  std::string name;
  ActionKind kind = ActionKind::NoInfluence;
  LocationSetExpr targets;  // meaningful for Influence only
  Mode mode = Mode::Keep;
  RateExpr value;           // rate, or probability for Passive
  SourcePos pos;
  bool operator==(const ActionSpec&) const = default;
};

struct Continuation {
  std::string agent;
  DestinationExpr dest;
  SourcePos pos;
  bool operator==(const Continuation&) const = default;
};

struct ProcessTerm;

struct Prefix {
  ActionSpec action;
  Continuation next;
  bool operator==(const Prefix&) const = default;
};

struct Choice {
  Box<ProcessTerm> left;
  Box<ProcessTerm> right;
  bool operator==(const Choice&) const = default;
};

struct ConstantRef {
  std::string name;
  LocationExpr where;
  SourcePos pos;
  bool operator==(const ConstantRef&) const = default;
};

struct Nil {
  bool operator==(const Nil&) const = default;
};

struct ProcessTerm {
  std::variant<Prefix, Choice, ConstantRef, Nil> node;
  bool operator==(const ProcessTerm&) const = default;
};

// ---------------------------------------------------------------------------
// Top-level definitions

struct ParamDef {
  std::string name;
  double value = 0.0;
  SourcePos pos;
  bool operator==(const ParamDef&) const = default;
};

// Defining equation Name(params) = body. The parameters name the
// coordinates of the agent's location.
struct AgentDef {
  std::string name;
  std::vector<std::string> params;
  ProcessTerm body;
  SourcePos pos;
  std::size_t location_arity() const { return params.size(); }
  bool operator==(const AgentDef&) const = default;
};

// Env = ->{L}(action, rate) . Env
struct EnvDef {
  std::string name;
  LocationSetExpr targets;
  std::string action;
  RateExpr rate;
  std::string continuation;
  SourcePos pos;
  bool operator==(const EnvDef&) const = default;
};

// Name(loc)[n] or Env[n]
struct InitEntry {
  std::string name;
  std::optional<Location> where;
  std::int64_t multiplicity = 1;
  SourcePos pos;
  bool operator==(const InitEntry&) const = default;
};

struct ModelDef {
  std::vector<ParamDef> params;
  SpaceDecl space;
  SourcePos space_pos;
  std::vector<AgentDef> agents;
  std::vector<EnvDef> envs;
  std::vector<InitEntry> init;
  bool operator==(const ModelDef&) const = default;
};

// ---------------------------------------------------------------------------
// Small builders, mostly for tests and programmatic construction.

inline CoordExpr coord(int v) { return CoordExpr{CoordLiteral{v}}; }
inline CoordExpr coord(std::string var) { return CoordExpr{CoordVar{std::move(var)}}; }
inline CoordExpr coord(CoordOp op, CoordExpr a, CoordExpr b) {
  return CoordExpr{CoordBinary{op, std::move(a), std::move(b)}};
}

inline LocationExpr loc_expr(const Location& l) {
  LocationExpr e;
  for (std::size_t i = 0; i < l.arity; ++i) e.coords.push_back(coord(l.c[i]));
  return e;
}

inline RateExpr num(double v) { return RateExpr{Number{v}}; }
inline RateExpr param(std::string name) { return RateExpr{ParamRef{std::move(name), {}}}; }
inline RateExpr count(std::string agent, std::optional<LocationExpr> where = std::nullopt) {
  return RateExpr{CountTerm{std::move(agent), std::move(where), {}}};
}
inline RateExpr binary(RateOp op, RateExpr a, RateExpr b) {
  return RateExpr{RateBinary{op, std::move(a), std::move(b)}};
}

// True if the expression contains min/max (non-smooth in the fluid limit).
inline bool has_min_max(const RateExpr& e) {
  if (const auto* b = std::get_if<RateBinary>(&e.node))
    return b->op == RateOp::Min || b->op == RateOp::Max || has_min_max(*b->lhs) || has_min_max(*b->rhs);
  return false;
}

inline bool depends_on_state(const RateExpr& e) {
  if (std::holds_alternative<CountTerm>(e.node)) return true;
  if (const auto* b = std::get_if<RateBinary>(&e.node)) return depends_on_state(*b->lhs) || depends_on_state(*b->rhs);
  return false;
}

// Flattens right-nested choices (and nothing else) into their summands.
inline void collect_summands(const ProcessTerm& t, std::vector<const ProcessTerm*>& out) {
  if (const auto* c = std::get_if<Choice>(&t.node)) {
    collect_summands(*c->left, out);
    collect_summands(*c->right, out);
  } else {
    out.push_back(&t);
  }
}

}  // namespace mela
