#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "mela/ast.hpp"
#include "mela/diagnostics.hpp"
#include "mela/model.hpp"
#include "mela/printer.hpp"
#include "mela/state.hpp"

namespace mela {

inline double value_of(double v) { return v; }

// Location variables of a defining equation bound to a concrete location.
struct Binding {
  const std::vector<std::string>* vars = nullptr;
  Location loc;
};

inline int floor_mod(int a, int b) { return ((a % b) + b) % b; }
inline int floor_div(int a, int b) { return (a - floor_mod(a, b)) / b; }

inline int eval_coord(const CoordExpr& e, const Binding& b) {
  return std::visit(
      [&](const auto& n) -> int {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, CoordLiteral>) return n.value;
        else if constexpr (std::is_same_v<N, CoordVar>) {
          if (b.vars)
            for (std::size_t i = 0; i < b.vars->size(); ++i)
              if ((*b.vars)[i] == n.name) return b.loc.c[i];
          throw EvalError("unbound location variable '" + n.name + "'");
        } else {
          const int l = eval_coord(*n.lhs, b);
          const int r = eval_coord(*n.rhs, b);
          switch (n.op) {
            case CoordOp::Add: return l + r;
            case CoordOp::Sub: return l - r;
            case CoordOp::Mul: return l * r;
            case CoordOp::Div:
              if (r == 0) throw EvalError("division by zero in location expression");
              return floor_div(l, r);
            case CoordOp::Mod:
              if (r == 0) throw EvalError("division by zero in location expression");
              return floor_mod(l, r);
          }
          return 0;
        }
      },
      e.node);
}

inline Location eval_location(const LocationExpr& e, const Binding& b) {
  int coords[3] = {0, 0, 0};
  for (std::size_t i = 0; i < e.coords.size(); ++i) coords[i] = eval_coord(e.coords[i], b);
  return make_location(coords, e.coords.size());
}

// Evaluated influence target set. `all` stands for every location.
struct TargetSet {
  bool all = false;
  std::vector<Location> locs;  // sorted, unique; empty when `all`

  bool contains(const Location& l) const { return all || std::binary_search(locs.begin(), locs.end(), l); }
  bool operator==(const TargetSet&) const = default;
};

inline std::string to_string(const TargetSet& s) {
  if (s.all) return "{all}";
  std::string out = "{";
  for (std::size_t i = 0; i < s.locs.size(); ++i) out += (i ? "," : "") + to_string(s.locs[i]);
  return out + "}";
}

inline TargetSet eval_target_set(const LocationSetExpr& e, const Binding& b, const Space& space) {
  TargetSet out;
  if (std::holds_alternative<AllSet>(e.node)) {
    out.all = true;
  } else if (std::holds_alternative<HereSet>(e.node)) {
    out.locs.push_back(b.loc);
  } else {
    for (const auto& item : std::get<ListSet>(e.node).items) {
      Location l = eval_location(item, b);
      if (!space.contains(l)) throw EvalError("target location " + to_string(l) + " outside space");
      out.locs.push_back(l);
    }
    std::sort(out.locs.begin(), out.locs.end());
    out.locs.erase(std::unique(out.locs.begin(), out.locs.end()), out.locs.end());
  }
  return out;
}

// Evaluates a rate/probability expression. `counts(agent, loc)` returns the
// population of an agent state at a location, or summed over the space when
// `loc` is null. T is double for the stochastic semantics; the fluid model
// also instantiates it with dual numbers.
template <typename T, typename Counts>
T eval_rate(const RateExpr& e, const Model& model, const Binding& b, Counts&& counts) {
  return std::visit(
      [&](const auto& n) -> T {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, Number>) return T(n.value);
        else if constexpr (std::is_same_v<N, ParamRef>) {
          auto it = model.params().find(n.name);
          if (it == model.params().end()) throw EvalError("unknown parameter '" + n.name + "'");
          return T(it->second);
        } else if constexpr (std::is_same_v<N, CountTerm>) {
          const int agent = model.agent_index(n.agent);
          if (agent < 0) throw EvalError("count of undefined agent '" + n.agent + "'");
          if (!n.where) return counts(agent, static_cast<const Location*>(nullptr));
          const Location l = eval_location(*n.where, b);
          return counts(agent, &l);
        } else {
          T l = eval_rate<T>(*n.lhs, model, b, counts);
          T r = eval_rate<T>(*n.rhs, model, b, counts);
          switch (n.op) {
            case RateOp::Add: return l + r;
            case RateOp::Sub: return l - r;
            case RateOp::Mul: return l * r;
            case RateOp::Div:
              if (value_of(r) == 0.0) throw EvalError("division by zero");
              return l / r;
            case RateOp::Min: return value_of(r) < value_of(l) ? r : l;
            case RateOp::Max: return value_of(r) > value_of(l) ? r : l;
          }
          return l;
        }
      },
      e.node);
}

// Same, rejecting negative and non-finite results.
template <typename T, typename Counts>
T eval_rate_checked(const RateExpr& e, const Model& model, const Binding& b, Counts&& counts) {
  T v = eval_rate<T>(e, model, b, counts);
  const double x = value_of(v);
  if (!std::isfinite(x)) throw EvalError("non-finite value of '" + print(e) + "'");
  if (x < 0.0) throw EvalError("negative value " + format_number(x) + " of '" + print(e) + "'");
  return v;
}

template <typename T, typename Counts>
T eval_probability(const RateExpr& e, const Model& model, const Binding& b, Counts&& counts) {
  T v = eval_rate_checked<T>(e, model, b, counts);
  if (value_of(v) > 1.0) throw EvalError("probability " + format_number(value_of(v)) + " of '" + print(e) + "' exceeds 1");
  return v;
}

// Count accessor over a discrete state.
inline auto state_counts(const SystemState& s) {
  return [&s](int agent, const Location* l) -> double {
    return static_cast<double>(l ? s.count(agent, *l) : s.total(agent));
  };
}

// Evaluates `expr` against `state`; counts missing from the state are zero.
inline double eval_rate_expr(const Model& model, const RateExpr& expr, const SystemState& state,
                             const Binding& binding = {}) {
  return eval_rate_checked<double>(expr, model, binding, state_counts(state));
}

// Destination distribution, sorted by location with duplicate locations
// merged. Uniform forms give 1/n per listed entry, empirical forms must sum
// to 1 within 1e-9. An empty neighbourhood yields an empty distribution.
template <typename T, typename Counts>
std::vector<std::pair<Location, T>> eval_destination(const DestinationExpr& d, const Model& model, const Binding& b,
                                                     Counts&& counts) {
  const Space& space = model.space();
  std::vector<std::pair<Location, T>> raw;
  auto inside = [&](const Location& l) {
    if (!space.contains(l)) throw EvalError("destination " + to_string(l) + " outside space");
    return l;
  };
  auto uniform = [&](const std::vector<Location>& locs) {
    const double p = 1.0 / static_cast<double>(locs.size());
    for (const auto& l : locs) raw.emplace_back(inside(l), T(p));
  };

  std::visit(
      [&](const auto& n) {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, LocationExpr>) {
          raw.emplace_back(inside(eval_location(n, b)), T(1.0));
        } else if constexpr (std::is_same_v<N, NeighbourDest>) {
          const Location from = eval_location(n.of, b);
          if (!space.contains(from)) throw EvalError("location " + to_string(from) + " outside space");
          const auto locs = n.outer ? space.outer_neighbours(from) : space.neighbours(from);
          if (!locs.empty()) uniform(locs);
        } else if constexpr (std::is_same_v<N, UniformDest>) {
          std::vector<Location> locs;
          for (const auto& item : n.items) locs.push_back(eval_location(item, b));
          uniform(locs);
        } else {
          double sum = 0.0;
          for (const auto& [item, pe] : n.items) {
            T p = eval_probability<T>(pe, model, b, counts);
            sum += value_of(p);
            raw.emplace_back(inside(eval_location(item, b)), p);
          }
          if (std::abs(sum - 1.0) > 1e-9)
            throw EvalError("destination probabilities sum to " + format_number(sum) + ", not 1");
        }
      },
      d.node);

  std::stable_sort(raw.begin(), raw.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  std::vector<std::pair<Location, T>> out;
  for (auto& [l, p] : raw) {
    if (!out.empty() && out.back().first == l) out.back().second = out.back().second + p;
    else out.emplace_back(l, p);
  }
  return out;
}

inline std::vector<std::pair<Location, double>> eval_destination(const Model& model, const DestinationExpr& d,
                                                                 const Location& from, const SystemState& state,
                                                                 const std::vector<std::string>* vars) {
  return eval_destination<double>(d, model, Binding{vars, from}, state_counts(state));
}

}  // namespace mela
