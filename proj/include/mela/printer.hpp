#pragma once

#include <charconv>
#include <sstream>
#include <string>
#include <vector>

#include "mela/ast.hpp"

namespace mela {

// Shortest decimal text that reads back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline int precedence(CoordOp op) { return (op == CoordOp::Add || op == CoordOp::Sub) ? 1 : 2; }
inline int precedence(RateOp op) {
  switch (op) {
    case RateOp::Add:
    case RateOp::Sub: return 1;
    case RateOp::Mul:
    case RateOp::Div: return 2;
    default: return 3;  // min/max print as calls
  }
}

inline const char* symbol(CoordOp op) {
  switch (op) {
    case CoordOp::Add: return " + ";
    case CoordOp::Sub: return " - ";
    case CoordOp::Mul: return " * ";
    case CoordOp::Div: return " / ";
    case CoordOp::Mod: return " mod ";
  }
  return "?";
}

inline const char* symbol(RateOp op) {
  switch (op) {
    case RateOp::Add: return " + ";
    case RateOp::Sub: return " - ";
    case RateOp::Mul: return " * ";
    case RateOp::Div: return " / ";
    default: return "?";
  }
}

}  // namespace detail

inline std::string print(const CoordExpr& e);

inline std::string print_coord_operand(const CoordExpr& e, int parent, bool right) {
  const auto* b = std::get_if<CoordBinary>(&e.node);
  std::string s = print(e);
  if (b && (detail::precedence(b->op) < parent || (right && detail::precedence(b->op) == parent)))
    return "(" + s + ")";
  return s;
}

inline std::string print(const CoordExpr& e) {
  return std::visit(
      [](const auto& n) -> std::string {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, CoordLiteral>) return std::to_string(n.value);
        else if constexpr (std::is_same_v<N, CoordVar>) return n.name;
        else {
          const int p = detail::precedence(n.op);
          return print_coord_operand(*n.lhs, p, false) + detail::symbol(n.op) + print_coord_operand(*n.rhs, p, true);
        }
      },
      e.node);
}

// Bare coordinate list, as used inside `Name(...)` argument lists.
inline std::string print_args(const LocationExpr& l) {
  std::string out;
  for (std::size_t i = 0; i < l.coords.size(); ++i) {
    if (i) out += ", ";
    out += print(l.coords[i]);
  }
  return out;
}

// One location as a list element: tuples are parenthesised.
inline std::string print_item(const LocationExpr& l) {
  if (l.coords.size() == 1) return print(l.coords[0]);
  return "(" + print_args(l) + ")";
}

inline std::string print(const RateExpr& e);

inline std::string print_rate_operand(const RateExpr& e, int parent, bool right) {
  const auto* b = std::get_if<RateBinary>(&e.node);
  std::string s = print(e);
  if (b && detail::precedence(b->op) < 3 &&
      (detail::precedence(b->op) < parent || (right && detail::precedence(b->op) == parent)))
    return "(" + s + ")";
  return s;
}

inline std::string print(const RateExpr& e) {
  return std::visit(
      [](const auto& n) -> std::string {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, Number>) return format_number(n.value);
        else if constexpr (std::is_same_v<N, ParamRef>) return n.name;
        else if constexpr (std::is_same_v<N, CountTerm>) {
          std::string s = "#" + n.agent;
          if (n.where) s += "(" + print_args(*n.where) + ")";
          return s;
        } else {
          if (n.op == RateOp::Min || n.op == RateOp::Max)
            return std::string(n.op == RateOp::Min ? "min(" : "max(") + print(*n.lhs) + ", " + print(*n.rhs) + ")";
          const int p = detail::precedence(n.op);
          return print_rate_operand(*n.lhs, p, false) + detail::symbol(n.op) + print_rate_operand(*n.rhs, p, true);
        }
      },
      e.node);
}

inline std::string print(const LocationSetExpr& s) {
  if (std::holds_alternative<AllSet>(s.node)) return "{all}";
  if (std::holds_alternative<HereSet>(s.node)) return "{here}";
  const auto& list = std::get<ListSet>(s.node);
  std::string out = "{";
  for (std::size_t i = 0; i < list.items.size(); ++i) {
    if (i) out += ", ";
    out += print_item(list.items[i]);
  }
  return out + "}";
}

inline std::string print(const DestinationExpr& d) {
  return std::visit(
      [](const auto& n) -> std::string {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, LocationExpr>) return print_args(n);
        else if constexpr (std::is_same_v<N, NeighbourDest>)
          return std::string(n.outer ? "new_v(" : "new(") + print_args(n.of) + ")";
        else if constexpr (std::is_same_v<N, UniformDest>) {
          std::string out = "U(";
          for (std::size_t i = 0; i < n.items.size(); ++i) {
            if (i) out += ", ";
            out += print_item(n.items[i]);
          }
          return out + ")";
        } else {
          std::string out = "dist(";
          for (std::size_t i = 0; i < n.items.size(); ++i) {
            if (i) out += ", ";
            out += print_item(n.items[i].first) + "[" + print(n.items[i].second) + "]";
          }
          return out + ")";
        }
      },
      d.node);
}

inline const char* print(Mode m) {
  switch (m) {
    case Mode::Keep: return ".";
    case Mode::Create: return "up";
    case Mode::Destroy: return "down";
  }
  return "?";
}

inline std::string print(const Prefix& p) {
  std::string out;
  if (p.action.kind == ActionKind::Influence) out += "->" + print(p.action.targets);
  if (p.action.kind == ActionKind::Passive) out += "<-";
  out += "(" + p.action.name + ", " + print(p.action.value) + ") ";
  out += print(p.action.mode);
  out += " " + p.next.agent + "(" + print(p.next.dest) + ")";
  return out;
}

inline std::string print(const ProcessTerm& t, const std::string& sep = " + ") {
  return std::visit(
      [&](const auto& n) -> std::string {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, Prefix>) return print(n);
        else if constexpr (std::is_same_v<N, Choice>) return print(*n.left, sep) + sep + print(*n.right, sep);
        else if constexpr (std::is_same_v<N, ConstantRef>) return n.name + "(" + print_args(n.where) + ")";
        else return "nil";
      },
      t.node);
}

inline std::string print(const NeighbourhoodSpec& nb) {
  return std::string(" boundary=") + to_string(nb.boundary) + " neighbourhood=" + to_string(nb.kind);
}

inline std::string print_graph(const GraphSpace& g) {
  std::string out = "graph {";
  for (const auto& [v, adj] : g.adjacency) {
    out += " " + std::to_string(v) + ": [";
    for (std::size_t i = 0; i < adj.size(); ++i) {
      if (i) out += ", ";
      out += std::to_string(adj[i]);
    }
    out += "];";
  }
  return out + " }";
}

inline std::string print(const SpaceDecl& d) {
  return std::visit(
      [](const auto& s) -> std::string {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, LineSpace>)
          return "line(" + std::to_string(s.length) + ") origin=" + std::to_string(s.origin) + print(s.neighbourhood);
        else if constexpr (std::is_same_v<S, Grid2DSpace>)
          return "grid2d(" + std::to_string(s.width) + ", " + std::to_string(s.height) + ")" + print(s.neighbourhood);
        else if constexpr (std::is_same_v<S, Grid3DSpace>)
          return "grid3d(" + std::to_string(s.width) + ", " + std::to_string(s.height) + ", " +
                 std::to_string(s.depth) + ")" + print(s.neighbourhood);
        else if constexpr (std::is_same_v<S, GraphSpace>)
          return print_graph(s);
        else
          return "nested(" + print(*s.inner) + ", " + print_graph(s.outer) + ") entry=" + to_string(s.entry);
      },
      d.shape);
}

// Canonical source text. parse_model(print(m)) yields a model equal to m.
inline std::string print(const ModelDef& m) {
  std::ostringstream os;
  for (const auto& p : m.params) os << "param " << p.name << " = " << format_number(p.value) << ";\n";
  if (!m.params.empty()) os << "\n";
  os << "space " << print(m.space) << ";\n\n";
  for (const auto& a : m.agents) {
    os << "agent " << a.name << "(";
    for (std::size_t i = 0; i < a.params.size(); ++i) os << (i ? ", " : "") << a.params[i];
    os << ") =\n    " << print(a.body, "\n  + ") << ";\n";
  }
  for (const auto& e : m.envs)
    os << "env " << e.name << " = ->" << print(e.targets) << "(" << e.action << ", " << print(e.rate) << ") . "
       << e.continuation << ";\n";
  os << "\ninit = ";
  for (std::size_t i = 0; i < m.init.size(); ++i) {
    const auto& e = m.init[i];
    if (i) os << " | ";
    os << e.name;
    if (e.where) {
      os << "(";
      for (std::size_t k = 0; k < e.where->arity; ++k) os << (k ? ", " : "") << e.where->c[k];
      os << ")";
    }
    os << "[" << e.multiplicity << "]";
  }
  os << ";\n";
  return os.str();
}

}  // namespace mela
