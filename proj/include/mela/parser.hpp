#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mela/ast.hpp"
#include "mela/diagnostics.hpp"
#include "mela/lexer.hpp"

namespace mela {

struct ParseResult {
  std::optional<ModelDef> model;  // present iff no error diagnostics
  std::vector<Diagnostic> diagnostics;
  bool ok() const { return model.has_value(); }
};

inline bool is_reserved_word(std::string_view w) {
  static const std::set<std::string_view> words = {
      "param", "space", "agent", "env", "init", "nil",  "up",    "down",  "all",
      "here",  "new",   "new_v", "dist", "min", "max",  "mod",   "U"};
  return words.count(w) != 0;
}

namespace detail {

class Parser {
 public:
  Parser(std::vector<Token> tokens, std::vector<Diagnostic>& diags) : toks_(std::move(tokens)), diags_(diags) {}

  std::optional<ModelDef> run() {
    ModelDef model;
    bool have_space = false;
    bool have_init = false;
    std::set<std::string> names;  // agents and env factors share a namespace
    std::set<std::string> params;

    while (!at(Tok::End)) {
      try {
        const Token& kw = cur();
        if (kw.kind != Tok::Ident) fail("expected 'param', 'space', 'agent', 'env' or 'init'");
        if (kw.text == "param") {
          advance();
          ParamDef p;
          p.pos = cur().pos;
          p.name = name("parameter name");
          expect(Tok::Equals);
          bool negative = accept(Tok::Minus);
          p.value = expect(Tok::Number).number * (negative ? -1.0 : 1.0);
          expect(Tok::Semi);
          if (!params.insert(p.name).second) error(p.pos, "duplicate definition of parameter '" + p.name + "'");
          model.params.push_back(std::move(p));
        } else if (kw.text == "space") {
          const SourcePos pos = kw.pos;
          advance();
          SpaceDecl decl = space_decl();
          if (!accept(Tok::Semi) && toks_[idx_ - 1].kind != Tok::RBrace) fail("expected ';' after space declaration");
          if (have_space) error(pos, "duplicate definition of space");
          have_space = true;
          model.space = std::move(decl);
          model.space_pos = pos;
        } else if (kw.text == "agent") {
          advance();
          AgentDef a = agent_def();
          if (!names.insert(a.name).second) error(a.pos, "duplicate definition of '" + a.name + "'");
          model.agents.push_back(std::move(a));
        } else if (kw.text == "env") {
          advance();
          EnvDef e = env_def();
          if (!names.insert(e.name).second) error(e.pos, "duplicate definition of '" + e.name + "'");
          model.envs.push_back(std::move(e));
        } else if (kw.text == "init") {
          const SourcePos pos = kw.pos;
          advance();
          expect(Tok::Equals);
          std::vector<InitEntry> entries;
          do {
            entries.push_back(init_entry());
          } while (accept(Tok::Bar));
          expect(Tok::Semi);
          if (have_init) error(pos, "duplicate definition of init");
          have_init = true;
          model.init = std::move(entries);
        } else {
          fail("expected 'param', 'space', 'agent', 'env' or 'init'");
        }
      } catch (const Abort&) {
        recover();
      }
    }
    if (!have_space) error(SourcePos{1, 1}, "missing space declaration");
    if (!have_init) error(SourcePos{1, 1}, "missing init declaration");
    if (error_count() > 0) return std::nullopt;
    return model;
  }

 private:
  struct Abort {};

  const Token& cur() const { return toks_[idx_]; }
  const Token& look(std::size_t k) const { return toks_[std::min(idx_ + k, toks_.size() - 1)]; }
  bool at(Tok k) const { return cur().kind == k; }
  bool at_word(std::string_view w) const { return cur().kind == Tok::Ident && cur().text == w; }
  void advance() {
    if (idx_ + 1 < toks_.size()) ++idx_;
  }
  bool accept(Tok k) {
    if (!at(k)) return false;
    advance();
    return true;
  }
  bool accept_word(std::string_view w) {
    if (!at_word(w)) return false;
    advance();
    return true;
  }

  std::size_t error_count() const {
    std::size_t n = 0;
    for (const auto& d : diags_) n += d.severity == Severity::Error;
    return n;
  }

  void error(SourcePos pos, std::string msg) { diags_.push_back({Severity::Error, pos, std::move(msg)}); }

  [[noreturn]] void fail(const std::string& msg) {
    std::string found = at(Tok::End) ? "end of input" : "'" + cur().text + "'";
    error(cur().pos, "syntax error: " + msg + ", found " + found);
    throw Abort{};
  }

  const Token& expect(Tok k) {
    if (!at(k)) fail(std::string("expected ") + describe(k));
    const Token& t = cur();
    advance();
    return t;
  }

  void expect_word(std::string_view w) {
    if (!accept_word(w)) fail("expected '" + std::string(w) + "'");
  }

  std::string name(const char* what) {
    if (!at(Tok::Ident)) fail(std::string("expected ") + what);
    if (is_reserved_word(cur().text)) fail(std::string("reserved word cannot be used as ") + what);
    std::string n = cur().text;
    advance();
    return n;
  }

  int integer() {
    bool negative = accept(Tok::Minus);
    const Token& t = cur();
    if (t.kind != Tok::Number || !t.integral) fail("expected an integer");
    if (t.number > std::numeric_limits<int>::max()) fail("integer out of range");
    advance();
    const int v = static_cast<int>(t.number);
    return negative ? -v : v;
  }

  // Skip to just past the next top-level ';' (or a closing brace that ends
  // a graph block) so later statements still get diagnosed.
  void recover() {
    int depth = 0;
    while (!at(Tok::End)) {
      if (at(Tok::LBrace) || at(Tok::LParen)) ++depth;
      if (at(Tok::RBrace) || at(Tok::RParen)) depth = std::max(0, depth - 1);
      if (at(Tok::Semi) && depth == 0) {
        advance();
        return;
      }
      advance();
    }
  }

  // ---- space ------------------------------------------------------------

  NeighbourhoodSpec space_options(NeighbourhoodSpec spec, int* origin) {
    for (;;) {
      if (accept_word("boundary")) {
        expect(Tok::Equals);
        if (accept_word("periodic")) spec.boundary = Boundary::Periodic;
        else if (accept_word("closed")) spec.boundary = Boundary::Closed;
        else fail("expected 'periodic' or 'closed'");
      } else if (accept_word("neighbourhood") || accept_word("neighborhood")) {
        expect(Tok::Equals);
        if (accept_word("vonneumann")) spec.kind = NeighbourhoodKind::VonNeumann;
        else if (accept_word("moore")) spec.kind = NeighbourhoodKind::Moore;
        else fail("expected 'vonneumann' or 'moore'");
      } else if (origin && accept_word("origin")) {
        expect(Tok::Equals);
        *origin = integer();
      } else {
        return spec;
      }
    }
  }

  GraphSpace graph_body() {
    GraphSpace g;
    expect(Tok::LBrace);
    while (!accept(Tok::RBrace)) {
      const int v = integer();
      expect(Tok::Colon);
      expect(Tok::LBracket);
      std::vector<int> adj;
      if (!at(Tok::RBracket)) {
        do {
          adj.push_back(integer());
        } while (accept(Tok::Comma));
      }
      expect(Tok::RBracket);
      accept(Tok::Semi);
      g.adjacency.emplace_back(v, std::move(adj));
    }
    return g;
  }

  SpaceDecl space_decl() {
    if (accept_word("line")) {
      LineSpace s;
      expect(Tok::LParen);
      s.length = integer();
      expect(Tok::RParen);
      s.neighbourhood = space_options(s.neighbourhood, &s.origin);
      return SpaceDecl{s};
    }
    if (accept_word("grid2d")) {
      Grid2DSpace s;
      expect(Tok::LParen);
      s.width = integer();
      expect(Tok::Comma);
      s.height = integer();
      expect(Tok::RParen);
      s.neighbourhood = space_options(s.neighbourhood, nullptr);
      return SpaceDecl{s};
    }
    if (accept_word("grid3d")) {
      Grid3DSpace s;
      expect(Tok::LParen);
      s.width = integer();
      expect(Tok::Comma);
      s.height = integer();
      expect(Tok::Comma);
      s.depth = integer();
      expect(Tok::RParen);
      s.neighbourhood = space_options(s.neighbourhood, nullptr);
      return SpaceDecl{s};
    }
    if (accept_word("graph")) return SpaceDecl{graph_body()};
    if (accept_word("nested")) {
      expect(Tok::LParen);
      SpaceDecl inner = space_decl();
      expect(Tok::Comma);
      expect_word("graph");
      GraphSpace outer = graph_body();
      expect(Tok::RParen);
      Location entry;
      if (accept_word("entry")) {
        expect(Tok::Equals);
        entry = location_literal();
      } else {
        const int arity = space_arity(inner);
        int zeros[3] = {0, 0, 0};
        if (const auto* line = std::get_if<LineSpace>(&inner.shape)) zeros[0] = line->origin;
        if (const auto* g = std::get_if<GraphSpace>(&inner.shape); g && !g->adjacency.empty())
          zeros[0] = g->adjacency.front().first;
        if (arity < 1 || arity > 2) fail("nested inner space must have one or two coordinates");
        entry = make_location(zeros, static_cast<std::size_t>(arity));
      }
      return SpaceDecl{NestedSpace{std::move(inner), std::move(outer), entry}};
    }
    fail("expected 'line', 'grid2d', 'grid3d', 'graph' or 'nested'");
  }

  Location location_literal() {
    int coords[3];
    std::size_t n = 0;
    if (accept(Tok::LParen)) {
      do {
        if (n == 3) fail("locations have at most 3 coordinates");
        coords[n++] = integer();
      } while (accept(Tok::Comma));
      expect(Tok::RParen);
    } else {
      coords[n++] = integer();
    }
    return make_location(coords, n);
  }

  // ---- coordinates --------------------------------------------------------

  CoordExpr coord_primary() {
    if (at(Tok::Number)) return coord(integer());
    if (at(Tok::Ident) && !is_reserved_word(cur().text)) {
      std::string v = cur().text;
      advance();
      return coord(std::move(v));
    }
    if (accept(Tok::LParen)) {
      CoordExpr e = coord_expr();
      expect(Tok::RParen);
      return e;
    }
    fail("expected a coordinate");
  }

  CoordExpr coord_mul_rest(CoordExpr lhs) {
    for (;;) {
      CoordOp op;
      if (accept(Tok::Star)) op = CoordOp::Mul;
      else if (accept(Tok::Slash)) op = CoordOp::Div;
      else if (accept_word("mod")) op = CoordOp::Mod;
      else return lhs;
      lhs = coord(op, std::move(lhs), coord_primary());
    }
  }

  CoordExpr coord_add_rest(CoordExpr lhs) {
    for (;;) {
      CoordOp op;
      if (accept(Tok::Plus)) op = CoordOp::Add;
      else if (accept(Tok::Minus)) op = CoordOp::Sub;
      else return lhs;
      lhs = coord(op, std::move(lhs), coord_mul_rest(coord_primary()));
    }
  }

  CoordExpr coord_expr() { return coord_add_rest(coord_mul_rest(coord_primary())); }

  // comma separated coordinates forming one location: `x, y, v`
  LocationExpr coord_list() {
    LocationExpr e;
    do {
      if (e.coords.size() == 3) fail("locations have at most 3 coordinates");
      e.coords.push_back(coord_expr());
    } while (accept(Tok::Comma));
    return e;
  }

  // A single location inside a list: a bare coordinate or a parenthesised
  // tuple. `(x+1) mod 2` is a coordinate, `(x, y)` a tuple.
  LocationExpr location_item() {
    if (at(Tok::LParen)) {
      advance();
      CoordExpr first = coord_expr();
      if (accept(Tok::Comma)) {
        LocationExpr e;
        e.coords.push_back(std::move(first));
        do {
          if (e.coords.size() == 3) fail("locations have at most 3 coordinates");
          e.coords.push_back(coord_expr());
        } while (accept(Tok::Comma));
        expect(Tok::RParen);
        return e;
      }
      expect(Tok::RParen);
      LocationExpr e;
      e.coords.push_back(coord_add_rest(coord_mul_rest(std::move(first))));
      return e;
    }
    LocationExpr e;
    e.coords.push_back(coord_expr());
    return e;
  }

  // ---- rates --------------------------------------------------------------

  RateExpr rate_primary() {
    if (at(Tok::Number)) {
      const double v = cur().number;
      advance();
      return num(v);
    }
    if (at(Tok::Hash)) {
      advance();
      CountTerm c;
      c.pos = cur().pos;
      c.agent = name("agent name");
      if (accept(Tok::LParen)) {
        c.where = coord_list();
        expect(Tok::RParen);
      }
      return RateExpr{std::move(c)};
    }
    if (at_word("min") || at_word("max")) {
      const RateOp op = cur().text == "min" ? RateOp::Min : RateOp::Max;
      advance();
      expect(Tok::LParen);
      RateExpr a = rate_expr();
      expect(Tok::Comma);
      RateExpr b = rate_expr();
      expect(Tok::RParen);
      return binary(op, std::move(a), std::move(b));
    }
    if (accept(Tok::LParen)) {
      RateExpr e = rate_expr();
      expect(Tok::RParen);
      return e;
    }
    if (at(Tok::Ident)) {
      ParamRef p;
      p.pos = cur().pos;
      p.name = name("parameter name");
      return RateExpr{std::move(p)};
    }
    fail("expected a rate expression");
  }

  RateExpr rate_term() {
    RateExpr lhs = rate_primary();
    for (;;) {
      RateOp op;
      if (accept(Tok::Star)) op = RateOp::Mul;
      else if (accept(Tok::Slash)) op = RateOp::Div;
      else return lhs;
      lhs = binary(op, std::move(lhs), rate_primary());
    }
  }

  RateExpr rate_expr() {
    RateExpr lhs = rate_term();
    for (;;) {
      RateOp op;
      if (accept(Tok::Plus)) op = RateOp::Add;
      else if (accept(Tok::Minus)) op = RateOp::Sub;
      else return lhs;
      lhs = binary(op, std::move(lhs), rate_term());
    }
  }

  // ---- processes ----------------------------------------------------------

  LocationSetExpr target_set() {
    expect(Tok::LBrace);
    LocationSetExpr s;
    if (accept_word("all")) {
      s.node = AllSet{};
    } else if (accept_word("here")) {
      s.node = HereSet{};
    } else {
      ListSet list;
      do {
        list.items.push_back(location_item());
      } while (accept(Tok::Comma));
      s.node = std::move(list);
    }
    expect(Tok::RBrace);
    return s;
  }

  Mode mode() {
    if (accept(Tok::Dot)) return Mode::Keep;
    if (accept(Tok::Up) || accept_word("up")) return Mode::Create;
    if (accept(Tok::Down) || accept_word("down")) return Mode::Destroy;
    fail("expected '.', 'up' or 'down'");
  }

  DestinationExpr destination() {
    if ((at_word("new") || at_word("new_v")) && look(1).kind == Tok::LParen) {
      NeighbourDest d;
      d.outer = cur().text == "new_v";
      advance();
      advance();
      d.of = coord_list();
      expect(Tok::RParen);
      return DestinationExpr{std::move(d)};
    }
    if (at_word("U") && look(1).kind == Tok::LParen) {
      advance();
      advance();
      UniformDest d;
      do {
        d.items.push_back(location_item());
      } while (accept(Tok::Comma));
      expect(Tok::RParen);
      return DestinationExpr{std::move(d)};
    }
    if (at_word("dist") && look(1).kind == Tok::LParen) {
      advance();
      advance();
      EmpiricalDest d;
      do {
        LocationExpr l = location_item();
        expect(Tok::LBracket);
        RateExpr p = rate_expr();
        expect(Tok::RBracket);
        d.items.emplace_back(std::move(l), std::move(p));
      } while (accept(Tok::Comma));
      expect(Tok::RParen);
      return DestinationExpr{std::move(d)};
    }
    return DestinationExpr{coord_list()};
  }

  Continuation continuation() {
    Continuation c;
    c.pos = cur().pos;
    c.agent = name("continuation agent name");
    expect(Tok::LParen);
    c.dest = destination();
    expect(Tok::RParen);
    return c;
  }

  // (name, value)
  void action_head(ActionSpec& a) {
    expect(Tok::LParen);
    a.name = name("action name");
    expect(Tok::Comma);
    a.value = rate_expr();
    expect(Tok::RParen);
  }

  ProcessTerm summand() {
    Prefix p;
    p.action.pos = cur().pos;
    if (accept(Tok::Arrow)) {
      p.action.kind = ActionKind::Influence;
      p.action.targets = target_set();
      action_head(p.action);
    } else if (accept(Tok::BackArrow)) {
      p.action.kind = ActionKind::Passive;
      action_head(p.action);
    } else if (at(Tok::LParen)) {
      p.action.kind = ActionKind::NoInfluence;
      action_head(p.action);
    } else if (at_word("nil")) {
      fail("'nil' may only appear as a whole agent body");
    } else if (at(Tok::Ident)) {
      ConstantRef r;
      r.pos = cur().pos;
      r.name = name("agent name");
      expect(Tok::LParen);
      r.where = coord_list();
      expect(Tok::RParen);
      return ProcessTerm{std::move(r)};
    } else {
      fail("expected an action prefix");
    }
    p.action.mode = mode();
    p.next = continuation();
    return ProcessTerm{std::move(p)};
  }

  ProcessTerm body() {
    if (accept_word("nil")) return ProcessTerm{Nil{}};
    ProcessTerm first = summand();
    if (!accept(Tok::Plus)) return first;
    return ProcessTerm{Choice{std::move(first), body_rest()}};
  }

  ProcessTerm body_rest() {
    ProcessTerm t = summand();
    if (!accept(Tok::Plus)) return t;
    return ProcessTerm{Choice{std::move(t), body_rest()}};
  }

  AgentDef agent_def() {
    AgentDef a;
    a.pos = cur().pos;
    a.name = name("agent name");
    expect(Tok::LParen);
    do {
      if (a.params.size() == 3) fail("agents have at most 3 location coordinates");
      a.params.push_back(name("location variable"));
    } while (accept(Tok::Comma));
    expect(Tok::RParen);
    expect(Tok::Equals);
    a.body = body();
    expect(Tok::Semi);
    return a;
  }

  EnvDef env_def() {
    EnvDef e;
    e.pos = cur().pos;
    e.name = name("environment factor name");
    expect(Tok::Equals);
    expect(Tok::Arrow);
    e.targets = target_set();
    expect(Tok::LParen);
    e.action = name("action name");
    expect(Tok::Comma);
    e.rate = rate_expr();
    expect(Tok::RParen);
    expect(Tok::Dot);
    e.continuation = name("environment factor name");
    expect(Tok::Semi);
    return e;
  }

  InitEntry init_entry() {
    InitEntry e;
    e.pos = cur().pos;
    e.name = name("agent or environment factor name");
    if (at(Tok::LParen)) {
      advance();
      int coords[3];
      std::size_t n = 0;
      do {
        if (n == 3) fail("locations have at most 3 coordinates");
        coords[n++] = integer();
      } while (accept(Tok::Comma));
      expect(Tok::RParen);
      e.where = make_location(coords, n);
    }
    if (accept(Tok::LBracket)) {
      const SourcePos pos = cur().pos;
      const int m = integer();
      if (m < 1) error(pos, "multiplicity must be a positive integer");
      e.multiplicity = m;
      expect(Tok::RBracket);
    }
    return e;
  }

  std::vector<Token> toks_;
  std::size_t idx_ = 0;
  std::vector<Diagnostic>& diags_;
};

}  // namespace detail

inline ParseResult parse_model(std::string_view text) {
  ParseResult result;
  Lexer lexer(text);
  auto tokens = lexer.run(result.diagnostics);
  detail::Parser parser(std::move(tokens), result.diagnostics);
  auto model = parser.run();
  if (!has_errors(result.diagnostics)) result.model = std::move(model);
  return result;
}

}  // namespace mela
