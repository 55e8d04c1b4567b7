#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace mela;

namespace {

bool mentions(const std::vector<Diagnostic>& ds, const std::string& needle) {
  for (const auto& d : ds)
    if (d.message.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST(Parser, SiModel) {
  const auto def = test::corpus_def("si.mela");
  EXPECT_EQ(def.agents.size(), 2u);
  EXPECT_EQ(def.envs.size(), 0u);
  ASSERT_EQ(def.init.size(), 3u);
  EXPECT_EQ(def.init[0].name, "S");
  EXPECT_EQ(def.init[0].where, Location(1));
  EXPECT_EQ(def.init[0].multiplicity, 2);
  EXPECT_EQ(def.init[1].where, Location(2));
  EXPECT_EQ(def.init[1].multiplicity, 1);
  EXPECT_EQ(def.init[2].name, "I");
  EXPECT_EQ(def.init[2].multiplicity, 1);
}

TEST(Parser, NilBody) {
  const auto r = parse_model("space graph { 1: []; }\nagent A(l) = nil;\ninit = A(1)[1];\n");
  ASSERT_TRUE(r.ok());
  ASSERT_EQ(r.model->agents.size(), 1u);
  EXPECT_TRUE(std::holds_alternative<Nil>(r.model->agents[0].body.node));
  EXPECT_TRUE(validate(*r.model).empty());
}

TEST(Parser, CholeraModel) {
  const auto def = test::corpus_def("cholera.mela");
  EXPECT_EQ(def.agents.size(), 3u);
  ASSERT_EQ(def.envs.size(), 1u);
  const auto& e = def.envs[0];
  EXPECT_EQ(e.action, "contactE");
  const auto& list = std::get<ListSet>(e.targets.node);
  ASSERT_EQ(list.items.size(), 2u);
  EXPECT_EQ(list.items[0], loc_expr(Location(0, 0)));
  EXPECT_EQ(list.items[1], loc_expr(Location(0, 1)));
}

TEST(Parser, UnicodeOperators) {
  const auto r = parse_model(
      "param r = 1;\nspace line(2);\n"
      "agent A(l) = (grow, r)↑A(l) + (die, r)↓A(l) + →{l}(hit, r).A(l) + ←(hit, 0.5).A(l);\n"
      "init = A(0)[2] ∥ A(1);\n");
  ASSERT_TRUE(r.ok()) << (r.diagnostics.empty() ? "" : format(r.diagnostics[0]));
  const auto ascii = parse_model(
      "param r = 1;\nspace line(2);\n"
      "agent A(l) = (grow, r) up A(l) + (die, r) down A(l) + ->{l}(hit, r) . A(l) + <-(hit, 0.5) . A(l);\n"
      "init = A(0)[2] | A(1)[1];\n");
  ASSERT_TRUE(ascii.ok());
  EXPECT_EQ(*r.model, *ascii.model);
}

TEST(Parser, LexicalError) {
  const auto r = parse_model("param a = 1;\nspace line(2);\nagent A(l) = (x, a) . A(l) $;\ninit = A(0);\n");
  ASSERT_FALSE(r.ok());
  EXPECT_TRUE(mentions(r.diagnostics, "lexical error"));
  EXPECT_EQ(r.diagnostics[0].pos.line, 3);
  EXPECT_EQ(r.diagnostics[0].pos.column, 28);
}

TEST(Parser, SyntaxErrorHasPosition) {
  const auto r = parse_model("space line(2);\nagent A(l) = (x, 1) A(l);\ninit = A(0);\n");
  ASSERT_FALSE(r.ok());
  EXPECT_TRUE(mentions(r.diagnostics, "syntax error"));
  EXPECT_EQ(r.diagnostics[0].pos.line, 2);
}

TEST(Parser, RecoversAndReportsSeveralErrors) {
  const auto r = parse_model("space line(2);\nagent A(l) = (x 1) . A(l);\nagent B(l) = (y, ) . B(l);\ninit = A(0);\n");
  ASSERT_FALSE(r.ok());
  EXPECT_GE(r.diagnostics.size(), 2u);
}

TEST(Parser, DuplicateDefinitions) {
  EXPECT_TRUE(mentions(parse_model("param a = 1;\nparam a = 2;\nspace line(1);\nagent A(l) = nil;\ninit = A(0);\n")
                           .diagnostics,
                       "duplicate definition"));
  EXPECT_TRUE(
      mentions(parse_model("space line(1);\nagent A(l) = nil;\nagent A(l) = nil;\ninit = A(0);\n").diagnostics,
               "duplicate definition"));
  EXPECT_TRUE(mentions(parse_model("space line(1);\nspace line(2);\nagent A(l) = nil;\ninit = A(0);\n").diagnostics,
                       "duplicate definition"));
}

TEST(Parser, MissingSections) {
  EXPECT_TRUE(mentions(parse_model("agent A(l) = nil;\ninit = A(0);\n").diagnostics, "missing space"));
  EXPECT_TRUE(mentions(parse_model("space line(1);\nagent A(l) = nil;\n").diagnostics, "missing init"));
}

TEST(Parser, NilOnlyAsWholeBody) {
  EXPECT_FALSE(parse_model("space line(1);\nagent A(l) = nil + (a, 1) . A(l);\ninit = A(0);\n").ok());
}

TEST(Parser, ChoiceNestsRight) {
  const auto def = test::parse_or_throw(
      "space line(1);\nagent A(l) = (a, 1) . A(l) + (b, 1) . A(l) + (c, 1) . A(l);\ninit = A(0);\n");
  const auto& top = std::get<Choice>(def.agents[0].body.node);
  EXPECT_TRUE(std::holds_alternative<Prefix>(top.left->node));
  EXPECT_TRUE(std::holds_alternative<Choice>(top.right->node));
}

TEST(Parser, ModuloVersusTuple) {
  const auto def = test::parse_or_throw(
      "space grid2d(2, 2);\n"
      "agent A(x, y) = (a, 1) . A(U(((x + 1) mod 2, y), (x, (y + 1) mod 2)));\n"
      "init = A(0, 0);\n");
  const auto& p = std::get<Prefix>(def.agents[0].body.node);
  const auto& u = std::get<UniformDest>(p.next.dest.node);
  ASSERT_EQ(u.items.size(), 2u);
  EXPECT_EQ(u.items[0].coords.size(), 2u);
  const auto& first = std::get<CoordBinary>(u.items[0].coords[0].node);
  EXPECT_EQ(first.op, CoordOp::Mod);
}

TEST(Printer, CorpusRoundTrip) {
  for (const char* name : test::kCorpus) {
    const auto def = test::corpus_def(name);
    const auto again = parse_model(print(def));
    ASSERT_TRUE(again.ok()) << name;
    EXPECT_EQ(*again.model, def) << name;
    EXPECT_EQ(print(*again.model), print(def)) << name;
  }
}

TEST(Printer, PrecedenceIsPreserved) {
  const auto def = test::parse_or_throw(
      "param a = 1;\nparam b = 2;\nspace line(3);\n"
      "agent A(l) = (x, a - (b - 1)) . A(l) + (y, (a + b) * 2 / (a / b)) . A((l + 1) mod 3)"
      " + (z, min(a, #A(l) * 0.5) + max(#A, 1e-3)) . A(l - (l - 1));\n"
      "init = A(0);\n");
  const auto text = print(def);
  EXPECT_EQ(test::parse_or_throw(text), def) << text;
}

TEST(EvalRate, Examples) {
  const auto m = Model::from_source(test::read_text(test::models_dir() + "/si.mela"));
  const int S = m.agent_index("S"), I = m.agent_index("I");
  SystemState s;
  s.add(SpeciesKey{S, Location(1)}, 2);
  EXPECT_EQ(eval_rate_expr(m, num(0.3), s), 0.3);
  EXPECT_EQ(eval_rate_expr(m, binary(RateOp::Mul, count("S", loc_expr(Location(1))), num(0.5)), s), 1.0);
  s.add(SpeciesKey{I, Location(1)}, 1);
  const auto ratio =
      binary(RateOp::Div, count("I", loc_expr(Location(1))),
             binary(RateOp::Add, count("S", loc_expr(Location(1))), count("I", loc_expr(Location(1)))));
  EXPECT_DOUBLE_EQ(eval_rate_expr(m, ratio, s), 1.0 / 3.0);
  EXPECT_EQ(eval_rate_expr(m, ratio, s), eval_rate_expr(m, ratio, s));
  EXPECT_EQ(eval_rate_expr(m, count("S"), s), 2.0);
  EXPECT_EQ(eval_rate_expr(m, count("S", loc_expr(Location(2))), s), 0.0);
}

TEST(EvalRate, Errors) {
  const auto m = Model::from_source(test::read_text(test::models_dir() + "/si.mela"));
  SystemState empty;
  EXPECT_THROW(eval_rate_expr(m, binary(RateOp::Div, num(1), count("S", loc_expr(Location(1)))), empty), EvalError);
  EXPECT_THROW(eval_rate_expr(m, binary(RateOp::Sub, num(1), num(2)), empty), EvalError);
  EXPECT_THROW(eval_rate_expr(m, binary(RateOp::Mul, num(1e308), num(1e308)), empty), EvalError);
}

// Random well-formed models: print, parse again, compare.
namespace {

struct Gen {
  std::mt19937_64 rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}
  int pick(int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); }
  bool coin() { return pick(2) == 0; }

  double number() {
    switch (pick(4)) {
      case 0: return pick(10);
      case 1: return pick(1000) / 1000.0;
      case 2: return std::ldexp(static_cast<double>(rng() >> 11), -53 + pick(8));
      default: return std::pow(10.0, pick(10) - 5) * (1 + pick(9));
    }
  }

  CoordExpr coord_expr(const std::vector<std::string>& vars, int depth) {
    if (depth <= 0 || pick(3) == 0) return coin() ? coord(vars[static_cast<std::size_t>(pick(static_cast<int>(vars.size())))]) : coord(pick(5));
    static const CoordOp ops[] = {CoordOp::Add, CoordOp::Sub, CoordOp::Mul, CoordOp::Div, CoordOp::Mod};
    return coord(ops[pick(5)], coord_expr(vars, depth - 1), coord_expr(vars, depth - 1));
  }

  LocationExpr location(const std::vector<std::string>& vars) {
    LocationExpr l;
    for (std::size_t i = 0; i < vars.size(); ++i) l.coords.push_back(coord_expr(vars, 2));
    return l;
  }

  RateExpr rate(const std::vector<std::string>& params, const std::vector<std::string>& agents,
                const std::vector<std::string>& vars, int depth) {
    if (depth <= 0 || pick(3) == 0) {
      switch (pick(vars.empty() ? 3 : 4)) {
        case 0: return num(number());
        case 1: return param(params[static_cast<std::size_t>(pick(static_cast<int>(params.size())))]);
        case 2: return count(agents[static_cast<std::size_t>(pick(static_cast<int>(agents.size())))]);
        default: return count(agents[static_cast<std::size_t>(pick(static_cast<int>(agents.size())))], location(vars));
      }
    }
    static const RateOp ops[] = {RateOp::Add, RateOp::Sub, RateOp::Mul, RateOp::Div, RateOp::Min, RateOp::Max};
    return binary(ops[pick(6)], rate(params, agents, vars, depth - 1), rate(params, agents, vars, depth - 1));
  }

  ProcessTerm body(const std::vector<std::string>& params, const std::vector<std::string>& agents,
                   const std::vector<std::string>& vars, bool nested) {
    const int n = 1 + pick(4);
    std::vector<ProcessTerm> summands;
    for (int i = 0; i < n; ++i) {
      Prefix p;
      p.action.name = "act" + std::to_string(pick(4));
      p.action.kind = static_cast<ActionKind>(pick(3));
      p.action.mode = static_cast<Mode>(pick(3));
      p.action.value = rate(params, agents, vars, 2);
      if (p.action.kind == ActionKind::Influence) {
        switch (pick(3)) {
          case 0: p.action.targets.node = HereSet{}; break;
          case 1: p.action.targets.node = AllSet{}; break;
          default: {
            ListSet ls;
            for (int k = 0, m = 1 + pick(3); k < m; ++k) ls.items.push_back(location(vars));
            p.action.targets.node = ls;
          }
        }
      }
      p.next.agent = agents[static_cast<std::size_t>(pick(static_cast<int>(agents.size())))];
      switch (pick(nested ? 5 : 4)) {
        case 0: p.next.dest.node = location(vars); break;
        case 1: p.next.dest.node = NeighbourDest{location(vars), false}; break;
        case 2: {
          UniformDest u;
          for (int k = 0, m = 1 + pick(3); k < m; ++k) u.items.push_back(location(vars));
          p.next.dest.node = u;
          break;
        }
        case 3: {
          EmpiricalDest e;
          for (int k = 0, m = 1 + pick(3); k < m; ++k) e.items.emplace_back(location(vars), rate(params, agents, vars, 1));
          p.next.dest.node = e;
          break;
        }
        default: p.next.dest.node = NeighbourDest{location(vars), true};
      }
      summands.push_back(ProcessTerm{p});
    }
    if (pick(4) == 0) {
      summands.push_back(ProcessTerm{ConstantRef{agents[0], location(vars), {}}});
    }
    ProcessTerm t = summands.back();
    for (auto it = summands.rbegin() + 1; it != summands.rend(); ++it) t = ProcessTerm{Choice{*it, t}};
    return t;
  }

  ModelDef model() {
    ModelDef m;
    std::vector<std::string> params, agents;
    for (int i = 0, n = 1 + pick(4); i < n; ++i) {
      params.push_back("k" + std::to_string(i));
      m.params.push_back(ParamDef{params.back(), number(), {}});
    }
    const int shape = pick(5);
    std::vector<std::string> vars;
    const NeighbourhoodSpec nb{coin() ? NeighbourhoodKind::VonNeumann : NeighbourhoodKind::Moore,
                               coin() ? Boundary::Periodic : Boundary::Closed};
    GraphSpace g{{{1, {2}}, {2, {1, 3}}, {3, {}}}};
    switch (shape) {
      case 0: m.space.shape = LineSpace{1 + pick(5), pick(3), nb}; vars = {"l"}; break;
      case 1: m.space.shape = Grid2DSpace{1 + pick(4), 1 + pick(4), nb}; vars = {"x", "y"}; break;
      case 2: m.space.shape = Grid3DSpace{1 + pick(3), 1 + pick(3), 1 + pick(3), nb}; vars = {"x", "y", "z"}; break;
      case 3: m.space.shape = g; vars = {"v"}; break;
      default:
        m.space.shape = NestedSpace{SpaceDecl{Grid2DSpace{2, 2, nb}}, g, Location(pick(2), pick(2))};
        vars = {"x", "y", "v"};
    }
    for (int i = 0, n = 1 + pick(3); i < n; ++i) agents.push_back("Ag" + std::to_string(i));
    for (const auto& a : agents)
      m.agents.push_back(AgentDef{a, vars, pick(8) == 0 ? ProcessTerm{Nil{}} : body(params, agents, vars, shape == 4), {}});
    if (coin()) {
      EnvDef e;
      e.name = "Env";
      e.action = "act" + std::to_string(pick(4));
      e.rate = rate(params, agents, {}, 1);
      e.continuation = "Env";
      if (coin()) {
        e.targets.node = AllSet{};
      } else {
        ListSet ls;
        ls.items.push_back(LocationExpr{std::vector<CoordExpr>(vars.size(), coord(1))});
        e.targets.node = ls;
      }
      m.envs.push_back(e);
      m.init.push_back(InitEntry{"Env", std::nullopt, 1 + pick(3), {}});
    }
    for (int i = 0, n = 1 + pick(3); i < n; ++i) {
      int c[3] = {pick(2), pick(2), 1 + pick(2)};
      m.init.push_back(InitEntry{agents[static_cast<std::size_t>(pick(static_cast<int>(agents.size())))],
                                 make_location(c, vars.size()), 1 + pick(50), {}});
    }
    return m;
  }
};

}  // namespace

TEST(PrinterProperty, RandomModelsRoundTrip) {
  Gen gen(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const ModelDef m = gen.model();
    const auto text = print(m);
    const auto r = parse_model(text);
    ASSERT_TRUE(r.ok()) << text << "\n" << (r.diagnostics.empty() ? "" : format(r.diagnostics[0]));
    ASSERT_EQ(*r.model, m) << text;
  }
}
