#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "support.hpp"

using namespace mela;

namespace {

std::vector<double> at(const Model& m, std::initializer_list<std::tuple<const char*, Location, double>> entries) {
  std::vector<double> x(m.series_count(), 0.0);
  for (const auto& [name, loc, v] : entries) x[m.series_index(SpeciesKey{m.agent_index(name), loc})] = v;
  return x;
}

std::vector<double> random_point(const Model& m, std::mt19937_64& gen, double hi) {
  std::uniform_real_distribution<double> u(0.5, hi);
  std::vector<double> x(m.series_count());
  for (auto& v : x) v = u(gen);
  return x;
}

std::vector<double> rhs(const ChannelSet& cs, const std::vector<double>& x) { return ode_rhs<double>(cs, x); }

// Jacobian column j by forward-mode differentiation.
std::vector<double> jacobian_column(const ChannelSet& cs, const std::vector<double>& x, std::size_t j) {
  std::vector<Dual> xd(x.begin(), x.end());
  xd[j].d = 1.0;
  std::vector<double> out;
  for (const auto& v : ode_rhs<Dual>(cs, xd)) out.push_back(v.d);
  return out;
}

double lv_invariant(double x, double y) {
  // Pd' = ep x y - dPd x, Pr' = bPr y - ep x y with ep = 0.02.
  return 0.02 * x - 1.0 * std::log(x) + 0.02 * y - 0.5 * std::log(y);
}

}  // namespace

TEST(Channels, SingleLocationSi) {
  const auto m = Model::from_source(test::si_single(100, 1, 0.5));
  const auto cs = derive_channels(m);
  ASSERT_EQ(cs.size(), 4u);
  std::multiset<std::string> actions;
  for (const auto& ch : cs.channels()) actions.insert(ch.label.action);
  EXPECT_EQ(actions, (std::multiset<std::string>{"birth", "contact", "deathI", "deathS"}));
}

TEST(Channels, TwoLocationSi) {
  const auto m = test::corpus("si.mela");
  const auto cs = derive_channels(m);
  EXPECT_EQ(cs.size(), 12u);
  const auto x0 = series_vector(m, initial_state(m));
  std::size_t live = 0;
  for (double r : cs.rates(x0)) live += r > 0.0;
  EXPECT_EQ(live, 9u);
  EXPECT_EQ(live, enabled_transitions(m, initial_state(m)).size());

  const auto S1 = m.series_index(SpeciesKey{m.agent_index("S"), Location(1)});
  const auto S2 = m.series_index(SpeciesKey{m.agent_index("S"), Location(2)});
  const ReactionChannel* move = nullptr;
  for (const auto& ch : cs.channels())
    if (ch.label.action == "moveS" && ch.self == S1) move = &ch;
  ASSERT_NE(move, nullptr);
  std::vector<std::pair<std::size_t, std::int64_t>> want{{S1, -1}, {S2, 1}};
  std::sort(want.begin(), want.end());
  EXPECT_EQ(move->delta, want);
  EXPECT_DOUBLE_EQ(cs.rate(*move, x0), 0.5 * x0[S1]);
}

TEST(Channels, RightHandSideByHand) {
  const auto m = Model::from_source(test::si_single(100, 1, 0.5));
  const auto cs = derive_channels(m);
  const auto x = at(m, {{"S", Location(1), 100.0}, {"I", Location(1), 1.0}});
  const auto dx = rhs(cs, x);
  const auto S = m.series_index(SpeciesKey{m.agent_index("S"), Location(1)});
  const auto I = m.series_index(SpeciesKey{m.agent_index("I"), Location(1)});
  // b S - dS S - c p S I and c p S I - dI I.
  EXPECT_DOUBLE_EQ(dx[S], 10.0 - 10.0 - 25.0);
  EXPECT_DOUBLE_EQ(dx[I], 25.0 - 0.2);
}

TEST(Channels, AgreeWithAggregateSemantics) {
  std::mt19937_64 gen(99);
  for (const char* name : test::kCorpus) {
    const auto m = test::corpus(name);
    const auto cs = derive_channels(m);
    for (int trial = 0; trial < 100; ++trial) {
      SystemState s = initial_state(m);
      s.counts.clear();
      for (std::size_t i = 0; i < m.series_count(); ++i)
        if (gen() % 3 != 0) s.add(m.series_key(i), static_cast<std::int64_t>(gen() % 6));
      const auto x = series_vector(m, s);

      std::map<std::pair<std::string, Delta>, double> from_channels, from_semantics;
      for (const auto& ch : cs.channels()) {
        const double r = cs.rate(ch, x);
        if (r <= 0.0) continue;
        Delta d;
        for (const auto& [i, v] : ch.delta) d.emplace_back(m.series_key(i), v);
        normalize(d);
        from_channels[{ch.label.action, d}] += r;
      }
      for (const auto& t : enabled_transitions(m, s)) from_semantics[{t.label.action, t.delta}] += t.rate;

      ASSERT_EQ(from_channels.size(), from_semantics.size()) << name;
      for (const auto& [k, v] : from_semantics) {
        const auto it = from_channels.find(k);
        ASSERT_NE(it, from_channels.end()) << name << " " << k.first;
        EXPECT_LE(std::abs(it->second - v), 1e-12 * v) << name << " " << k.first;
      }
    }
  }
}

TEST(Stoichiometry, ReconstructsRightHandSide) {
  std::mt19937_64 gen(7);
  for (const char* name : test::kCorpus) {
    const auto m = test::corpus(name);
    const auto cs = derive_channels(m);
    const auto M = stoichiometry(cs);
    ASSERT_EQ(M.rows, m.series_count());
    ASSERT_EQ(M.cols, cs.size());
    for (int trial = 0; trial < 20; ++trial) {
      const auto x = random_point(m, gen, 50.0);
      const auto r = cs.rates(x);
      const auto dx = rhs(cs, x);
      for (std::size_t i = 0; i < M.rows; ++i) {
        double sum = 0.0, scale = 0.0;
        for (std::size_t j = 0; j < M.cols; ++j) {
          sum += static_cast<double>(M.at(i, j)) * r[j];
          scale += std::abs(static_cast<double>(M.at(i, j)) * r[j]);
        }
        EXPECT_LE(std::abs(sum - dx[i]), 1e-12 * std::max(1.0, scale)) << name;
      }
    }
  }
}

TEST(Stoichiometry, MovementColumnsSumToZero) {
  for (const char* text : {test::kMoveLine, test::kMoveGrid}) {
    const auto m = Model::from_source(text);
    const auto cs = derive_channels(m);
    const auto M = stoichiometry(cs);
    for (std::size_t j = 0; j < M.cols; ++j) EXPECT_EQ(M.column_sum(j), 0);
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 20; ++trial) {
      const auto dx = rhs(cs, random_point(m, gen, 20.0));
      double sum = 0.0, scale = 0.0;
      for (double v : dx) {
        sum += v;
        scale += std::abs(v);
      }
      EXPECT_LE(std::abs(sum), 1e-12 * std::max(1.0, scale));
    }
  }
  const auto line = Model::from_source(test::kMoveLine);
  const auto dx = rhs(derive_channels(line), {3.0, 11.0});
  EXPECT_EQ(dx[0] + dx[1], 0.0);
}

TEST(Stoichiometry, MatrixMarketAndTable) {
  const auto m = Model::from_source(test::si_single(10, 1, 0.5));
  const auto cs = derive_channels(m);
  const auto mm = matrix_market(stoichiometry(cs), cs);
  EXPECT_EQ(mm.rfind("%%MatrixMarket matrix coordinate integer general", 0), 0u);
  const auto table = channel_table(cs);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 5);
  EXPECT_EQ(table.substr(0, table.find('\n')), "id\taction\tkind\tsmooth\tdelta\trate");
}

TEST(Jacobian, DualMatchesFiniteDifferences) {
  std::mt19937_64 gen(5);
  std::vector<std::string> texts{test::kLvSingle, test::si_single(50, 5, 0.5)};
  for (const char* name : test::kCorpus) texts.push_back(test::read_text(test::models_dir() + "/" + name));
  for (const auto& text : texts) {
    const auto m = Model::from_source(text);
    const auto cs = derive_channels(m);
    for (int trial = 0; trial < 5; ++trial) {
      const auto x = random_point(m, gen, 30.0);
      for (std::size_t j = 0; j < x.size(); ++j) {
        const double h = 1e-5 * std::max(1.0, std::abs(x[j]));
        auto up = x, down = x;
        up[j] += h;
        down[j] -= h;
        const auto fu = rhs(cs, up), fd = rhs(cs, down);
        const auto col = jacobian_column(cs, x, j);
        for (std::size_t i = 0; i < x.size(); ++i) {
          const double fdiff = (fu[i] - fd[i]) / (2 * h);
          EXPECT_LE(std::abs(fdiff - col[i]), 1e-6 * std::max(1.0, std::abs(col[i])));
        }
      }
    }
  }
}

TEST(Integrate, DieModelMatchesExponential) {
  const auto m = Model::from_source(test::die_model(2.0));
  const auto sol = integrate(m, 3.0, 1e-3, OdeMethod::RK4, 0.25);
  ASSERT_EQ(sol.grid.size(), 13u);
  for (std::size_t g = 0; g < sol.grid.size(); ++g)
    EXPECT_LE(std::abs(sol.values[g][0] - std::exp(-2.0 * sol.grid[g])), 1e-8);
  EXPECT_TRUE(sol.warnings.empty());
}

TEST(Integrate, FourthOrderConvergence) {
  const auto m = Model::from_source(test::die_model(2.0));
  double errors[3];
  const double steps[3] = {0.1, 0.05, 0.025};
  for (int k = 0; k < 3; ++k) errors[k] = std::abs(integrate(m, 1.0, steps[k]).values.back()[0] - std::exp(-2.0));
  EXPECT_GE(std::log2(errors[0] / errors[1]), 3.5);
  EXPECT_GE(std::log2(errors[1] / errors[2]), 3.5);
}

TEST(Integrate, FourthOrderOnSi) {
  const auto cs = derive_channels(test::corpus("si.mela"));
  auto final_state = [&](double dt) {
    OdeOptions o;
    o.dt = dt;
    return integrate(cs, {0.0, 10.0}, o).values.back();
  };
  auto gap = [](const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
  };
  const auto a = final_state(0.2), b = final_state(0.1), c = final_state(0.05), d = final_state(0.025);
  EXPECT_GE(std::log2(gap(a, b) / gap(b, c)), 3.5);
  EXPECT_GE(std::log2(gap(b, c) / gap(c, d)), 3.5);
}

TEST(Integrate, GridIsHitExactly) {
  const auto m = Model::from_source(test::die_model(1.0));
  const auto cs = derive_channels(m);
  OdeOptions o;
  o.dt = 0.3;
  const std::vector<double> grid{0.0, 0.1, 0.7, 1.0};
  const auto a = integrate(cs, grid, o);
  ASSERT_EQ(a.values.size(), grid.size());
  // One classical RK4 step of x' = -x multiplies by the quartic Taylor polynomial.
  auto step = [](double h) { return 1 - h + h * h / 2 - h * h * h / 6 + h * h * h * h / 24; };
  EXPECT_EQ(a.values[0][0], 1.0);
  EXPECT_NEAR(a.values[1][0], step(0.1), 1e-15);
  EXPECT_NEAR(a.values[2][0], step(0.1) * step(0.3) * step(0.3), 1e-15);
  EXPECT_NEAR(a.values[3][0], step(0.1) * step(0.3) * step(0.3) * step(0.3), 1e-15);
}

TEST(Integrate, LotkaVolterraCycles) {
  const auto m = Model::from_source(test::kLvSingle);
  const auto cs = derive_channels(m);
  const auto Pd = m.series_index(SpeciesKey{m.agent_index("Pd"), Location(1)});
  const auto Pr = m.series_index(SpeciesKey{m.agent_index("Pr"), Location(1)});
  OdeOptions o;
  o.dt = 1e-3;
  const auto sol = integrate(cs, make_grid(0.0, 40.0, 1e-3), o);
  const double h0 = lv_invariant(sol.values[0][Pd], sol.values[0][Pr]);

  // Section: predators crossing their equilibrium 50 upwards.
  std::vector<double> times, prey;
  for (std::size_t g = 1; g < sol.grid.size(); ++g) {
    const double a = sol.values[g - 1][Pd] - 50.0, b = sol.values[g][Pd] - 50.0;
    EXPECT_LE(std::abs(lv_invariant(sol.values[g][Pd], sol.values[g][Pr]) - h0), 1e-9);
    if (a < 0.0 && b >= 0.0) {
      const double w = a / (a - b);
      times.push_back(sol.grid[g - 1] + w * (sol.grid[g] - sol.grid[g - 1]));
      prey.push_back(sol.values[g - 1][Pr] + w * (sol.values[g][Pr] - sol.values[g - 1][Pr]));
    }
  }
  ASSERT_GE(times.size(), 3u);
  const double period = times[1] - times[0];
  for (std::size_t k = 1; k + 1 < times.size(); ++k) EXPECT_NEAR(times[k + 1] - times[k], period, 1e-4);
  for (std::size_t k = 1; k < prey.size(); ++k) EXPECT_NEAR(prey[k], prey[0], 1e-4);
  // Small cycles around (50, 25) have period 2 pi / sqrt(bPr dPd); these are larger.
  EXPECT_GT(period, 2 * M_PI / std::sqrt(0.5));
}

TEST(Integrate, AdaptiveAgreesWithRk4) {
  for (const auto& text : {std::string(test::kLvSingle), test::read_text(test::models_dir() + "/si.mela"),
                           test::read_text(test::models_dir() + "/cholera.mela")}) {
    const auto m = Model::from_source(text);
    const auto cs = derive_channels(m);
    const auto grid = make_grid(0.0, 5.0, 0.5);
    OdeOptions rk;
    rk.dt = 1e-3;
    OdeOptions dp;
    dp.method = OdeMethod::DormandPrince;
    dp.dt = 0.01;
    const auto a = integrate(cs, grid, rk), b = integrate(cs, grid, dp);
    for (std::size_t g = 0; g < grid.size(); ++g)
      for (std::size_t i = 0; i < m.series_count(); ++i)
        EXPECT_NEAR(a.values[g][i], b.values[g][i], 1e-6 * std::max(1.0, std::abs(a.values[g][i])));
    EXPECT_LT(b.steps, a.steps);
  }
}

TEST(Integrate, NegativeValuesAreClipped) {
  const auto m = Model::from_source(
      "param k = 1;\nspace line(1);\n"
      "agent A(l) = ->{l}(fight, k) down A(l);\n"
      "agent B(l) = <-(fight, 1) down B(l);\n"
      "init = A(0)[10] | B(0)[10];\n");
  const auto sol = integrate(m, 3.0, 1.0);
  EXPECT_GT(sol.clipped, 0u);
  ASSERT_FALSE(sol.warnings.empty());
  EXPECT_NE(sol.warnings[0].find("clipped negative value"), std::string::npos);
  for (const auto& row : sol.values)
    for (double v : row) EXPECT_GE(v, 0.0);
}

TEST(Integrate, BlowUpIsAnError) {
  const auto m = Model::from_source(
      "param k = 1;\nspace line(1);\n"
      "agent A(l) = ->{l}(grow, k) up A(l) + <-(grow, 1) . A(l);\n"
      "init = A(0)[10];\n");
  EXPECT_THROW(integrate(m, 5.0, 1e-3), EvalError);
  EXPECT_THROW(integrate(m, 5.0, 0.0), std::invalid_argument);
}

TEST(FluidLimit, LinearModelMeanMatchesOde) {
  const auto m = Model::from_source(
      "param lambda = 2;\nspace line(1) origin=1;\nagent A(l) = (die, lambda) down A(l);\ninit = A(1)[100];\n");
  const std::vector<double> grid{0.5};
  const auto st = simulate_ensemble(m, 0.5, 400, 1, grid, 4);
  const double ode = integrate(m, 0.5, 1e-3).values.back()[0];
  EXPECT_NEAR(ode, 100.0 * std::exp(-1.0), 1e-8);
  EXPECT_LT(std::abs(st.mean[0][0] - ode), 4.0 * std::sqrt(st.variance[0][0] / 400.0));
}
