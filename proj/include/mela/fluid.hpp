#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mela/dual.hpp"
#include "mela/eval.hpp"
#include "mela/model.hpp"
#include "mela/semantics.hpp"
#include "mela/ssa.hpp"

namespace mela {

enum class ChannelKind { Solo, Pair, Env };

inline std::string to_string(ChannelKind k) {
  switch (k) {
    case ChannelKind::Solo: return "solo";
    case ChannelKind::Pair: return "pair";
    case ChannelKind::Env: return "env";
  }
  return "";
}

// One aggregate transition schema with its rate as a function of the
// (continuous) count vector.
struct ReactionChannel {
  std::size_t id = 0;
  ChannelKind kind = ChannelKind::Solo;
  TransitionLabel label;  // value left at 0; it depends on the state
  std::vector<std::pair<std::size_t, std::int64_t>> delta;  // (series, change), sorted, nonzero

  std::size_t self = 0;     // initiator series (solo, pair)
  std::size_t partner = 0;  // passive series (pair, env)
  bool self_pair = false;   // initiator and partner are the same series
  int env = -1;
  double env_count = 0.0;

  FlatPrefix active;
  std::optional<Location> active_dest;
  FlatPrefix passive;
  std::optional<Location> passive_dest;

  bool smooth = true;  // false when a rate uses min/max
  std::string formula;
};

// Channels together with the model they were derived from.
class ChannelSet {
 public:
  ChannelSet(Model model, std::vector<ReactionChannel> channels)
      : model_(std::move(model)), channels_(std::move(channels)) {}

  const Model& model() const { return model_; }
  const std::vector<ReactionChannel>& channels() const { return channels_; }
  std::size_t size() const { return channels_.size(); }
  const ReactionChannel& operator[](std::size_t j) const { return channels_[j]; }

  template <typename T>
  T rate(const ReactionChannel& ch, const std::vector<T>& x) const {
    const Model& m = model_;
    const std::size_t nl = m.space().size();
    auto counts = [&](int agent, const Location* l) -> T {
      const std::size_t base = static_cast<std::size_t>(agent) * nl;
      if (l) return x[base + *m.space().index_of(*l)];
      T sum(0.0);
      for (std::size_t i = 0; i < nl; ++i) sum = sum + x[base + i];
      return sum;
    };
    auto dest_prob = [&](const FlatPrefix& fp, const Binding& b, const std::optional<Location>& where) -> T {
      if (!where) return T(1.0);
      for (const auto& [l, p] : eval_destination<T>(fp.prefix->next.dest, m, b, counts))
        if (l == *where) return p;
      return T(0.0);
    };

    if (ch.kind == ChannelKind::Env) {
      const EnvDef& env = m.env(ch.env);
      const T r = eval_rate_checked<T>(env.rate, m, Binding{}, counts);
      const Binding bq{ch.passive.vars, m.series_key(ch.partner).loc};
      const T p = eval_probability<T>(ch.passive.prefix->action.value, m, bq, counts);
      return env_rate(T(ch.env_count), x[ch.partner], r, p, dest_prob(ch.passive, bq, ch.passive_dest));
    }

    const Binding b{ch.active.vars, m.series_key(ch.self).loc};
    const T r = eval_rate_checked<T>(ch.active.prefix->action.value, m, b, counts);
    if (ch.kind == ChannelKind::Solo) return solo_rate(x[ch.self], r, dest_prob(ch.active, b, ch.active_dest));

    const T mate = ch.self_pair ? x[ch.partner] - T(1.0) : x[ch.partner];
    if (value_of(mate) <= 0.0) return T(0.0);
    const Binding bq{ch.passive.vars, m.series_key(ch.partner).loc};
    const T p = eval_probability<T>(ch.passive.prefix->action.value, m, bq, counts);
    return pair_rate(x[ch.self], mate, r, p, dest_prob(ch.active, b, ch.active_dest),
                     dest_prob(ch.passive, bq, ch.passive_dest));
  }

  template <typename T>
  std::vector<T> rates(const std::vector<T>& x) const {
    std::vector<T> v;
    v.reserve(channels_.size());
    for (const auto& ch : channels_) v.push_back(rate(ch, x));
    return v;
  }

 private:
  Model model_;
  std::vector<ReactionChannel> channels_;
};

namespace detail {

// Locations a destination can name, independent of its probabilities.
inline std::vector<Location> destination_support(const Model& model, const Prefix& p, const Binding& b) {
  std::vector<Location> out;
  if (p.action.mode == Mode::Destroy) return out;
  std::visit(
      [&](const auto& n) {
        using N = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<N, LocationExpr>) {
          out.push_back(eval_location(n, b));
        } else if constexpr (std::is_same_v<N, NeighbourDest>) {
          const Location from = eval_location(n.of, b);
          out = n.outer ? model.space().outer_neighbours(from) : model.space().neighbours(from);
        } else if constexpr (std::is_same_v<N, UniformDest>) {
          for (const auto& item : n.items) out.push_back(eval_location(item, b));
        } else {
          for (const auto& [item, pe] : n.items) out.push_back(eval_location(item, b));
        }
      },
      p.next.dest.node);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// One entry per possible outcome: the continuation location, or none for a
// destroying mode.
inline std::vector<std::optional<Location>> outcome_slots(const Model& model, const Prefix& p, const Binding& b) {
  if (p.action.mode == Mode::Destroy) return {std::nullopt};
  std::vector<std::optional<Location>> out;
  for (const auto& l : destination_support(model, p, b)) out.emplace_back(l);
  return out;
}

inline std::optional<SpeciesKey> slot_key(const Model& model, const Prefix& p, const std::optional<Location>& l) {
  if (!l) return std::nullopt;
  return SpeciesKey{model.agent_index(p.next.agent), *l};
}

inline std::string paren(const std::string& s) { return "(" + s + ")"; }

inline std::string prob_note(const std::optional<Location>& dest, const Prefix& p) {
  if (!dest || std::holds_alternative<LocationExpr>(p.next.dest.node)) return "";
  return " * P[" + to_string(*dest) + "]";
}

}  // namespace detail

// Channels in the same order in which enabled_transitions visits them:
// initiator series, prefix, partner site, partner location, outcomes; then
// environment factors. Channels with an empty delta are dropped.
inline ChannelSet derive_channels(const Model& model) {
  std::vector<ReactionChannel> out;
  const Space& space = model.space();
  const SystemState init = initial_state(model);

  auto push = [&](ReactionChannel ch, const Delta& d) {
    Delta delta = d;
    normalize(delta);
    if (delta.empty()) return;
    for (const auto& [k, v] : delta) ch.delta.emplace_back(model.series_index(k), v);
    std::sort(ch.delta.begin(), ch.delta.end());
    ch.id = out.size();
    out.push_back(std::move(ch));
  };

  for (std::size_t s = 0; s < model.series_count(); ++s) {
    const SpeciesKey key = model.series_key(s);
    for (const auto& fp : model.prefixes(key.agent)) {
      const ActionSpec& a = fp.prefix->action;
      if (a.kind == ActionKind::Passive) continue;
      const Binding b{fp.vars, key.loc};
      const auto mine = detail::outcome_slots(model, *fp.prefix, b);

      if (a.kind == ActionKind::NoInfluence) {
        for (const auto& oa : mine) {
          ReactionChannel ch;
          ch.kind = ChannelKind::Solo;
          ch.label = TransitionLabel{LabelMode{a.mode, std::nullopt}, Influence::None, {}, a.name, 0.0, key.loc};
          ch.self = s;
          ch.active = fp;
          ch.active_dest = oa;
          ch.smooth = !has_min_max(a.value);
          ch.formula = model.format(key) + " * " + detail::paren(print(a.value)) + detail::prob_note(oa, *fp.prefix);
          Delta d;
          add_effect(d, key, a.mode, detail::slot_key(model, *fp.prefix, oa));
          push(std::move(ch), d);
        }
        continue;
      }

      const TargetSet targets = eval_target_set(a.targets, b, space);
      for (const auto& site : model.passive_sites(a.name)) {
        const ActionSpec& pa = site.site.prefix->action;
        const auto& partner_locs = targets.all ? space.locations() : targets.locs;
        for (const auto& lq : partner_locs) {
          const SpeciesKey other{site.agent, lq};
          const Binding bq{site.site.vars, lq};
          const bool same = other == key;
          for (const auto& oa : mine)
            for (const auto& ob : detail::outcome_slots(model, *site.site.prefix, bq)) {
              ReactionChannel ch;
              ch.kind = ChannelKind::Pair;
              ch.label = TransitionLabel{LabelMode{a.mode, pa.mode}, Influence::Target, targets, a.name, 0.0, lq};
              ch.self = s;
              ch.partner = model.series_index(other);
              ch.self_pair = same;
              ch.active = fp;
              ch.active_dest = oa;
              ch.passive = site.site;
              ch.passive_dest = ob;
              ch.smooth = !has_min_max(a.value) && !has_min_max(pa.value);
              ch.formula = model.format(key) + " * " +
                           (same ? detail::paren(model.format(other) + " - 1") : model.format(other)) + " * " +
                           detail::paren(print(a.value)) + " * " + detail::paren(print(pa.value)) +
                           detail::prob_note(oa, *fp.prefix) + detail::prob_note(ob, *site.site.prefix);
              Delta d;
              add_effect(d, key, a.mode, detail::slot_key(model, *fp.prefix, oa));
              add_effect(d, other, pa.mode, detail::slot_key(model, *site.site.prefix, ob));
              push(std::move(ch), d);
            }
        }
      }
    }
  }

  for (const auto& [e, ne] : init.env) {
    const EnvDef& env = model.env(e);
    const TargetSet targets = eval_target_set(env.targets, Binding{}, space);
    for (const auto& site : model.passive_sites(env.action)) {
      const ActionSpec& pa = site.site.prefix->action;
      const auto& partner_locs = targets.all ? space.locations() : targets.locs;
      for (const auto& lq : partner_locs) {
        const SpeciesKey other{site.agent, lq};
        const Binding bq{site.site.vars, lq};
        for (const auto& ob : detail::outcome_slots(model, *site.site.prefix, bq)) {
          ReactionChannel ch;
          ch.kind = ChannelKind::Env;
          ch.label = TransitionLabel{LabelMode{Mode::Keep, pa.mode}, Influence::Target, targets, env.action, 0.0, lq};
          ch.partner = model.series_index(other);
          ch.env = e;
          ch.env_count = static_cast<double>(ne);
          ch.passive = site.site;
          ch.passive_dest = ob;
          ch.smooth = !has_min_max(env.rate) && !has_min_max(pa.value);
          ch.formula = env.name + "[" + std::to_string(ne) + "] * " + model.format(other) + " * " +
                       detail::paren(print(env.rate)) + " * " + detail::paren(print(pa.value)) +
                       detail::prob_note(ob, *site.site.prefix);
          Delta d;
          add_effect(d, other, pa.mode, detail::slot_key(model, *site.site.prefix, ob));
          push(std::move(ch), d);
        }
      }
    }
  }
  return ChannelSet(model, std::move(out));
}

// Sparse stoichiometry matrix: column j is channel j's delta.
struct StoichiometryMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::vector<std::pair<std::size_t, std::int64_t>>> columns;

  std::int64_t at(std::size_t i, std::size_t j) const {
    for (const auto& [r, v] : columns[j])
      if (r == i) return v;
    return 0;
  }
  std::int64_t column_sum(std::size_t j) const {
    std::int64_t s = 0;
    for (const auto& [r, v] : columns[j]) s += v;
    return s;
  }
};

inline StoichiometryMatrix stoichiometry(const ChannelSet& cs) {
  StoichiometryMatrix m;
  m.rows = cs.model().series_count();
  m.cols = cs.size();
  for (const auto& ch : cs.channels()) m.columns.push_back(ch.delta);
  return m;
}

inline std::string matrix_market(const StoichiometryMatrix& m, const ChannelSet& cs) {
  std::ostringstream os;
  std::size_t nnz = 0;
  for (const auto& c : m.columns) nnz += c.size();
  os << "%%MatrixMarket matrix coordinate integer general\n";
  os << "% rows:";
  for (std::size_t i = 0; i < m.rows; ++i) os << ' ' << cs.model().series_name(i);
  os << "\n% columns: channel ids, see the channel table\n";
  os << m.rows << ' ' << m.cols << ' ' << nnz << '\n';
  for (std::size_t j = 0; j < m.cols; ++j)
    for (const auto& [i, v] : m.columns[j]) os << i + 1 << ' ' << j + 1 << ' ' << v << '\n';
  return os.str();
}

inline std::string channel_table(const ChannelSet& cs) {
  std::ostringstream os;
  os << "id\taction\tkind\tsmooth\tdelta\trate\n";
  const Model& m = cs.model();
  for (const auto& ch : cs.channels()) {
    std::string delta;
    for (const auto& [i, v] : ch.delta)
      delta += (delta.empty() ? "" : ",") + m.series_name(i) + ":" + (v > 0 ? "+" : "") + std::to_string(v);
    os << ch.id << '\t' << ch.label.action << '\t' << to_string(ch.kind) << '\t' << (ch.smooth ? "yes" : "no")
       << '\t' << delta << '\t' << ch.formula << '\n';
  }
  return os.str();
}

// dx/dt = M v(x).
template <typename T>
std::vector<T> ode_rhs(const ChannelSet& cs, const std::vector<T>& x) {
  std::vector<T> dx(x.size(), T(0.0));
  for (const auto& ch : cs.channels()) {
    const T r = cs.rate(ch, x);
    for (const auto& [i, v] : ch.delta) dx[i] = dx[i] + T(static_cast<double>(v)) * r;
  }
  return dx;
}

enum class OdeMethod { RK4, DormandPrince };

struct OdeOptions {
  double dt = 1e-3;  // RK4 step; initial step for the adaptive method
  OdeMethod method = OdeMethod::RK4;
  double rtol = 1e-9;
  double atol = 1e-12;
};

struct OdeSolution {
  std::vector<double> grid;
  std::vector<std::vector<double>> values;  // [grid][series]
  std::vector<std::string> warnings;
  std::size_t clipped = 0;
  std::size_t steps = 0;
};

namespace detail {

inline std::vector<double> axpy(const std::vector<double>& x, double h, const std::vector<double>& k) {
  std::vector<double> y(x);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += h * k[i];
  return y;
}

class Integrator {
 public:
  Integrator(const ChannelSet& cs, OdeSolution& sol) : cs_(cs), sol_(sol), warned_(cs.model().series_count(), false) {}

  std::vector<double> f(const std::vector<double>& x) const { return ode_rhs(cs_, x); }

  void rk4(std::vector<double>& x, double& t, double h) {
    const auto k1 = f(x);
    const auto k2 = f(axpy(x, h / 2, k1));
    const auto k3 = f(axpy(x, h / 2, k2));
    const auto k4 = f(axpy(x, h, k3));
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    t += h;
    finish_step(x, t);
  }

  // One Dormand-Prince 5(4) attempt; returns the error norm.
  double dopri(const std::vector<double>& x, double h, std::vector<double>& out, const OdeOptions& o) const {
    static constexpr double a21 = 1.0 / 5, a31 = 3.0 / 40, a32 = 9.0 / 40, a41 = 44.0 / 45, a42 = -56.0 / 15,
                            a43 = 32.0 / 9, a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729, a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656, b1 = 35.0 / 384, b3 = 500.0 / 1113,
                            b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84, e1 = 71.0 / 57600,
                            e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                            e7 = -1.0 / 40;
    const std::size_t n = x.size();
    auto stage = [&](std::initializer_list<std::pair<double, const std::vector<double>*>> terms) {
      std::vector<double> y(x);
      for (const auto& [c, k] : terms)
        for (std::size_t i = 0; i < n; ++i) y[i] += h * c * (*k)[i];
      return y;
    };
    const auto k1 = f(x);
    const auto k2 = f(stage({{a21, &k1}}));
    const auto k3 = f(stage({{a31, &k1}, {a32, &k2}}));
    const auto k4 = f(stage({{a41, &k1}, {a42, &k2}, {a43, &k3}}));
    const auto k5 = f(stage({{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
    const auto k6 = f(stage({{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
    out = stage({{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
    const auto k7 = f(out);
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      const double sc = o.atol + o.rtol * std::max(std::abs(x[i]), std::abs(out[i]));
      err = std::max(err, std::abs(e) / sc);
    }
    return err;
  }

  void finish_step(std::vector<double>& x, double t) {
    ++sol_.steps;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!std::isfinite(x[i]))
        throw EvalError("non-finite value of " + cs_.model().series_name(i) + " at t=" + format_number(t));
      if (x[i] < 0.0) {
        x[i] = 0.0;
        ++sol_.clipped;
        if (!warned_[i]) {
          warned_[i] = true;
          sol_.warnings.push_back("clipped negative value of " + cs_.model().series_name(i) + " to 0 at t=" +
                                  format_number(t));
        }
      }
    }
  }

 private:
  const ChannelSet& cs_;
  OdeSolution& sol_;
  std::vector<bool> warned_;
};

}  // namespace detail

// Integrates from the model's initial state and reports the solution at
// every grid time. Steps are shortened to land exactly on grid points.
inline OdeSolution integrate(const ChannelSet& cs, const std::vector<double>& grid, const OdeOptions& o = {}) {
  if (!(o.dt > 0.0)) throw std::invalid_argument("dt must be positive");
  OdeSolution sol;
  sol.grid = grid;
  detail::Integrator in(cs, sol);
  std::vector<double> x = series_vector(cs.model(), initial_state(cs.model()));
  double t = 0.0;
  double h = o.dt;
  for (const double g : grid) {
    if (g < t) throw std::invalid_argument("grid must be increasing and start at or after 0");
    if (o.method == OdeMethod::RK4) {
      const double span = g - t;
      const auto n = static_cast<std::size_t>(std::ceil(span / o.dt - 1e-9));
      const double step = n ? span / static_cast<double>(n) : 0.0;
      for (std::size_t i = 0; i < n; ++i) in.rk4(x, t, step);
      t = g;
    } else {
      std::vector<double> y;
      while (g - t > 1e-12 * std::max(1.0, std::abs(g))) {
        const double step = std::min(h, g - t);
        const double err = in.dopri(x, step, y, o);
        if (err <= 1.0) {
          x = y;
          t += step;
          in.finish_step(x, t);
        }
        const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        if (step < h && err <= 1.0) continue;
        h = step * factor;
        if (h < 1e-14) throw EvalError("step size underflow at t=" + format_number(t));
      }
      t = g;
    }
    sol.values.push_back(x);
  }
  return sol;
}

inline OdeSolution integrate(const Model& model, double t_end, double dt, OdeMethod method = OdeMethod::RK4,
                             double sample_step = 0.0) {
  if (!(t_end > 0.0)) throw std::invalid_argument("t_end must be positive");
  const auto cs = derive_channels(model);
  OdeOptions o;
  o.dt = dt;
  o.method = method;
  return integrate(cs, sample_step > 0.0 ? make_grid(0.0, t_end, sample_step) : std::vector<double>{0.0, t_end}, o);
}

}  // namespace mela
