#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "mela/fluid.hpp"
#include "mela/model.hpp"
#include "mela/printer.hpp"
#include "mela/ssa.hpp"

namespace mela {

// CSV cells holding locations are quoted since tuples contain commas.
inline std::string csv_location(const Location& l) {
  const std::string s = to_string(l);
  return l.arity > 1 ? "\"" + s + "\"" : s;
}

// Long form: one row per (step, series) with a nonzero count, plus a row for
// every series that dropped to zero at that step.
inline void write_trajectory_long(std::ostream& os, const Model& model, const Trajectory& tr) {
  os << "time,agentState,location,count\n";
  const SystemState* prev = nullptr;
  for (const auto& step : tr.steps) {
    for (std::size_t i = 0; i < model.series_count(); ++i) {
      const SpeciesKey k = model.series_key(i);
      const auto n = step.state.count(k);
      if (n == 0 && (!prev || prev->count(k) == 0)) continue;
      os << format_number(step.time) << ',' << model.agent(k.agent).name << ',' << csv_location(k.loc) << ',' << n
         << '\n';
    }
    prev = &step.state;
  }
}

// Wide form: one column per series.
inline void write_trajectory_wide(std::ostream& os, const Model& model, const Trajectory& tr) {
  os << "time";
  for (std::size_t i = 0; i < model.series_count(); ++i) os << ",\"" << model.series_name(i) << '"';
  os << '\n';
  for (const auto& step : tr.steps) {
    os << format_number(step.time);
    for (std::size_t i = 0; i < model.series_count(); ++i) os << ',' << step.state.count(model.series_key(i));
    os << '\n';
  }
}

inline void write_ensemble(std::ostream& os, const Model& model, const EnsembleStats& st) {
  os << "time,series,mean,variance\n";
  for (std::size_t g = 0; g < st.grid.size(); ++g)
    for (std::size_t i = 0; i < model.series_count(); ++i)
      os << format_number(st.grid[g]) << ",\"" << model.series_name(i) << "\"," << format_number(st.mean[g][i]) << ','
         << format_number(st.variance[g][i]) << '\n';
}

inline void write_ode(std::ostream& os, const Model& model, const OdeSolution& sol) {
  os << "time,series,value\n";
  for (std::size_t g = 0; g < sol.grid.size(); ++g)
    for (std::size_t i = 0; i < model.series_count(); ++i)
      os << format_number(sol.grid[g]) << ",\"" << model.series_name(i) << "\"," << format_number(sol.values[g][i])
         << '\n';
}

}  // namespace mela
