#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "mela/model.hpp"
#include "mela/rng.hpp"
#include "mela/semantics.hpp"

namespace mela {

struct TrajectoryStep {
  double time = 0.0;
  SystemState state;
  std::optional<TransitionLabel> label;  // empty for the initial entry
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  std::uint64_t seed = 0;
  double t_end = 0.0;
  bool absorbed = false;
  std::size_t events() const { return steps.empty() ? 0 : steps.size() - 1; }
};

struct SsaSummary {
  std::size_t events = 0;
  bool absorbed = false;
  double last_time = 0.0;
  SystemState final_state;
};

// Gillespie direct method. `observe(time, state, fired)` is called for the
// initial state (fired == nullptr) and after every event.
template <typename Observer>
SsaSummary run_ssa(const Model& model, double t_end, std::uint64_t seed, Observer&& observe,
                   const SemanticsOptions& options = {}) {
  if (!(t_end > 0.0)) throw std::invalid_argument("t_end must be positive");
  Rng rng(seed);
  SsaSummary out;
  SystemState state = initial_state(model);
  double t = 0.0;
  observe(t, state, static_cast<const AggregateTransition*>(nullptr));
  for (;;) {
    const auto ts = enabled_transitions(model, state, options);
    double total = 0.0;
    for (const auto& tr : ts) total += tr.rate;
    if (ts.empty() || total <= 0.0) {
      out.absorbed = true;
      break;
    }
    const double tau = rng.exponential(total);
    const double target = rng.uniform01() * total;
    if (t + tau > t_end) break;
    std::size_t pick = ts.size() - 1;
    double acc = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      acc += ts[i].rate;
      if (target < acc) {
        pick = i;
        break;
      }
    }
    t += tau;
    state.apply(ts[pick].delta);
    ++out.events;
    observe(t, state, &ts[pick]);
  }
  out.last_time = t;
  out.final_state = std::move(state);
  return out;
}

inline Trajectory ssa_run(const Model& model, double t_end, std::uint64_t seed, const SemanticsOptions& options = {}) {
  Trajectory tr;
  tr.seed = seed;
  tr.t_end = t_end;
  const auto summary = run_ssa(
      model, t_end, seed,
      [&](double t, const SystemState& s, const AggregateTransition* fired) {
        tr.steps.push_back(TrajectoryStep{t, s, fired ? std::optional(fired->label) : std::nullopt});
      },
      options);
  tr.absorbed = summary.absorbed;
  return tr;
}

// Sample times a:b:step, inclusive of b up to rounding.
inline std::vector<double> make_grid(double start, double stop, double step) {
  if (!(step > 0.0) || stop < start) throw std::invalid_argument("invalid grid");
  std::vector<double> g;
  const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) g.push_back(start + static_cast<double>(i) * step);
  return g;
}

// Dense count vector in the model's series order.
inline std::vector<double> series_vector(const Model& model, const SystemState& s) {
  std::vector<double> v(model.series_count(), 0.0);
  for (const auto& [k, n] : s.counts) v[model.series_index(k)] = static_cast<double>(n);
  return v;
}

// Samples[g][series] taken as the last state at or before grid[g].
inline std::vector<std::vector<double>> sample_on_grid(const Model& model, double t_end, std::uint64_t seed,
                                                       const std::vector<double>& grid,
                                                       const SemanticsOptions& options = {}) {
  std::vector<std::vector<double>> out;
  out.reserve(grid.size());
  std::vector<double> current;
  run_ssa(
      model, t_end, seed,
      [&](double t, const SystemState& s, const AggregateTransition*) {
        while (!current.empty() && out.size() < grid.size() && grid[out.size()] < t) out.push_back(current);
        current = series_vector(model, s);
      },
      options);
  while (out.size() < grid.size()) out.push_back(current);
  return out;
}

struct EnsembleStats {
  std::vector<double> grid;
  std::vector<std::vector<double>> mean;      // [grid][series]
  std::vector<std::vector<double>> variance;  // unbiased; 0 for a single replica
  std::size_t replicas = 0;
};

// Replica r runs with replica_seed(base, r); results are merged in replica
// order so the statistics do not depend on the thread count.
inline EnsembleStats simulate_ensemble(const Model& model, double t_end, std::size_t replicas, std::uint64_t base_seed,
                                       const std::vector<double>& grid, unsigned threads = 1,
                                       const SemanticsOptions& options = {}) {
  if (replicas < 1) throw std::invalid_argument("replicas must be at least 1");
  std::vector<std::vector<std::vector<double>>> runs(replicas);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t r; (r = next.fetch_add(1)) < replicas && !failed;) {
      try {
        runs[r] = sample_on_grid(model, t_end, replica_seed(base_seed, r), grid, options);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(replicas)));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);

  const std::size_t k = model.series_count();
  EnsembleStats st;
  st.grid = grid;
  st.replicas = replicas;
  st.mean.assign(grid.size(), std::vector<double>(k, 0.0));
  st.variance.assign(grid.size(), std::vector<double>(k, 0.0));
  for (std::size_t g = 0; g < grid.size(); ++g)
    for (std::size_t s = 0; s < k; ++s) {
      double mean = 0.0, m2 = 0.0;
      for (std::size_t r = 0; r < replicas; ++r) {
        const double x = runs[r][g][s];
        const double d = x - mean;
        mean += d / static_cast<double>(r + 1);
        m2 += d * (x - mean);
      }
      st.mean[g][s] = mean;
      st.variance[g][s] = replicas > 1 ? m2 / static_cast<double>(replicas - 1) : 0.0;
    }
  return st;
}

}  // namespace mela
