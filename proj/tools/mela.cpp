#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mela/mela.hpp"

namespace {

namespace fs = std::filesystem;
using mela::Model;

// Usage and I/O problems; exit code 2.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  if (const auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
  std::ofstream f(path, std::ios::binary);
  if (!f || !(f << text)) throw IoError("cannot write '" + path + "'");
}

void print_diagnostics(const std::vector<mela::Diagnostic>& ds, const std::string& file) {
  for (const auto& d : ds) std::cerr << mela::format(d, file) << '\n';
}

Model load(const std::string& path) {
  const auto text = read_file(path);
  auto parsed = mela::parse_model(text);
  if (!parsed.ok()) throw mela::ModelError(std::move(parsed.diagnostics));
  auto model = Model::compile(std::move(*parsed.model));
  print_diagnostics(model.warnings(), path);
  return model;
}

std::vector<double> parse_grid(const std::string& spec) {
  std::vector<double> parts;
  std::stringstream ss(spec);
  for (std::string item; std::getline(ss, item, ':');) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw IoError("invalid grid '" + spec + "', expected start:stop:step");
    }
  }
  if (parts.size() != 3) throw IoError("invalid grid '" + spec + "', expected start:stop:step");
  try {
    return mela::make_grid(parts[0], parts[1], parts[2]);
  } catch (const std::invalid_argument&) {
    throw IoError("invalid grid '" + spec + "'");
  }
}

unsigned thread_count() {
  if (const char* env = std::getenv("MELA_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return static_cast<unsigned>(n);
    } catch (const std::exception&) {
    }
    throw IoError(std::string("invalid MELA_THREADS value '") + env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::string format_state(const Model& m, const mela::SystemState& s) {
  std::string out = "{";
  for (const auto& [k, n] : s.counts) out += (out.size() > 1 ? ", " : "") + m.format(k) + ":" + std::to_string(n);
  for (const auto& [e, n] : s.env) out += (out.size() > 1 ? ", " : "") + m.env(e).name + ":" + std::to_string(n);
  return out + "}";
}

void emit(const std::optional<std::string>& out, const std::string& text) {
  if (out) write_file(*out, text);
  else std::cout << text;
}

struct Common {
  std::string model;
  double t_end = 10.0;
  bool unpaired = false;
};

int cmd_validate(const std::string& path, bool json) {
  const auto text = read_file(path);
  auto parsed = mela::parse_model(text);
  auto diags = parsed.diagnostics;
  if (parsed.ok()) {
    const auto more = mela::validate(*parsed.model);
    diags.insert(diags.end(), more.begin(), more.end());
  }
  const bool ok = !mela::has_errors(diags);
  if (json) {
    nlohmann::json j;
    j["file"] = path;
    j["ok"] = ok;
    j["diagnostics"] = nlohmann::json::array();
    for (const auto& d : diags)
      j["diagnostics"].push_back({{"severity", mela::to_string(d.severity)},
                                  {"line", d.pos.line},
                                  {"column", d.pos.column},
                                  {"message", d.message}});
    std::cout << j.dump(2) << '\n';
  } else {
    print_diagnostics(diags, path);
  }
  return ok ? 0 : 1;
}

struct SimulateArgs {
  std::uint64_t seed = 0;
  std::size_t replicas = 1;
  std::string grid;
  std::optional<std::string> out;
  std::string format = "long";
};

int cmd_simulate(const Common& c, const SimulateArgs& a) {
  const Model model = load(c.model);
  const mela::SemanticsOptions sem{c.unpaired};
  std::ostream& info = a.out ? std::cout : std::cerr;
  if (a.replicas == 1 && a.grid.empty()) {
    const auto tr = mela::ssa_run(model, c.t_end, a.seed, sem);
    std::ostringstream csv;
    if (a.format == "wide") mela::write_trajectory_wide(csv, model, tr);
    else mela::write_trajectory_long(csv, model, tr);
    emit(a.out, csv.str());
    info << "events " << tr.events() << '\n'
         << "time " << mela::format_number(tr.steps.back().time) << (tr.absorbed ? " (absorbed)" : "") << '\n'
         << "final " << format_state(model, tr.steps.back().state) << '\n';
    return 0;
  }
  const auto grid = a.grid.empty() ? mela::make_grid(0.0, c.t_end, c.t_end / 100.0) : parse_grid(a.grid);
  const auto st = mela::simulate_ensemble(model, c.t_end, a.replicas, a.seed, grid, thread_count(), sem);
  std::ostringstream csv;
  mela::write_ensemble(csv, model, st);
  emit(a.out, csv.str());
  info << "replicas " << st.replicas << '\n' << "grid points " << st.grid.size() << '\n' << "final mean {";
  for (std::size_t i = 0; i < model.series_count(); ++i)
    if (st.mean.back()[i] != 0.0)
      info << (i ? " " : "") << model.series_name(i) << ":" << mela::format_number(st.mean.back()[i]);
  info << "}\n";
  return 0;
}

struct OdeArgs {
  double dt = 1e-3;
  std::string method = "rk4";
  std::string grid;
  std::optional<std::string> out;
  std::optional<std::string> channels;
  std::optional<std::string> matrix;
};

int cmd_ode(const Common& c, const OdeArgs& a) {
  const Model model = load(c.model);
  const auto cs = mela::derive_channels(model);
  mela::OdeOptions o;
  o.dt = a.dt;
  o.method = a.method == "dopri" ? mela::OdeMethod::DormandPrince : mela::OdeMethod::RK4;
  const auto grid = a.grid.empty() ? mela::make_grid(0.0, c.t_end, c.t_end / 100.0) : parse_grid(a.grid);
  const auto sol = mela::integrate(cs, grid, o);
  for (const auto& w : sol.warnings) std::cerr << "warning: " << w << '\n';
  std::ostringstream csv;
  mela::write_ode(csv, model, sol);
  emit(a.out, csv.str());
  if (a.channels) write_file(*a.channels, mela::channel_table(cs));
  if (a.matrix) write_file(*a.matrix, mela::matrix_market(mela::stoichiometry(cs), cs));
  (a.out ? std::cout : std::cerr) << "channels " << cs.size() << '\n' << "steps " << sol.steps << '\n';
  return 0;
}

struct EnumerateArgs {
  std::vector<std::string> caps;
  std::optional<std::int64_t> default_cap;
  std::size_t max_states = 100000;
  std::string policy = "truncate";
  std::string out = "ctmc";
};

int cmd_enumerate(const Common& c, const EnumerateArgs& a) {
  const Model model = load(c.model);
  mela::EnumerationOptions o;
  o.default_cap = a.default_cap;
  o.max_states = a.max_states;
  o.policy = a.policy == "error" ? mela::CapPolicy::Error : mela::CapPolicy::Truncate;
  o.semantics.unpaired_influence = c.unpaired;
  for (const auto& cap : a.caps) {
    const auto eq = cap.rfind('=');
    const auto key = eq == std::string::npos ? std::nullopt : model.parse_key(cap.substr(0, eq));
    if (!key) throw IoError("invalid cap '" + cap + "', expected Agent@location=count");
    try {
      o.caps[*key] = std::stoll(cap.substr(eq + 1));
    } catch (const std::exception&) {
      throw IoError("invalid cap '" + cap + "'");
    }
  }
  try {
    const auto ctmc = mela::enumerate_state_space(model, o);
    mela::export_ctmc(model, ctmc, a.out, o);
    std::cout << "states " << ctmc.states.size() << '\n'
              << "transitions " << ctmc.entries.size() << '\n'
              << "truncated " << ctmc.truncated << '\n';
  } catch (const mela::StateSpaceLimitExceeded& e) {
    fs::create_directories(a.out);
    nlohmann::json meta;
    meta["error"] = e.what();
    meta["max_states"] = e.limit;
    meta["explored_states"] = e.explored;
    meta["truncated_transitions"] = e.truncated;
    meta["policy"] = mela::to_string(o.policy);
    write_file((fs::path(a.out) / "meta.json").string(), meta.dump(2) + "\n");
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int cmd_info(const Common& c) {
  const Model model = load(c.model);
  const auto init = mela::initial_state(model);
  std::cout << "space " << mela::print(model.def().space) << '\n'
            << "locations " << model.space().size() << '\n'
            << "agents";
  for (std::size_t i = 0; i < model.agent_count(); ++i) std::cout << ' ' << model.agent(static_cast<int>(i)).name;
  std::cout << "\nenvironment";
  for (std::size_t i = 0; i < model.env_count(); ++i) std::cout << ' ' << model.env(static_cast<int>(i)).name;
  std::cout << "\nparams";
  for (const auto& p : model.def().params) std::cout << ' ' << p.name << '=' << mela::format_number(p.value);
  std::cout << "\nseries " << model.series_count() << '\n'
            << "channels " << mela::derive_channels(model).size() << '\n'
            << "init " << format_state(model, init) << '\n'
            << "enabled " << mela::enabled_transitions(model, init, {c.unpaired}).size() << '\n';
  return 0;
}

int cmd_transitions(const Common& c) {
  const Model model = load(c.model);
  std::cout << mela::transitions_tsv(model,
                                     mela::enabled_transitions(model, mela::initial_state(model), {c.unpaired}));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interpreter for spatial population models: validation, stochastic simulation, fluid ODEs and "
               "explicit CTMC export."};
  app.require_subcommand(1);

  Common common;
  auto add_model = [&](CLI::App* sub) {
    sub->add_option("model", common.model, "Model file")->required();
  };
  auto add_semantics = [&](CLI::App* sub) {
    sub->add_flag("--unpaired-influence", common.unpaired,
                  "Let influence actions with no passive partner fire on their own");
  };
  auto add_t_end = [&](CLI::App* sub) {
    sub->add_option("--t-end", common.t_end, "End time")->default_val(10.0)->check(CLI::PositiveNumber);
  };

  bool json = false;
  auto* validate = app.add_subcommand("validate", "Parse and check a model");
  add_model(validate);
  validate->add_flag("--json", json, "Print diagnostics as JSON on stdout");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Stochastic simulation (Gillespie direct method)");
  add_model(simulate);
  add_t_end(simulate);
  add_semantics(simulate);
  simulate->add_option("--seed", sim.seed, "Random seed; replica r uses seed+r")->default_val(0);
  simulate->add_option("--replicas", sim.replicas, "Number of runs; more than one writes ensemble statistics")
      ->default_val(1)
      ->check(CLI::PositiveNumber);
  simulate->add_option("--grid", sim.grid, "Sample grid start:stop:step (default 0:t-end:t-end/100)");
  simulate->add_option("--out", sim.out, "Output CSV file (default stdout)");
  simulate->add_option("--format", sim.format, "Trajectory layout")
      ->default_val("long")
      ->check(CLI::IsMember({"long", "wide"}));

  OdeArgs ode;
  auto* odecmd = app.add_subcommand("ode", "Integrate the fluid approximation");
  add_model(odecmd);
  add_t_end(odecmd);
  odecmd->add_option("--dt", ode.dt, "Step size (initial step for dopri)")->default_val(1e-3)->check(
      CLI::PositiveNumber);
  odecmd->add_option("--method", ode.method, "Integrator")->default_val("rk4")->check(CLI::IsMember({"rk4", "dopri"}));
  odecmd->add_option("--grid", ode.grid, "Output grid start:stop:step (default 0:t-end:t-end/100)");
  odecmd->add_option("--out", ode.out, "Output CSV file (default stdout)");
  odecmd->add_option("--channels", ode.channels, "Write the channel table (TSV)");
  odecmd->add_option("--emit-matrix", ode.matrix, "Write the stoichiometry matrix (Matrix Market)");

  EnumerateArgs en;
  auto* enumerate = app.add_subcommand("enumerate", "Enumerate the CTMC and export it");
  add_model(enumerate);
  add_semantics(enumerate);
  enumerate->add_option("--cap", en.caps, "Cap for one series, e.g. S@1=10 or 'S@(0,1)=5' (repeatable)");
  enumerate->add_option("--default-cap", en.default_cap, "Cap for series without an explicit cap");
  enumerate->add_option("--max-states", en.max_states, "Abort beyond this many states")->default_val(100000);
  enumerate->add_option("--policy", en.policy, "What to do with transitions exceeding a cap")
      ->default_val("truncate")
      ->check(CLI::IsMember({"truncate", "error"}));
  enumerate->add_option("--out", en.out, "Output directory")->default_val("ctmc");

  auto* info = app.add_subcommand("info", "Summarise a model");
  add_model(info);
  add_semantics(info);

  auto* transitions = app.add_subcommand("transitions", "List transitions enabled in the initial state");
  add_model(transitions);
  add_semantics(transitions);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*validate) return cmd_validate(common.model, json);
    if (*simulate) return cmd_simulate(common, sim);
    if (*odecmd) return cmd_ode(common, ode);
    if (*enumerate) return cmd_enumerate(common, en);
    if (*info) return cmd_info(common);
    if (*transitions) return cmd_transitions(common);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const mela::ModelError& e) {
    print_diagnostics(e.diagnostics(), common.model);
    return 1;
  } catch (const mela::CapExceeded& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const mela::EvalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
