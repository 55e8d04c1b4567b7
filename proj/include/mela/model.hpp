#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mela/ast.hpp"
#include "mela/diagnostics.hpp"
#include "mela/parser.hpp"
#include "mela/space.hpp"
#include "mela/state.hpp"
#include "mela/validate.hpp"

namespace mela {

// A prefix reachable from an agent body, together with the location
// variables it is written against (those of the defining equation it comes
// from, which differ from the owner's when reached through a constant).
struct FlatPrefix {
  const Prefix* prefix = nullptr;
  const std::vector<std::string>* vars = nullptr;
};

struct PassiveSite {
  int agent = 0;
  FlatPrefix site;
};

// Validated model with the lookup tables the semantics needs. Copies are
// cheap and share the underlying definition.
class Model {
 public:
  // Throws ModelError when validation reports errors.
  static Model compile(ModelDef def) {
    auto diags = validate(def);
    if (has_errors(diags)) throw ModelError(std::move(diags));
    Model m;
    m.warnings_ = std::move(diags);
    m.def_ = std::make_shared<const ModelDef>(std::move(def));
    m.space_ = std::make_shared<const Space>(Space::build(m.def_->space));
    m.index();
    return m;
  }

  // Parses and compiles; parse failures are reported as ModelError too.
  static Model from_source(std::string_view text) {
    auto parsed = parse_model(text);
    if (!parsed.ok()) throw ModelError(std::move(parsed.diagnostics));
    return compile(std::move(*parsed.model));
  }

  const ModelDef& def() const { return *def_; }
  const Space& space() const { return *space_; }
  const std::vector<Diagnostic>& warnings() const { return warnings_; }

  std::size_t agent_count() const { return def_->agents.size(); }
  std::size_t env_count() const { return def_->envs.size(); }
  const AgentDef& agent(int i) const { return def_->agents[static_cast<std::size_t>(i)]; }
  const EnvDef& env(int i) const { return def_->envs[static_cast<std::size_t>(i)]; }

  int agent_index(std::string_view name) const {
    auto it = agent_index_.find(std::string(name));
    return it == agent_index_.end() ? -1 : it->second;
  }
  int env_index(std::string_view name) const {
    auto it = env_index_.find(std::string(name));
    return it == env_index_.end() ? -1 : it->second;
  }

  const std::unordered_map<std::string, double>& params() const { return params_; }

  // Prefixes an agent offers: its own summands plus those of constants it
  // references unguarded, in source order.
  const std::vector<FlatPrefix>& prefixes(int agent) const { return prefixes_[static_cast<std::size_t>(agent)]; }

  const std::vector<PassiveSite>& passive_sites(const std::string& action) const {
    static const std::vector<PassiveSite> none;
    auto it = passive_.find(action);
    return it == passive_.end() ? none : it->second;
  }

  // Dense series order: agents in definition order, then locations in space
  // order.
  std::size_t series_count() const { return agent_count() * space_->size(); }
  std::size_t series_index(const SpeciesKey& k) const {
    return static_cast<std::size_t>(k.agent) * space_->size() + *space_->index_of(k.loc);
  }
  SpeciesKey series_key(std::size_t i) const {
    const std::size_t n = space_->size();
    return SpeciesKey{static_cast<int>(i / n), space_->locations()[i % n]};
  }
  std::string series_name(std::size_t i) const { return format(series_key(i)); }

  std::string format(const SpeciesKey& k) const { return agent(k.agent).name + "@" + to_string(k.loc); }

  // Parses "Name@loc" as produced by format().
  std::optional<SpeciesKey> parse_key(std::string_view text) const {
    const auto at = text.find('@');
    if (at == std::string_view::npos) return std::nullopt;
    const int a = agent_index(text.substr(0, at));
    if (a < 0) return std::nullopt;
    for (const auto& l : space_->locations())
      if (to_string(l) == text.substr(at + 1)) return SpeciesKey{a, l};
    return std::nullopt;
  }

 private:
  void flatten(int owner, const AgentDef& def, std::vector<int>& visiting) {
    std::vector<const ProcessTerm*> summands;
    collect_summands(def.body, summands);
    for (const auto* s : summands) {
      if (const auto* p = std::get_if<Prefix>(&s->node)) {
        prefixes_[static_cast<std::size_t>(owner)].push_back(FlatPrefix{p, &def.params});
      } else if (const auto* r = std::get_if<ConstantRef>(&s->node)) {
        const int target = agent_index(r->name);
        bool seen = false;
        for (int v : visiting) seen |= v == target;
        if (seen) continue;  // rejected by validation; guards the recursion
        visiting.push_back(target);
        flatten(owner, agent(target), visiting);
        visiting.pop_back();
      }
    }
  }

  void index() {
    for (const auto& p : def_->params) params_[p.name] = p.value;
    for (std::size_t i = 0; i < def_->agents.size(); ++i) agent_index_[def_->agents[i].name] = static_cast<int>(i);
    for (std::size_t i = 0; i < def_->envs.size(); ++i) env_index_[def_->envs[i].name] = static_cast<int>(i);
    prefixes_.resize(def_->agents.size());
    for (std::size_t i = 0; i < def_->agents.size(); ++i) {
      std::vector<int> visiting{static_cast<int>(i)};
      flatten(static_cast<int>(i), def_->agents[i], visiting);
      for (const auto& fp : prefixes_[i])
        if (fp.prefix->action.kind == ActionKind::Passive)
          passive_[fp.prefix->action.name].push_back(PassiveSite{static_cast<int>(i), fp});
    }
  }

  std::shared_ptr<const ModelDef> def_;
  std::shared_ptr<const Space> space_;
  std::vector<Diagnostic> warnings_;
  std::unordered_map<std::string, int> agent_index_;
  std::unordered_map<std::string, int> env_index_;
  std::unordered_map<std::string, double> params_;
  std::vector<std::vector<FlatPrefix>> prefixes_;
  std::unordered_map<std::string, std::vector<PassiveSite>> passive_;
};

}  // namespace mela
