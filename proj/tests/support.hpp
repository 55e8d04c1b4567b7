#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mela/mela.hpp"

namespace mela::test {

inline std::string models_dir() { return MELA_MODELS_DIR; }

inline std::string read_text(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline ModelDef parse_or_throw(const std::string& text) {
  auto r = parse_model(text);
  if (!r.ok()) throw ModelError(r.diagnostics);
  return *r.model;
}

inline ModelDef corpus_def(const std::string& name) { return parse_or_throw(read_text(models_dir() + "/" + name)); }
inline Model corpus(const std::string& name) { return Model::compile(corpus_def(name)); }

inline void set_param(ModelDef& def, const std::string& name, double v) {
  for (auto& p : def.params)
    if (p.name == name) {
      p.value = v;
      return;
    }
  throw std::invalid_argument("no parameter " + name);
}

inline const char* const kCorpus[] = {"si.mela", "lv.mela", "cholera.mela", "nested.mela"};

inline std::string die_model(double lambda = 2.0) {
  return "param lambda = " + format_number(lambda) +
         ";\n"
         "space line(1) origin=1;\n"
         "agent A(l) = (die, lambda) down A(l);\n"
         "init = A(1)[1];\n";
}

// SI without space: one location, so the movement prefixes have nowhere to go.
inline std::string si_single(long s0, long i0, double c) {
  return "param b = 0.1;\nparam dS = 0.1;\nparam dI = 0.2;\nparam mS = 0.5;\nparam mI = 0.5;\n"
         "param p = 0.5;\nparam c = " +
         format_number(c) +
         ";\n"
         "space line(1) origin=1;\n"
         "agent S(l) = (birth, b) up S(l) + (deathS, dS) down S(l) + (moveS, mS) . S(new(l))"
         " + <-(contact, p) . I(l);\n"
         "agent I(l) = (deathI, dI) down I(l) + (moveI, mI) . I(new(l)) + ->{l}(contact, c) . I(l);\n"
         "init = S(1)[" +
         std::to_string(s0) + "] | I(1)[" + std::to_string(i0) + "];\n";
}

inline const char* const kMoveLine =
    "param m = 0.7;\n"
    "space line(2) origin=1;\n"
    "agent S(l) = (moveS, m) . S(new(l));\n"
    "init = S(1)[5] | S(2)[3];\n";

inline const char* const kMoveGrid =
    "param m = 0.7;\n"
    "param q = 0.2;\n"
    "space grid2d(3, 3) boundary=closed neighbourhood=moore;\n"
    "agent S(x, y) = (moveS, m) . S(new(x, y)) + (turn, q) . T(x, y);\n"
    "agent T(x, y) = (moveT, m) . T(new(x, y)) + (turn, q) . S(x, y);\n"
    "init = S(0, 0)[4] | T(1, 1)[3] | S(2, 1)[2];\n";

inline const char* const kLvSingle =
    "param bPr = 1.0;\nparam dPd = 0.5;\nparam e = 0.04;\nparam p = 0.5;\nparam m = 0.3;\n"
    "space line(1) origin=1;\n"
    "agent Pd(v) = (movePd, m) . Pd(new(v)) + (deathPd, dPd) down Pd(v) + ->{v}(eat, e) up Pd(v);\n"
    "agent Pr(v) = (movePr, m) . Pr(new(v)) + (birthPr, bPr) up Pr(v) + <-(eat, p) down Pr(v);\n"
    "init = Pd(1)[20] | Pr(1)[40];\n";

inline std::filesystem::path tmp_dir(const std::string& name) {
  auto p = std::filesystem::path(MELA_TMP_DIR) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace mela::test
