#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mela {

// Source position of an AST node. Positions never take part in structural
// equality, so a re-parsed pretty-print compares equal to the original.
struct SourcePos {
  int line = 0;
  int column = 0;
  friend constexpr bool operator==(const SourcePos&, const SourcePos&) { return true; }
};

enum class Severity { Error, Warning };

struct Diagnostic {
  Severity severity = Severity::Error;
  SourcePos pos;
  std::string message;
};

inline const char* to_string(Severity s) { return s == Severity::Error ? "error" : "warning"; }

inline std::string format(const Diagnostic& d, const std::string& file = {}) {
  std::string out = file.empty() ? std::string{} : file + ":";
  out += std::to_string(d.pos.line) + ":" + std::to_string(d.pos.column) + ": ";
  out += to_string(d.severity);
  out += ": " + d.message;
  return out;
}

inline bool has_errors(const std::vector<Diagnostic>& ds) {
  for (const auto& d : ds)
    if (d.severity == Severity::Error) return true;
  return false;
}

// Runtime evaluation failure (rate expressions, destinations, target sets).
class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A model that cannot be compiled because validation reported errors.
class ModelError : public std::runtime_error {
 public:
  explicit ModelError(std::vector<Diagnostic> diagnostics)
      : std::runtime_error(summary(diagnostics)), diagnostics_(std::move(diagnostics)) {}

  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  static std::string summary(const std::vector<Diagnostic>& ds) {
    for (const auto& d : ds)
      if (d.severity == Severity::Error) return format(d);
    return "invalid model";
  }
  std::vector<Diagnostic> diagnostics_;
};

// Violation of an internal invariant, e.g. a delta driving a count negative.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace mela
