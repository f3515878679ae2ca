#ifndef GASJITTER_ERRORS_HPP
#define GASJITTER_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace gasjitter {

// Malformed ingestion document. Carries the 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// A document names a node/pipe that was never declared.
class ReferenceError : public ParseError {
 public:
  ReferenceError(const std::string& kind, const std::string& id, int line = 0)
      : ParseError("unknown " + kind + " reference '" + id + "'", line), id_(id) {}
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

// Bad arguments or a network outside the supported class (unbalanced, cyclic, ...).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A stationary solution does not exist: pressure squared goes negative somewhere.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, const std::string& where = "")
      : std::runtime_error(where.empty() ? what : what + " (at " + where + ")"),
        where_(where) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

// An iterative solver ran out of iterations. Message carries diagnostics.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gasjitter

#endif
