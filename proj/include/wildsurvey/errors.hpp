#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace wildsurvey {

// Error categories map one-to-one onto the CLI exit codes.
enum class ErrorKind {
  validation = 2,           // malformed or inconsistent input, bad config
  planning_impossible = 3,  // no flight can be planned from the inputs
  numeric = 4,              // model failure, non-convergence, undefined statistic
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ErrorKind::validation, what) {}
  ValidationError(const std::string& what, std::vector<std::string> details)
      : Error(ErrorKind::validation, join(what, details)),
        details_(std::move(details)) {}

  const std::vector<std::string>& details() const noexcept { return details_; }

 private:
  static std::string join(const std::string& head,
                          const std::vector<std::string>& lines) {
    std::string out = head;
    for (const auto& l : lines) {
      out += "\n  ";
      out += l;
    }
    return out;
  }

  std::vector<std::string> details_;
};

class PlanningError : public Error {
 public:
  explicit PlanningError(const std::string& what)
      : Error(ErrorKind::planning_impossible, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error(ErrorKind::numeric, what) {}
};

}  // namespace wildsurvey
