#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sckpd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// All library failures derive from Error so callers (the CLI in particular)
// can map them onto a single machine-readable error record.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string &message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string &kind() const { return kind_; }

 private:
  std::string kind_;
};

struct DimensionError : Error {
  explicit DimensionError(const std::string &m) : Error("dimension_mismatch", m) {}
};

struct DomainError : Error {
  explicit DomainError(const std::string &m) : Error("domain_error", m) {}
};

struct NotPositiveDefinite : Error {
  NotPositiveDefinite(const std::string &m, Index minor)
      : Error("not_positive_definite", m), failing_minor(minor) {}
  Index failing_minor;  // 1-based order of the leading minor that failed
};

struct ConvergenceError : Error {
  explicit ConvergenceError(const std::string &m) : Error("convergence_failure", m) {}
};

struct ParseError : Error {
  ParseError(const std::string &m, std::size_t line_no = 0)
      : Error("parse_error", m), line(line_no) {}
  std::size_t line;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string &m) : Error("config_error", m) {}
};

// Strictly lower-triangular part (zero diagonal).
inline Matrix strict_lower(const Matrix &m) {
  return m.triangularView<Eigen::StrictlyLower>();
}

}  // namespace sckpd
