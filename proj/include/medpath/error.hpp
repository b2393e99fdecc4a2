#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace medpath {

/// Base of every error raised by the library. `code()` is a short stable
/// identifier used as the machine-readable prefix of CLI diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define MEDPATH_DEFINE_ERROR(Name, Code)                                  \
  class Name : public Error {                                             \
   public:                                                                \
    explicit Name(const std::string& what) : Error(Code, what) {}         \
  };

MEDPATH_DEFINE_ERROR(SchemaError, "E_SCHEMA")
MEDPATH_DEFINE_ERROR(ParseError, "E_PARSE")
MEDPATH_DEFINE_ERROR(CodingError, "E_CODING")
MEDPATH_DEFINE_ERROR(IngestionError, "E_INGESTION")
MEDPATH_DEFINE_ERROR(FormulaError, "E_FORMULA")
MEDPATH_DEFINE_ERROR(ShapeError, "E_SHAPE")
MEDPATH_DEFINE_ERROR(SingularDesignError, "E_SINGULAR")
MEDPATH_DEFINE_ERROR(SeparationError, "E_SEPARATION")
MEDPATH_DEFINE_ERROR(DegenerateResponseError, "E_DEGENERATE")
MEDPATH_DEFINE_ERROR(StratumError, "E_STRATUM")
MEDPATH_DEFINE_ERROR(WeightError, "E_WEIGHT")
MEDPATH_DEFINE_ERROR(ContractError, "E_CONTRACT")
MEDPATH_DEFINE_ERROR(DivisionError, "E_DIVISION")
MEDPATH_DEFINE_ERROR(OracleError, "E_ORACLE")
MEDPATH_DEFINE_ERROR(ConfigError, "E_CONFIG")

#undef MEDPATH_DEFINE_ERROR

/// IRLS exhausted its iteration budget. Carries the last iterate.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, std::vector<double> last)
      : Error("E_NONCONVERGENCE", what), last_iterate(std::move(last)) {}
  std::vector<double> last_iterate;
};

/// Evaluated propensity fell outside [floor, 1 - floor].
class PositivityError : public Error {
 public:
  PositivityError(const std::string& what, std::vector<std::size_t> rows)
      : Error("E_POSITIVITY", what), rows(std::move(rows)) {}
  std::vector<std::size_t> rows;
};

}  // namespace medpath
