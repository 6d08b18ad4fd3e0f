#pragma once

#include <stdexcept>
#include <string>

namespace opttolls {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define OPTTOLLS_DEFINE_ERROR(Name)          \
  class Name : public Error {                \
   public:                                   \
    explicit Name(const std::string& what)   \
        : Error(#Name ": " + what) {}        \
  }

OPTTOLLS_DEFINE_ERROR(InvalidGame);
OPTTOLLS_DEFINE_ERROR(InvalidFlow);
OPTTOLLS_DEFINE_ERROR(Infeasible);
OPTTOLLS_DEFINE_ERROR(Unreachable);
OPTTOLLS_DEFINE_ERROR(NoConvergence);
OPTTOLLS_DEFINE_ERROR(TollOutOfRange);
OPTTOLLS_DEFINE_ERROR(OracleBudgetExceeded);
OPTTOLLS_DEFINE_ERROR(TargetInfeasible);
OPTTOLLS_DEFINE_ERROR(TargetCyclic);
OPTTOLLS_DEFINE_ERROR(DegenerateCut);
OPTTOLLS_DEFINE_ERROR(NumericBreakdown);
OPTTOLLS_DEFINE_ERROR(OracleSampleFailed);
OPTTOLLS_DEFINE_ERROR(BadSpec);
OPTTOLLS_DEFINE_ERROR(ParseError);

#undef OPTTOLLS_DEFINE_ERROR

}  // namespace opttolls
