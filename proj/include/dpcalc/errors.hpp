#pragma once

#include <stdexcept>
#include <string>

namespace dpcalc {

// Every failure the engine reports derives from Error. The CLI maps the
// category to its exit code.
enum class ErrorCategory { Input, Parse, Unsupported, Budget, Arithmetic };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

#define DPCALC_DEFINE_ERROR(Name, Category)                              \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& what) : Error(Category, what) {}    \
  };

// localfield
DPCALC_DEFINE_ERROR(InvalidPrime, ErrorCategory::Input)
DPCALC_DEFINE_ERROR(DivisionByZero, ErrorCategory::Arithmetic)
DPCALC_DEFINE_ERROR(PrecisionExhausted, ErrorCategory::Arithmetic)
DPCALC_DEFINE_ERROR(NoSimpleRoot, ErrorCategory::Arithmetic)
DPCALC_DEFINE_ERROR(NotPIntegral, ErrorCategory::Input)
// symring
DPCALC_DEFINE_ERROR(NotInvertibleInA, ErrorCategory::Arithmetic)
// presburger
DPCALC_DEFINE_ERROR(NotSummable, ErrorCategory::Unsupported)
DPCALC_DEFINE_ERROR(OverlapDetected, ErrorCategory::Unsupported)
DPCALC_DEFINE_ERROR(UnsupportedDomain, ErrorCategory::Unsupported)
// formula
DPCALC_DEFINE_ERROR(SortError, ErrorCategory::Parse)
DPCALC_DEFINE_ERROR(UnboundVariable, ErrorCategory::Input)
DPCALC_DEFINE_ERROR(TooLarge, ErrorCategory::Budget)
DPCALC_DEFINE_ERROR(UnsupportedFormula, ErrorCategory::Unsupported)
// oracle
DPCALC_DEFINE_ERROR(BudgetExceeded, ErrorCategory::Budget)
// motivic
DPCALC_DEFINE_ERROR(UnsupportedZeroCell, ErrorCategory::Unsupported)
DPCALC_DEFINE_ERROR(DuplicateCenter, ErrorCategory::Input)
DPCALC_DEFINE_ERROR(BadPrime, ErrorCategory::Input)
DPCALC_DEFINE_ERROR(UnboundParameter, ErrorCategory::Input)
DPCALC_DEFINE_ERROR(CellFormatError, ErrorCategory::Parse)

#undef DPCALC_DEFINE_ERROR

class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& msg, int line, int column)
      : Error(ErrorCategory::Parse, std::to_string(line) + ":" + std::to_string(column) + ": " + msg),
        line_(line),
        column_(column) {}
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

}  // namespace dpcalc
