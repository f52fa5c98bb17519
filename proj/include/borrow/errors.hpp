#pragma once

#include <stdexcept>
#include <string>

namespace borrow {

// Failures split into two families so the CLI can map them to exit codes
// (2 for bad input, 3 for numerical trouble).
enum class ErrorCategory { Validation, Numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

#define BORROW_DEFINE_ERROR(Name, Category)                             \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& what)                              \
        : Error(ErrorCategory::Category, std::string(#Name ": ") + what) \
    {}                                                                  \
  };

// Input / contract violations.
BORROW_DEFINE_ERROR(DimensionError, Validation)
BORROW_DEFINE_ERROR(SpanError, Validation)
BORROW_DEFINE_ERROR(IndexOutOfRange, Validation)
BORROW_DEFINE_ERROR(RhoOutOfRange, Validation)
BORROW_DEFINE_ERROR(AsymmetricAdjacency, Validation)
BORROW_DEFINE_ERROR(UnknownColumn, Validation)
BORROW_DEFINE_ERROR(BinGapError, Validation)
BORROW_DEFINE_ERROR(SizeGuard, Validation)
BORROW_DEFINE_ERROR(EmptySet, Validation)
BORROW_DEFINE_ERROR(NonPositiveOffset, Validation)
BORROW_DEFINE_ERROR(ParseError, Validation)
BORROW_DEFINE_ERROR(SchemaVersionMismatch, Validation)

// Numerical failures.
BORROW_DEFINE_ERROR(NotPositiveDefinite, Numerical)
BORROW_DEFINE_ERROR(SingularAfterDeletion, Numerical)
BORROW_DEFINE_ERROR(LeverageOne, Numerical)
BORROW_DEFINE_ERROR(LeverageZero, Numerical)
BORROW_DEFINE_ERROR(DegeneratePooling, Numerical)

#undef BORROW_DEFINE_ERROR

int exit_code_for(const Error& error) noexcept;

}  // namespace borrow
