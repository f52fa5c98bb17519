#include "borrow/errors.hpp"

namespace borrow {

int exit_code_for(const Error& error) noexcept {
  return error.category() == ErrorCategory::Validation ? 2 : 3;
}

}  // namespace borrow
