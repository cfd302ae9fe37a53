#pragma once

#include <stdexcept>

namespace vnet {

/// Thrown when the inputs of a model function break its stated contract.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace vnet
