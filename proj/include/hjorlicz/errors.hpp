#pragma once

#include <stdexcept>
#include <string>

namespace hjorlicz {

// Argument outside the mathematical domain of an operation (x < 0, U <= 0, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Result not representable on the requested scale.
class RangeError : public std::range_error {
 public:
  using std::range_error::range_error;
};

// Parameters that cannot produce a valid object (probabilities outside [0,1], ...).
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An exact computation would exceed its configured atom/enumeration budget.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hjorlicz
