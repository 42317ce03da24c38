#pragma once

#include <stdexcept>
#include <string>

namespace lhedge {

/// Malformed scenario text.
class ParseError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// A parameter set violates one of the model preconditions.
class ValidationError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

/// An argument lies outside the domain of a pricing or control formula
/// (negative time to maturity, non-positive surplus, ...).
class DomainError : public std::domain_error {
   public:
    using std::domain_error::domain_error;
};

/// A numerical contract was broken at run time: Riccati pole, truncated
/// tail too heavy, surplus underflow, quadrature failure.
class NumericalError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

}  // namespace lhedge
