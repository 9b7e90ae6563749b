#pragma once

#include <stdexcept>
#include <string>

namespace hjbt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operands built on different grids or with wrong lengths.
class ShapeError : public Error { public: using Error::Error; };
/// A time or shift that is not an integer multiple of the grid step.
class AlignmentError : public Error { public: using Error::Error; };
/// A grid function outside the required domain proxy (endpoint not zero).
class DomainError : public Error { public: using Error::Error; };
/// A mollifier narrower than the grid can resolve.
class ResolutionError : public Error { public: using Error::Error; };
/// A control path shorter than the requested horizon.
class HorizonError : public Error { public: using Error::Error; };
/// Invalid problem data or configuration.
class ConfigError : public Error { public: using Error::Error; };
/// Discrete B failed its symmetry or positivity audit.
class OperatorConstructionError : public Error { public: using Error::Error; };
/// Running cost violates its boundedness or Lipschitz hypothesis.
class CostRejectedError : public Error { public: using Error::Error; };
/// Exhaustive enumeration would exceed the evaluation budget.
class BudgetError : public Error { public: using Error::Error; };

}  // namespace hjbt
