#pragma once

#include <stdexcept>
#include <string>

namespace stratcomm {

/// Base for all input/parameter violations. The CLI maps these to exit code 3.
class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Base for failed internal cross-checks (closed form vs oracle, fixed points,
/// audit assertions). The CLI maps these to exit code 4.
class ConsistencyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NonpositiveVariance : public DomainError {
public:
    using DomainError::DomainError;
};

class DegeneratePrivateInfo : public DomainError {
public:
    using DomainError::DomainError;
};

class NotPositiveDefinite : public DomainError {
public:
    using DomainError::DomainError;
};

class SingularConditioningBlock : public DomainError {
public:
    using DomainError::DomainError;
};

class SingularBlock : public DomainError {
public:
    using DomainError::DomainError;
};

class OverlappingSets : public DomainError {
public:
    using DomainError::DomainError;
};

class DimensionMismatch : public DomainError {
public:
    using DomainError::DomainError;
};

class InvalidBracket : public DomainError {
public:
    using DomainError::DomainError;
};

class NonFiniteEvaluation : public DomainError {
public:
    using DomainError::DomainError;
};

class BracketExpansionExceeded : public DomainError {
public:
    using DomainError::DomainError;
};

class InconsistentStrategy : public DomainError {
public:
    using DomainError::DomainError;
};

/// Two algebraic routes to the same quantity disagreed; signals a bug, never
/// a bad input.
class InternalInconsistency : public ConsistencyError {
public:
    using ConsistencyError::ConsistencyError;
};

/// A constructed parameter set failed its own verification step.
class FixedPointNotConfirmed : public ConsistencyError {
public:
    using ConsistencyError::ConsistencyError;
};

}  // namespace stratcomm
