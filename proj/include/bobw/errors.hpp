#pragma once

#include <stdexcept>
#include <string>

namespace bobw {

// Error categories map one-to-one onto CLI exit codes (see tools/bobw_cli.cpp).

/// Bad user input: config keys, file contents, environment parameters.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The FTRL solver ran out of its iteration budget or underflowed.
class NonConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A property that the algorithm guarantees did not hold.
class InvariantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MultipleSkips : public InvariantError {
 public:
  using InvariantError::InvariantError;
};

class NoFreeSlot : public InvariantError {
 public:
  using InvariantError::InvariantError;
};

/// API misuse: operations called out of order or on unknown rounds.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class DoublePlay : public ContractError {
 public:
  using ContractError::ContractError;
};

class UnknownOrigin : public ContractError {
 public:
  using ContractError::ContractError;
};

class AlreadyResolved : public ContractError {
 public:
  using ContractError::ContractError;
};

class MismatchedCheckpoints : public ContractError {
 public:
  using ContractError::ContractError;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bobw
