#pragma once

#include <stdexcept>
#include <string>

namespace sbcp {

// Non-finite input where a real number is required.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Query issued against a structure that cannot answer it (e.g. empty ECDF).
struct QueryError : std::logic_error {
  using std::logic_error::logic_error;
};

// Caller broke a pre-condition of a policy or environment contract.
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace sbcp
