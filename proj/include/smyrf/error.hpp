#pragma once

#include <stdexcept>

namespace smyrf {

// Error taxonomy shared by the library and the CLI. The CLI maps these to
// process exit codes: UsageError -> 2, FormatError -> 3, CapacityError -> 4,
// anything else -> 1.

// Matrix/vector dimensions do not line up.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input values outside the operation's domain (norm bound violated,
// non-softmax rows, zero query for h2lsh, ...).
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A structural invariant does not hold (unbalanced clusters, divisibility).
struct InvariantError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Instance too large for an exhaustive or materializing computation.
struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed file or document (bad magic, truncation, non-finite data).
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Caller misuse: bad flag combination, empty round list, ...
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace smyrf
