#pragma once

#include <stdexcept>
#include <string>

namespace consensus {

// Malformed user input: bad graph files, out-of-range probabilities,
// mismatched dimensions.
class InvalidInputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Problem size exceeds an exhaustive-enumeration or dense-eigensolve cap.
class CapExceededError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A theorem hypothesis the requested analysis needs does not hold
// (no directed spanning tree, non-complete graph for the Markovian
// almost-sure bound, ...).
class InapplicableError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// An iterative procedure ran out of budget without reaching a verdict.
class IterationLimitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace consensus
