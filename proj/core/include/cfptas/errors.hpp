#pragma once

#include <stdexcept>
#include <string>

namespace cfptas {

/// Input rejected by a precondition or model/region validation.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A computation could not be carried out (caps exceeded, internal ordering bugs).
class ComputationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace cfptas
