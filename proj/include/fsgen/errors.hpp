#pragma once

#include <stdexcept>
#include <string>

namespace fsgen {

// Error taxonomy shared by all modules. Every throw site supplies a message
// naming the offending object (layer, class id, byte offset, ...).

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LookupError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace fsgen
