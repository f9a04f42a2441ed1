#pragma once

#include <stdexcept>
#include <string>

namespace detm {

struct DimensionMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ZeroDenominator : std::domain_error {
    using std::domain_error::domain_error;
};

struct NegativeWeight : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct HeterogeneousDims : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BackendFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IllConditioned : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MissingP : std::logic_error {
    using std::logic_error::logic_error;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace detm
