#pragma once

#include <stdexcept>

namespace mcqdiff {

// Bad input, config, or contract violation. CLI exit code 1.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A remote inference/embedding endpoint failed. CLI exit code 2.
struct EndpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace mcqdiff
