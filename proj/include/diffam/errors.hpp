#pragma once

#include <stdexcept>
#include <string>

namespace diffam {

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A direction vector with zero norm where a direction is required.
struct DegenerateDirection : std::domain_error {
    using std::domain_error::domain_error;
};

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ImageIoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
public:
    TrainingError(const std::string& what, int iteration)
        : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"), iteration_(iteration)
    {
    }
    int iteration() const { return iteration_; }

private:
    int iteration_;
};

}  // namespace diffam
