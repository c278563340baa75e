#pragma once

#include <stdexcept>
#include <string>

namespace mfnn {

/// Bad argument to a library call (dimension mismatch, out-of-range value).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Inconsistent or incomplete configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss or otherwise could not proceed.
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Failure inside one stage of a campaign; carries the stage name.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& what)
        : std::runtime_error("[" + stage + "] " + what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace mfnn
