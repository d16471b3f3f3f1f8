#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace stockpred {

// Failure with a stable machine-readable kind ("MissingColumn", "SeriesTooShort", ...).
// The kind is what tests and exit-code mapping key on; the message is for humans.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

[[noreturn]] inline void fail(std::string kind, const std::string& message) {
    throw Error(std::move(kind), message);
}

} // namespace stockpred
