#pragma once

#include <stdexcept>
#include <string>

namespace mixnet {

// All engine errors carry a short category used by the CLI for its
// machine-parsable "error:<category>:" prefix.
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& message)
        : std::runtime_error(message), category_(std::move(category)) {}

    const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error("shape", msg) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error("config", msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error("io", msg) {}
};

struct UsageError : Error {
    explicit UsageError(const std::string& msg) : Error("usage", msg) {}
};

struct DataError : Error {
    explicit DataError(const std::string& msg) : Error("data", msg) {}
};

} // namespace mixnet
