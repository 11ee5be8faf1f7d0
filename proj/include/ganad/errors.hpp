#pragma once

#include <stdexcept>
#include <string>

namespace ganad {

// Runtime failure (CLI exit code 1).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad or unknown configuration (exit code 2).
class ConfigError : public Error {
public:
    ConfigError(const std::string& message, std::string key = {})
        : Error(message), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

// A referenced file or directory does not exist (exit code 3).
class MissingInputError : public Error {
public:
    using Error::Error;
};

// Corrupt, truncated or incompatible on-disk data.
class FormatError : public Error {
public:
    using Error::Error;
};

// Loss or gradient became non-finite during training.
class NonFiniteError : public Error {
public:
    using Error::Error;
};

}  // namespace ganad
