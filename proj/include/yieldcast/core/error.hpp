#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace yieldcast {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text. `line()` is 1-based, 0 when not applicable.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Two objects that must agree on layout (raster headers, feature schemas) do not.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Input is well-formed but violates a domain invariant.
class InvariantError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace yieldcast
