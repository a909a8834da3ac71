#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace moddrop {

// Base of every error this library throws. Callers that only care about
// "something went wrong in moddrop" catch this.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class NumericsError : public Error {
public:
    using Error::Error;
};

class InvalidCodeError : public Error {
public:
    using Error::Error;
};

class DegenerateError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Malformed file content; carries the byte offset where parsing failed.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), reason_(what), offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }
    // Message without the offset suffix, for re-wrapping with more context.
    const std::string& reason() const noexcept { return reason_; }

private:
    std::string reason_;
    std::uint64_t offset_;
};

}  // namespace moddrop
