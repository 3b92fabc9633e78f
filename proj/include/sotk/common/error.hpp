#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sotk {

// Base for all recoverable toolkit failures. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input data: malformed files, checksum mismatches, invariant violations.
class DataError : public Error {
public:
    using Error::Error;
};

// Malformed XML with the byte offset where parsing stopped making sense.
class ParseError : public DataError {
public:
    ParseError(const std::string& what, std::uint64_t offset)
        : DataError(what + " (byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

// Caller passed arguments outside an operation's preconditions.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace sotk
