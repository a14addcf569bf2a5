#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace citefix {

// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Title normalized to nothing (pure punctuation/whitespace input).
class EmptyTitleError : public Error {
public:
    explicit EmptyTitleError(const std::string& what) : Error(what) {}
};

// Malformed container (unclosed environment/element) in a bibliography source.
class StructuralParseError : public Error {
public:
    StructuralParseError(const std::string& what, std::size_t byte_offset)
        : Error(what + " (byte offset " + std::to_string(byte_offset) + ")"),
          byte_offset_(byte_offset) {}

    std::size_t byte_offset() const { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

// Dump stream declared an incompatible schema version.
class SchemaError : public Error {
public:
    explicit SchemaError(const std::string& what) : Error(what) {}
};

// Corrupt or inconsistent data join (e.g. verdict referencing an unknown paper).
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(what) {}
};

// Invalid configuration or argument values.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace citefix
