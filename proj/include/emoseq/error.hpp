#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace emoseq {

/// Base of every error thrown by the toolkit. `kind()` is a short stable
/// token used in machine-parsable diagnostics.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& what) : Error("invalid-argument", what) {}
};

/// Shape, dimension or column-count disagreement between inputs.
class SchemaError : public Error {
public:
    explicit SchemaError(const std::string& what) : Error("schema", what) {}
};

/// Malformed binary payload. Carries the byte offset where decoding failed.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : Error("format", what + " (at byte " + std::to_string(offset) + ")"), message_(what), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

    /// Same error with a location prefix such as the file path.
    FormatError prefixed(const std::string& context) const {
        return FormatError(context + ": " + message_, offset_);
    }

private:
    std::string message_;
    std::size_t offset_;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error("io", what) {}
};

}  // namespace emoseq
