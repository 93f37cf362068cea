#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace driftguard {

// Violated precondition or malformed argument. The CLI maps this to exit code 2.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Filesystem failure (open/read/write). The CLI maps this to exit code 3.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class FormatErrorKind {
    bad_magic,
    truncated,
    size_mismatch,
    non_finite,
    bad_header,
};

const char* to_string(FormatErrorKind kind);

// Structurally invalid file contents. `offset` is the byte position where the
// problem was detected.
class FormatError : public IoError {
public:
    FormatError(FormatErrorKind kind, std::uint64_t offset, const std::string& what);

    FormatErrorKind kind() const { return kind_; }
    std::uint64_t offset() const { return offset_; }

private:
    FormatErrorKind kind_;
    std::uint64_t offset_;
};

}  // namespace driftguard
