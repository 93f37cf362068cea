#include "driftguard/error.hpp"

namespace driftguard {

const char* to_string(FormatErrorKind kind) {
    switch (kind) {
        case FormatErrorKind::bad_magic: return "bad-magic";
        case FormatErrorKind::truncated: return "truncated";
        case FormatErrorKind::size_mismatch: return "size-mismatch";
        case FormatErrorKind::non_finite: return "non-finite";
        case FormatErrorKind::bad_header: return "bad-header";
    }
    return "unknown";
}

FormatError::FormatError(FormatErrorKind kind, std::uint64_t offset, const std::string& what)
    : IoError(std::string(to_string(kind)) + " at byte " + std::to_string(offset) + ": " + what),
      kind_(kind),
      offset_(offset) {}

}  // namespace driftguard
