#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace krysp {

using index_t = std::int64_t;

// Error hierarchy. Every failure mode surfaced by the library derives from
// Error so callers can catch one type at the CLI boundary.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IndexOutOfRange : Error {
    using Error::Error;
};
struct DimensionMismatch : Error {
    using Error::Error;
};
struct EllBlowup : Error {
    using Error::Error;
};
struct ParseError : Error {
    ParseError(const std::string& msg, long line)
        : Error(msg + " (line " + std::to_string(line) + ")"), line_number(line) {}
    long line_number;
};
struct UnsupportedField : Error {
    using Error::Error;
};
struct Breakdown : Error {
    using Error::Error;
};
struct NonFinite : Error {
    using Error::Error;
};
struct ClockUnavailable : Error {
    using Error::Error;
};
struct DisconnectedAssignment : Error {
    using Error::Error;
};
struct EmptySubdomain : Error {
    using Error::Error;
};
struct ProtocolDeadlock : Error {
    using Error::Error;
};
struct BufferLengthMismatch : Error {
    using Error::Error;
};

}  // namespace krysp
