#pragma once

#include <stdexcept>
#include <string>

namespace blin {

// Numeric values are shared with the C API status codes in blin.h.
enum class ErrorCode : int {
    invalid_argument = 1,
    shape = 2,
    index = 3,
    insufficient_data = 4,
    budget_exceeded = 5,
    non_stationary = 6,
    unreachable_target = 7,
    parse = 8,
    io = 9,
    degenerate = 10,
    internal = 99,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

const char* error_code_name(ErrorCode code) noexcept;

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

}  // namespace blin
