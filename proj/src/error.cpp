#include "blin/error.hpp"

namespace blin {

const char* error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::shape: return "shape";
        case ErrorCode::index: return "index";
        case ErrorCode::insufficient_data: return "insufficient_data";
        case ErrorCode::budget_exceeded: return "budget_exceeded";
        case ErrorCode::non_stationary: return "non_stationary";
        case ErrorCode::unreachable_target: return "unreachable_target";
        case ErrorCode::parse: return "parse";
        case ErrorCode::io: return "io";
        case ErrorCode::degenerate: return "degenerate";
        case ErrorCode::internal: return "internal";
    }
    return "unknown";
}

}  // namespace blin
