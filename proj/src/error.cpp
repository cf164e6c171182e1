#include "ufatd/error.hpp"

namespace ufatd {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Domain: return "domain error";
        case ErrorKind::Index: return "index error";
        case ErrorKind::Input: return "input error";
        case ErrorKind::Config: return "config error";
        case ErrorKind::Format: return "format error";
        case ErrorKind::Numeric: return "numeric error";
        case ErrorKind::Io: return "I/O error";
        case ErrorKind::Validation: return "validation failure";
    }
    return "error";
}

int exit_code(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Config: return 2;
        case ErrorKind::Format: return 3;
        case ErrorKind::Numeric: return 4;
        case ErrorKind::Io: return 5;
        default: return 1;
    }
}

}  // namespace ufatd
