#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ufatd {

enum class ErrorKind {
    Domain,      // argument outside the mathematical domain
    Index,       // index out of range
    Input,       // malformed or inconsistent input data
    Config,      // bad configuration key or value
    Format,      // file format violation
    Numeric,     // non-finite values, divergence
    Io,          // filesystem failure
    Validation,  // a self-check failed
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

std::string_view to_string(ErrorKind kind) noexcept;

// Process exit code for a failed command: 2 config, 3 format, 4 numeric, 5 I/O, 1 otherwise.
int exit_code(ErrorKind kind) noexcept;

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace ufatd
