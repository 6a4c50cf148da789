#pragma once

#include <stdexcept>
#include <string>

namespace xmask {

// Exit-code categories shared by the library and the CLI.
enum class ErrorKind { Input = 2, Precondition = 3, Divergence = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

// Malformed files, shape mismatches, out-of-bounds coordinates.
class InputError : public Error {
public:
    explicit InputError(const std::string& what) : Error(ErrorKind::Input, what) {}
};

// Well-formed input that violates an operation's precondition.
class PreconditionError : public Error {
public:
    explicit PreconditionError(const std::string& what) : Error(ErrorKind::Precondition, what) {}
};

class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, int step) : Error(ErrorKind::Divergence, what), step_(step) {}
    int step() const noexcept { return step_; }

private:
    int step_;
};

}  // namespace xmask
