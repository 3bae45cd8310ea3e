#pragma once

#include <stdexcept>
#include <string>

namespace pbound {

enum class ErrorKind {
    Argument,
    Overflow,
    Infeasible,
    Shape,
    Uncontrollable,
    Conditioning,
    Certification,
    Divergence,
    Parse,
    Config,
};

const char* to_string(ErrorKind kind) noexcept;

// Every failure raised by the library carries a kind so callers (the CLI in
// particular) can map it onto a stable exit status.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ArgumentError : public Error {
public:
    explicit ArgumentError(const std::string& what) : Error(ErrorKind::Argument, what) {}
};

class OverflowError : public Error {
public:
    explicit OverflowError(const std::string& what) : Error(ErrorKind::Overflow, what) {}
};

class InfeasibleError : public Error {
public:
    explicit InfeasibleError(const std::string& what) : Error(ErrorKind::Infeasible, what) {}
};

class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::size_t last_finite_index)
        : Error(ErrorKind::Divergence, what), last_finite_index_(last_finite_index) {}

    std::size_t last_finite_index() const noexcept { return last_finite_index_; }

private:
    std::size_t last_finite_index_;
};

}  // namespace pbound
