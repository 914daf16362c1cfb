#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace crfrail {

// Base for every error raised by the library. `kind()` is a stable tag used by
// the CLI for machine-readable error reports and exit codes.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
    virtual const char* kind() const noexcept { return "error"; }
};

// File cannot be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "io"; }
};

// Missing or malformed column mapping.
class SchemaError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "schema"; }
};

// Input rows that violate the data model. `rows` holds 1-based file line numbers
// (header = line 1) for CSV input and 1-based record numbers otherwise.
class ValidationError : public Error {
public:
    ValidationError(const std::string& what, std::vector<std::size_t> rows = {})
        : Error(what), rows_(std::move(rows)) {}
    const char* kind() const noexcept override { return "validation"; }
    const std::vector<std::size_t>& rows() const noexcept { return rows_; }

private:
    std::vector<std::size_t> rows_;
};

// Inputs are well formed but the requested computation is undefined
// (no events, single cluster, degenerate grid, ...).
class DomainError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "domain"; }
};

// Numerical failure: singular information, overflow, quadrature failure.
class NumericalError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "numerical"; }
};

// Iterative fit that did not converge. Carries the objective trace.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, std::vector<double> trace)
        : Error(what), trace_(std::move(trace)) {}
    const char* kind() const noexcept override { return "convergence"; }
    const std::vector<double>& trace() const noexcept { return trace_; }

private:
    std::vector<double> trace_;
};

}  // namespace crfrail
