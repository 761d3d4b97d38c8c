#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gridfm {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Errors caused by malformed input or invocation rather than by the
/// physics. The CLI maps these to exit code 2.
class InputError : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public InputError {
public:
    using InputError::InputError;
};

class SyntaxError : public InputError {
public:
    SyntaxError(std::size_t line, const std::string& what)
        : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class SemanticError : public InputError {
public:
    using InputError::InputError;
};

class IoError : public InputError {
public:
    using InputError::InputError;
};

class FormatVersionError : public InputError {
public:
    FormatVersionError(int found, int supported)
        : InputError("unsupported schema_version " + std::to_string(found) +
                     " (supported: " + std::to_string(supported) + ")"),
          found_(found) {}
    int found() const noexcept { return found_; }

private:
    int found_;
};

class ZeroImpedanceBranch : public Error {
public:
    explicit ZeroImpedanceBranch(std::size_t branch)
        : Error("branch " + std::to_string(branch) + " is in service with zero impedance"),
          branch_(branch) {}
    std::size_t branch() const noexcept { return branch_; }

private:
    std::size_t branch_;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class NoConvergence : public Error {
public:
    NoConvergence(int iterations, double last_mismatch)
        : Error("power flow did not converge after " + std::to_string(iterations) +
                " iterations (mismatch " + std::to_string(last_mismatch) + ")"),
          iterations_(iterations), last_mismatch_(last_mismatch) {}
    int iterations() const noexcept { return iterations_; }
    double last_mismatch() const noexcept { return last_mismatch_; }

private:
    int iterations_;
    double last_mismatch_;
};

class SingularJacobian : public Error {
public:
    using Error::Error;
};

class SingularMatrix : public Error {
public:
    using Error::Error;
};

class Islanded : public Error {
public:
    using Error::Error;
};

class CannotPreserveConnectivity : public Error {
public:
    using Error::Error;
};

class BudgetExhausted : public Error {
public:
    BudgetExhausted(std::size_t produced, std::size_t requested)
        : Error("scenario budget exhausted: produced " + std::to_string(produced) + " of " +
                std::to_string(requested)),
          produced_(produced), requested_(requested) {}
    std::size_t produced() const noexcept { return produced_; }
    std::size_t requested() const noexcept { return requested_; }

private:
    std::size_t produced_;
    std::size_t requested_;
};

class MissingCase : public Error {
public:
    explicit MissingCase(const std::string& case_id)
        : Error("prediction references unknown case '" + case_id + "'"), case_id_(case_id) {}
    const std::string& case_id() const noexcept { return case_id_; }

private:
    std::string case_id_;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

class BaseCaseUnsolvable : public Error {
public:
    using Error::Error;
};

}  // namespace gridfm
