#pragma once

#include <stdexcept>
#include <string>

namespace spme {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Iterative solve exhausted its budget. `residual` is the last achieved value.
class NonConvergence : public Error {
public:
    NonConvergence(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// A negative-order operator hit the |xi| = 0 mode with nonzero mean input.
class SingularMode : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class RescalingInapplicable : public Error {
public:
    using Error::Error;
};

class NaNDetected : public Error {
public:
    using Error::Error;
};

class PositivityViolation : public Error {
public:
    using Error::Error;
};

class ReachedCap : public Error {
public:
    using Error::Error;
};

class SchemaError : public Error {
public:
    SchemaError(const std::string& path, const std::string& msg)
        : Error(path + ": " + msg), path_(path) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class ConsistencyError : public Error {
public:
    ConsistencyError(const std::string& field_a, const std::string& field_b, const std::string& msg)
        : Error(field_a + " / " + field_b + ": " + msg), a_(field_a), b_(field_b) {}
    const std::string& first_field() const noexcept { return a_; }
    const std::string& second_field() const noexcept { return b_; }

private:
    std::string a_, b_;
};

}  // namespace spme
