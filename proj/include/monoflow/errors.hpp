#pragma once

#include <stdexcept>
#include <string>

namespace monoflow {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class DimensionMismatch : public Error {
public:
    DimensionMismatch(const std::string& where, long got, long expected)
        : Error(where + ": dimension mismatch, got " + std::to_string(got) +
                ", expected " + std::to_string(expected)) {}
    explicit DimensionMismatch(const std::string& what) : Error(what) {}
};

/// Factorization of a map that was expected to be symmetric positive definite failed.
class NonSpd : public Error {
public:
    explicit NonSpd(const std::string& what) : Error(what) {}
};

class NoConvergence : public Error {
public:
    NoConvergence(const std::string& where, int iterations)
        : Error(where + ": no convergence after " + std::to_string(iterations) +
                " iterations") {}
};

class SingularPivot : public Error {
public:
    SingularPivot(long index, double pivot)
        : Error("tridiagonal solve: singular pivot " + std::to_string(pivot) +
                " at row " + std::to_string(index)) {}
};

/// Argument lies outside the domain of a set-valued operator.
class OutsideDomain : public Error {
public:
    OutsideDomain(double distance)
        : Error("point outside operator domain, distance " + std::to_string(distance)),
          distance_(distance) {}
    double distance() const { return distance_; }

private:
    double distance_;
};

class NewtonDiverged : public Error {
public:
    NewtonDiverged(long step, double residual)
        : Error("implicit step " + std::to_string(step) +
                ": Newton iteration diverged, residual " + std::to_string(residual)),
          step_(step), residual_(residual) {}
    long step() const { return step_; }
    double residual() const { return residual_; }

private:
    long step_;
    double residual_;
};

class IncompatibleInitialState : public Error {
public:
    IncompatibleInitialState(double distance)
        : Error("initial data incompatible: distance of R l(0) - Q z0 to the operator "
                "domain is " + std::to_string(distance)),
          distance_(distance) {}
    double distance() const { return distance_; }

private:
    double distance_;
};

class SubproblemDiverged : public Error {
public:
    SubproblemDiverged(long step, double residual)
        : Error("reference step " + std::to_string(step) +
                ": incremental subproblem diverged, residual " + std::to_string(residual)) {}
};

class SingularStep : public Error {
public:
    SingularStep(long step)
        : Error("linearized step " + std::to_string(step) + ": singular system") {}
};

class CoercivityViolated : public Error {
public:
    CoercivityViolated(const std::string& which, double min_eig)
        : Error("coercivity violated for " + which + ": smallest eigenvalue " +
                std::to_string(min_eig)),
          min_eig_(min_eig) {}
    double min_eig() const { return min_eig_; }

private:
    double min_eig_;
};

class LineSearchFailed : public Error {
public:
    LineSearchFailed(int halvings)
        : Error("line search failed after " + std::to_string(halvings) + " halvings") {}
};

/// Invalid run configuration (bad file, missing field, out-of-range value).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

} // namespace monoflow
