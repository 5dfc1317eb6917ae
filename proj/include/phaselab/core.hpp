#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace phaselab {

using cplx = std::complex<double>;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using VecR = Vec<double>;
using VecC = Vec<cplx>;
using MatR = Mat<double>;
using MatC = Mat<cplx>;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr cplx I_unit{0.0, 1.0};

// Japanese bracket <z> = sqrt(1 + |z|^2).
inline double bracket(double x, double xi) { return std::sqrt(1.0 + x * x + xi * xi); }

// Short %g rendering for messages.
inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

enum class ErrorKind { config, dimension, numerical, guard, domain, parse, unsupported, fit };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

// Invalid user-facing parameter; `field` names the offending entry.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& msg)
        : Error(ErrorKind::config, field + ": " + msg), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& msg) : Error(ErrorKind::dimension, msg) {}
};

class NumericalError : public Error {
public:
    NumericalError(const std::string& msg, double defect)
        : Error(ErrorKind::numerical, msg + " (defect " + num(defect) + ")"), defect_(defect) {}
    double defect() const { return defect_; }

private:
    double defect_;
};

// Size or resource guard; carries a remediation hint.
class GuardError : public Error {
public:
    GuardError(std::string field, const std::string& msg, std::string remedy)
        : Error(ErrorKind::guard, field + ": " + msg + " (" + remedy + ")"),
          field_(std::move(field)), remedy_(std::move(remedy)) {}
    const std::string& field() const { return field_; }
    const std::string& remedy() const { return remedy_; }

private:
    std::string field_;
    std::string remedy_;
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& msg) : Error(ErrorKind::domain, msg) {}
};

class UnsupportedError : public Error {
public:
    explicit UnsupportedError(const std::string& msg) : Error(ErrorKind::unsupported, msg) {}
};

class FitError : public Error {
public:
    explicit FitError(const std::string& msg) : Error(ErrorKind::fit, msg) {}
};

class ParseError : public Error {
public:
    ParseError(const std::string& msg, int line, int column)
        : Error(ErrorKind::parse, "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + msg),
          line_(line), column_(column) {}
    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

}  // namespace phaselab
