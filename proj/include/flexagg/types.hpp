#pragma once

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <string>

namespace flexagg {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Closed interval [lo, hi]; lo > hi denotes an empty interval.
struct Interval {
    double lo = -kInf;
    double hi = kInf;

    double width() const { return hi - lo; }
    double mid() const { return 0.5 * (lo + hi); }
    bool contains(double v, double tol = 0.0) const {
        return v >= lo - tol && v <= hi + tol;
    }
    bool degenerate(double tol = 0.0) const { return width() <= tol; }
};

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Parsing
struct MalformedMatrix : Error {
    using Error::Error;
};
struct MissingSection : Error {
    using Error::Error;
};

// Topology
struct NotRadial : Error {
    using Error::Error;
};
struct NoLeaf : Error {
    using Error::Error;
};

// Numerics
struct SingularMatrix : Error {
    using Error::Error;
};
struct Infeasible : Error {
    using Error::Error;
};
struct Unbounded : Error {
    using Error::Error;
};
struct NoConvergence : Error {
    using Error::Error;
};
struct FixedPointStall : Error {
    using Error::Error;
};

// Geometry
struct DegeneratePolygon : Error {
    using Error::Error;
};

// CLI / configuration
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace flexagg
