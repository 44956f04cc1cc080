/// @file types.hpp
/// @brief Shared scalar/vector aliases and error types for the apfem library.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace apfem {

using Index = std::int64_t;

/// Fixed-size point / vector in D spatial dimensions.
template <int D>
using Vec = Eigen::Matrix<double, D, 1>;

/// Fixed-size D x D matrix (Jacobians, diffusion tensors).
template <int D>
using Mat = Eigen::Matrix<double, D, D>;

using VecX = Eigen::VectorXd;

/// Bad user-facing configuration (grid size, epsilon sign, CLI flags...).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Direction field degenerate (|B| ~ 0) or geometry assumptions violated
/// (non-positive coordinate Jacobian, field line fails to exit).
class GeometryError : public std::runtime_error {
public:
    explicit GeometryError(const std::string& what) : std::runtime_error(what) {}
};

/// Internal consistency failure (should never trigger on valid inputs).
class InternalError : public std::logic_error {
public:
    explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace apfem
