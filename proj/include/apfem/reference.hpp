/// @file reference.hpp
/// @brief Reference-element Q2 shape functions and the 3-point Gauss rule.
///
/// Elements are tensor products of 1D quadratic elements on [-1,1] with nodes
/// at xi = -1, 0, +1 (vertex / midpoint / vertex).  On a homogeneous grid with
/// spacing h the element spans a 2x2(x2) patch of grid intervals, so the
/// per-axis map xi -> x0 + (xi+1)h has constant Jacobian h.
#pragma once

#include <apfem/types.hpp>

#include <array>
#include <cmath>

namespace apfem {

/// 3-point Gauss-Legendre rule on [-1,1]; exact through degree 5.
struct Gauss3 {
    static constexpr int n = 3;
    static constexpr std::array<double, 3> xi = {
        -0.77459666924148337704,  // -sqrt(3/5)
        0.0,
        +0.77459666924148337704,
    };
    static constexpr std::array<double, 3> wt = {
        5.0 / 9.0,
        8.0 / 9.0,
        5.0 / 9.0,
    };
};

/// 1D quadratic shape function a in {0,1,2} (left vertex, midpoint, right
/// vertex) evaluated at reference coordinate xi in [-1,1].
inline double shape1d(int a, double xi) {
    switch (a) {
        case 0: return 0.5 * xi * (xi - 1.0);
        case 1: return 1.0 - xi * xi;
        case 2: return 0.5 * xi * (xi + 1.0);
        default: throw InternalError("shape1d: node index out of range");
    }
}

/// d/dxi of shape1d.
inline double dshape1d(int a, double xi) {
    switch (a) {
        case 0: return xi - 0.5;
        case 1: return -2.0 * xi;
        case 2: return xi + 0.5;
        default: throw InternalError("dshape1d: node index out of range");
    }
}

/// Per-axis tables of the three 1D shapes (and derivatives) at the three
/// Gauss points: value_at[q][a], deriv_at[q][a].
struct ShapeTable1d {
    std::array<std::array<double, 3>, 3> value_at{};
    std::array<std::array<double, 3>, 3> deriv_at{};

    ShapeTable1d() {
        for (int q = 0; q < Gauss3::n; ++q) {
            for (int a = 0; a < 3; ++a) {
                value_at[q][a] = shape1d(a, Gauss3::xi[q]);
                deriv_at[q][a] = dshape1d(a, Gauss3::xi[q]);
            }
        }
    }
};

inline const ShapeTable1d& shape_table() {
    static const ShapeTable1d table;
    return table;
}

}  // namespace apfem
