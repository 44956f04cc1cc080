/// @file field.hpp
/// @brief Direction fields b = B/|B|, their derivatives, and diffusion
///        coefficients for the anisotropic operator
///        A = (1/eps) A_par b b^T + (Id - b b^T) A_perp (Id - b b^T).
#pragma once

#include <apfem/types.hpp>

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <string>

namespace apfem {

/// Local frame of the direction field at a point: raw field B, unit field b,
/// Jacobian (jac_b)_{ij} = d b_i / d x_j, and div b = tr(jac_b).
template <int D>
struct FieldFrame {
    Vec<D> B;
    Vec<D> b;
    Mat<D> jac_b;
    double div_b = 0.0;
};

/// A divergence-free direction field on the unit square/cube with closed-form
/// derivatives.
template <int D>
class FieldCase {
public:
    virtual ~FieldCase() = default;
    virtual std::string name() const = 0;

    /// Raw field B and its Jacobian (jac_B)_{ij} = d B_i / d x_j.
    virtual void raw(const Vec<D>& x, Vec<D>& B, Mat<D>& jac_B) const = 0;

    /// Unit field + derivatives.  Throws GeometryError when |B| <= 1e-14.
    FieldFrame<D> frame(const Vec<D>& x) const {
        FieldFrame<D> f;
        Mat<D> jac_B;
        raw(x, f.B, jac_B);
        const double norm = f.B.norm();
        if (norm <= 1e-14) {
            throw GeometryError("field '" + name() + "': |B| vanishes at evaluation point");
        }
        f.b = f.B / norm;
        // d(B/|B|) = (Id - b b^T) jac_B / |B|
        f.jac_b = (Mat<D>::Identity() - f.b * f.b.transpose()) * jac_B / norm;
        f.div_b = f.jac_b.trace();
        return f;
    }

    Vec<D> unit_b(const Vec<D>& x) const { return frame(x).b; }
};

/// Split v into components parallel / perpendicular to the unit vector b.
template <int D>
inline void split_parallel_perp(const Vec<D>& v, const Vec<D>& b, Vec<D>& v_par, Vec<D>& v_perp) {
    v_par = (b.dot(v)) * b;
    v_perp = v - v_par;
}

// ---------------------------------------------------------------------------
// Built-in fields
// ---------------------------------------------------------------------------

/// Uniform field along the x-axis: B = (1, 0[, 0]).
template <int D>
class UniformFieldX final : public FieldCase<D> {
public:
    std::string name() const override { return D == 2 ? "uniform2d" : "uniform3d"; }
    void raw(const Vec<D>& /*x*/, Vec<D>& B, Mat<D>& jac_B) const override {
        B = Vec<D>::Zero();
        B[0] = 1.0;
        jac_B = Mat<D>::Zero();
    }
};

/// Uniform field along the y-axis (2D): B = (0, 1).  This is the orientation
/// of the multiplier-space ill-posedness demonstration, where field lines run
/// bottom to top and the Dirichlet sides are x = 0 and x = 1.
class UniformFieldY2 final : public FieldCase<2> {
public:
    std::string name() const override { return "uniform2d-y"; }
    void raw(const Vec<2>& /*x*/, Vec<2>& B, Mat<2>& jac_B) const override {
        B = Vec<2>(0.0, 1.0);
        jac_B = Mat<2>::Zero();
    }
};

/// Curved divergence-free 2D field
///   B = ( alpha (2y-1) cos(m pi x) + pi,  m pi alpha (y^2-y) sin(m pi x) ).
/// For alpha < pi the x-component stays positive, so lines run left to right;
/// B_y vanishes identically on all four sides of the unit square.
class VariableField2 final : public FieldCase<2> {
public:
    VariableField2(double alpha, int m) : alpha_(alpha), m_(m) {
        if (!(alpha > 0.0) || alpha >= std::numbers::pi) {
            throw ConfigError("variable field: need 0 < alpha < pi so that B_x > 0");
        }
        if (m < 1) throw ConfigError("variable field: need m >= 1");
    }

    std::string name() const override { return "variable2d"; }
    double alpha() const { return alpha_; }
    int m() const { return m_; }

    void raw(const Vec<2>& x, Vec<2>& B, Mat<2>& jac_B) const override {
        const double pi = std::numbers::pi;
        const double mp = m_ * pi;
        const double c = std::cos(mp * x[0]);
        const double s = std::sin(mp * x[0]);
        const double y = x[1];
        B[0] = alpha_ * (2.0 * y - 1.0) * c + pi;
        B[1] = mp * alpha_ * (y * y - y) * s;
        jac_B(0, 0) = -mp * alpha_ * (2.0 * y - 1.0) * s;
        jac_B(0, 1) = 2.0 * alpha_ * c;
        jac_B(1, 0) = mp * mp * alpha_ * (y * y - y) * c;
        jac_B(1, 1) = mp * alpha_ * (2.0 * y - 1.0) * s;  // = -jac_B(0,0): div B = 0
    }

private:
    double alpha_;
    int m_;
};

// ---------------------------------------------------------------------------
// Diffusion coefficients
// ---------------------------------------------------------------------------

/// Coefficients of the anisotropic operator: scalar A_par(x) >= a0 > 0 along
/// the field, SPD matrix A_perp(x) across it.  Defaults are 1 and Id, which
/// is what every built-in manufactured case uses.
template <int D>
struct Diffusion {
    std::function<double(const Vec<D>&)> a_par;
    std::function<Mat<D>(const Vec<D>&)> a_perp;

    Diffusion()
        : a_par([](const Vec<D>&) { return 1.0; }),
          a_perp([](const Vec<D>&) { return Mat<D>::Identity(); }) {}

    /// Sampled validation on a lattice of `samples` points per axis:
    /// A_par must stay positive and A_perp symmetric positive definite.
    void validate(int samples = 5) const {
        for (Index flat = 0; flat < ipow(samples, D); ++flat) {
            Vec<D> x;
            Index rest = flat;
            for (int d = 0; d < D; ++d) {
                x[d] = (static_cast<double>(rest % samples) + 0.5) / samples;
                rest /= samples;
            }
            if (!(a_par(x) > 0.0)) {
                throw ConfigError("diffusion: A_par must be positive (failed at sampled point)");
            }
            const Mat<D> ap = a_perp(x);
            if ((ap - ap.transpose()).template lpNorm<Eigen::Infinity>() > 1e-12 * (1.0 + ap.norm())) {
                throw ConfigError("diffusion: A_perp must be symmetric (failed at sampled point)");
            }
            Eigen::SelfAdjointEigenSolver<Mat<D>> es(ap);
            if (es.eigenvalues().minCoeff() <= 0.0) {
                throw ConfigError("diffusion: A_perp must be positive definite (failed at sampled point)");
            }
        }
    }

private:
    static Index ipow(int base, int exp) {
        Index r = 1;
        for (int i = 0; i < exp; ++i) r *= base;
        return r;
    }
};

}  // namespace apfem
