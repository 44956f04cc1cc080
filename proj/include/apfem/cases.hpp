/// @file cases.hpp
/// @brief Manufactured solutions phi^eps = phi0 + eps*w with closed-form
///        forcing for the anisotropic operator (A_par = 1, A_perp = Id).
///
/// Every built-in case satisfies b.grad(phi0) = 0 identically, so the forcing
///     f = -div( (1/eps) b b^T grad phi + (Id - b b^T) grad phi )
/// reduces, exactly and without any 1/eps factor, to
///     f = -lap(phi^eps) + (eps - 1) * G,
///     G = b.grad(b.grad w) + (b.grad w) div b.
/// Evaluating f this way is what keeps the right-hand side meaningful at
/// eps = 1e-15 and below: the naive (1/eps) * parallel-flux form multiplies a
/// catastrophically cancelled quantity by 1/eps and is pure noise there.
#pragma once

#include <apfem/field.hpp>
#include <apfem/types.hpp>

#include <cmath>
#include <memory>
#include <numbers>
#include <string>

namespace apfem {

/// A manufactured problem: direction field + exact solution pieces.
/// phi^eps = phi0 + eps * w, with b.grad(phi0) = 0 by construction.
template <int D>
class ManufacturedCase {
public:
    virtual ~ManufacturedCase() = default;

    virtual std::string name() const = 0;
    virtual const FieldCase<D>& field() const = 0;

    virtual double phi0(const Vec<D>& x) const = 0;
    virtual Vec<D> grad_phi0(const Vec<D>& x) const = 0;
    virtual double lap_phi0(const Vec<D>& x) const = 0;

    virtual double w(const Vec<D>& x) const = 0;
    virtual Vec<D> grad_w(const Vec<D>& x) const = 0;
    virtual Mat<D> hess_w(const Vec<D>& x) const = 0;

    double lap_w(const Vec<D>& x) const { return hess_w(x).trace(); }

    double phi_eps(const Vec<D>& x, double eps) const { return phi0(x) + eps * w(x); }

    Vec<D> grad_phi_eps(const Vec<D>& x, double eps) const {
        return grad_phi0(x) + eps * grad_w(x);
    }

    /// Parallel-flux divergence of the fluctuation: G = b.grad(b.grad w)
    /// + (b.grad w) div b.  With b.grad(phi0) = 0 this carries the entire
    /// parallel part of the operator applied to phi^eps (scaled by eps).
    double parallel_flux_div_w(const Vec<D>& x) const {
        const FieldFrame<D> fr = field().frame(x);
        const Vec<D> gw = grad_w(x);
        const Mat<D> hw = hess_w(x);
        const double b_dot_gw = fr.b.dot(gw);
        // b.grad(b.grad w) = (jac_b b).grad w + b^T (hess w) b
        const double advect = (fr.jac_b * fr.b).dot(gw) + fr.b.dot(hw * fr.b);
        return advect + b_dot_gw * fr.div_b;
    }

    /// Cancellation-safe forcing: f = -lap(phi^eps) + (eps-1) * G.
    double forcing(const Vec<D>& x, double eps) const {
        return -lap_phi0(x) - eps * lap_w(x) + (eps - 1.0) * parallel_flux_div_w(x);
    }
};

namespace detail {

/// Fluctuation factor w = cos(2 pi x_par) * prod_{d perp} sin(pi x_d), where
/// x_par is the axis the uniform cases align with.  The variable 2D case
/// reuses the x-aligned variant.
template <int D>
struct CosSinFluct {
    int par_axis;  // axis carrying cos(2 pi .)

    double value(const Vec<D>& x) const {
        double v = std::cos(2.0 * std::numbers::pi * x[par_axis]);
        for (int d = 0; d < D; ++d) {
            if (d != par_axis) v *= std::sin(std::numbers::pi * x[d]);
        }
        return v;
    }

    Vec<D> grad(const Vec<D>& x) const {
        const double pi = std::numbers::pi;
        Vec<D> g;
        for (int i = 0; i < D; ++i) {
            double v = 1.0;
            for (int d = 0; d < D; ++d) {
                const double arg = (d == par_axis) ? 2.0 * pi * x[d] : pi * x[d];
                if (d == i) {
                    v *= (d == par_axis) ? -2.0 * pi * std::sin(arg) : pi * std::cos(arg);
                } else {
                    v *= (d == par_axis) ? std::cos(arg) : std::sin(arg);
                }
            }
            g[i] = v;
        }
        return g;
    }

    Mat<D> hess(const Vec<D>& x) const {
        const double pi = std::numbers::pi;
        Mat<D> h;
        for (int i = 0; i < D; ++i) {
            for (int j = 0; j < D; ++j) {
                double v = 1.0;
                for (int d = 0; d < D; ++d) {
                    const double freq = (d == par_axis) ? 2.0 * pi : pi;
                    const double arg = freq * x[d];
                    int order = (d == i ? 1 : 0) + (d == j ? 1 : 0);
                    const bool is_cos = (d == par_axis);  // base factor type
                    double f;
                    if (order == 0) {
                        f = is_cos ? std::cos(arg) : std::sin(arg);
                    } else if (order == 1) {
                        f = freq * (is_cos ? -std::sin(arg) : std::cos(arg));
                    } else {
                        f = -freq * freq * (is_cos ? std::cos(arg) : std::sin(arg));
                    }
                    v *= f;
                }
                h(i, j) = v;
            }
        }
        return h;
    }
};

}  // namespace detail

/// Uniform-field case: b along `par_axis`, phi0 = prod_{d != par} sin(pi x_d),
/// w = cos(2 pi x_par) prod_{d != par} sin(pi x_d).
template <int D>
class UniformCase final : public ManufacturedCase<D> {
public:
    /// par_axis 0 gives the standard x-aligned case; par_axis 1 (2D only)
    /// gives the rotated orientation used by the ill-posedness demo.
    explicit UniformCase(int par_axis = 0) : fluct_{par_axis} {
        if (par_axis == 0) {
            field_ = std::make_shared<UniformFieldX<D>>();
            return;
        }
        if constexpr (D == 2) {
            if (par_axis == 1) {
                field_ = std::make_shared<UniformFieldY2>();
                return;
            }
        }
        throw ConfigError("uniform case: unsupported alignment axis");
    }

    std::string name() const override { return field_->name(); }
    const FieldCase<D>& field() const override { return *field_; }

    double phi0(const Vec<D>& x) const override {
        double v = 1.0;
        for (int d = 0; d < D; ++d) {
            if (d != fluct_.par_axis) v *= std::sin(std::numbers::pi * x[d]);
        }
        return v;
    }

    Vec<D> grad_phi0(const Vec<D>& x) const override {
        const double pi = std::numbers::pi;
        Vec<D> g = Vec<D>::Zero();
        for (int i = 0; i < D; ++i) {
            if (i == fluct_.par_axis) continue;
            double v = pi;
            for (int d = 0; d < D; ++d) {
                if (d == fluct_.par_axis) continue;
                v *= (d == i) ? std::cos(pi * x[d]) : std::sin(pi * x[d]);
            }
            g[i] = v;
        }
        return g;
    }

    double lap_phi0(const Vec<D>& x) const override {
        const double pi = std::numbers::pi;
        return -(D - 1) * pi * pi * phi0(x);
    }

    double w(const Vec<D>& x) const override { return fluct_.value(x); }
    Vec<D> grad_w(const Vec<D>& x) const override { return fluct_.grad(x); }
    Mat<D> hess_w(const Vec<D>& x) const override { return fluct_.hess(x); }

private:
    std::shared_ptr<const FieldCase<D>> field_;
    detail::CosSinFluct<D> fluct_;
};

/// Curved-field 2D case: phi0 = sin(psi), psi = pi y + alpha (y^2-y) cos(m pi x),
/// whose level sets are exactly the field lines of VariableField2.
class VariableCase2 final : public ManufacturedCase<2> {
public:
    VariableCase2(double alpha, int m)
        : field_(std::make_shared<VariableField2>(alpha, m)), alpha_(alpha), m_(m), fluct_{0} {}

    std::string name() const override { return "variable2d"; }
    const FieldCase<2>& field() const override { return *field_; }
    double alpha() const { return alpha_; }
    int m() const { return m_; }

    double psi(const Vec<2>& x) const {
        const double pi = std::numbers::pi;
        return pi * x[1] + alpha_ * (x[1] * x[1] - x[1]) * std::cos(m_ * pi * x[0]);
    }

    double phi0(const Vec<2>& x) const override { return std::sin(psi(x)); }

    Vec<2> grad_phi0(const Vec<2>& x) const override {
        return std::cos(psi(x)) * grad_psi(x);
    }

    double lap_phi0(const Vec<2>& x) const override {
        const double p = psi(x);
        const Vec<2> gp = grad_psi(x);
        return std::cos(p) * lap_psi(x) - std::sin(p) * gp.squaredNorm();
    }

    double w(const Vec<2>& x) const override { return fluct_.value(x); }
    Vec<2> grad_w(const Vec<2>& x) const override { return fluct_.grad(x); }
    Mat<2> hess_w(const Vec<2>& x) const override { return fluct_.hess(x); }

private:
    Vec<2> grad_psi(const Vec<2>& x) const {
        const double pi = std::numbers::pi;
        const double mp = m_ * pi;
        const double y = x[1];
        // grad psi = (-B_y, B_x): psi is a stream function for B.
        return Vec<2>(-mp * alpha_ * (y * y - y) * std::sin(mp * x[0]),
                      pi + alpha_ * (2.0 * y - 1.0) * std::cos(mp * x[0]));
    }

    double lap_psi(const Vec<2>& x) const {
        const double mp = m_ * std::numbers::pi;
        const double c = std::cos(mp * x[0]);
        return -mp * mp * alpha_ * (x[1] * x[1] - x[1]) * c + 2.0 * alpha_ * c;
    }

    std::shared_ptr<const VariableField2> field_;
    double alpha_;
    int m_;
    detail::CosSinFluct<2> fluct_;
};

/// Factory over the built-in 2D cases: "uniform2d", "variable2d",
/// "uniform2d-y" (rotated uniform case of the ill-posedness demo).
inline std::shared_ptr<const ManufacturedCase<2>> make_case_2d(const std::string& name,
                                                               double alpha = 2.0, int m = 1) {
    if (name == "uniform2d") return std::make_shared<UniformCase<2>>(0);
    if (name == "uniform2d-y") return std::make_shared<UniformCase<2>>(1);
    if (name == "variable2d") return std::make_shared<VariableCase2>(alpha, m);
    throw ConfigError("unknown 2D case '" + name + "'");
}

inline std::shared_ptr<const ManufacturedCase<3>> make_case_3d(const std::string& name) {
    if (name == "uniform3d") return std::make_shared<UniformCase<3>>(0);
    throw ConfigError("unknown 3D case '" + name + "'");
}

}  // namespace apfem
