/// @file assemble.hpp
/// @brief Q2 finite-element assembly of the mass matrix, the parallel and
///        perpendicular stiffness forms, load vectors, and error norms.
///
/// All matrices are assembled over the full nodal space X_h; boundary
/// conditions are applied later by the formulation builder.  Quadrature is
/// the tensorized 3-point Gauss rule (exact through degree 5 per axis).
/// Bilinear forms:
///   mass:  (u, v)
///   par :  a_par(u, v)  = int A_par (b.grad u)(b.grad v)
///   perp:  a_perp(u, v) = int (A_perp Pgrad u) . (Pgrad v),  P = Id - b b^T.
#pragma once

#include <apfem/cases.hpp>
#include <apfem/field.hpp>
#include <apfem/grid.hpp>
#include <apfem/reference.hpp>
#include <apfem/sparse.hpp>
#include <apfem/types.hpp>

#include <array>
#include <cmath>
#include <functional>
#include <limits>

namespace apfem {

namespace detail {

constexpr int ipow3(int d) { return d == 2 ? 9 : 27; }

/// Unpack flat local index into per-axis indices in {0,1,2}.
template <int D>
inline std::array<int, D> unflatten3(int flat) {
    std::array<int, D> a{};
    for (int d = 0; d < D; ++d) {
        a[d] = flat % 3;
        flat /= 3;
    }
    return a;
}

/// Per-element context: global node ids, quadrature points in physical
/// coordinates, shape values and physical gradients at each point.
template <int D>
struct ElementQuad {
    static constexpr int n_loc = ipow3(D);

    std::array<Index, n_loc> node;            // global node ids
    std::array<Vec<D>, n_loc> xq;             // quadrature points
    std::array<double, n_loc> wq;             // quadrature weights (include h^D)
    // shape[q][a], grad[q][a]
    std::array<std::array<double, n_loc>, n_loc> shape;
    std::array<std::array<Vec<D>, n_loc>, n_loc> grad;
};

template <int D>
inline void fill_element_quad(const TensorGrid<D>& grid,
                              const std::array<int, static_cast<std::size_t>(D)>& elem,
                              ElementQuad<D>& eq) {
    const auto& tab = shape_table();
    const double h = grid.h();
    const auto origin = grid.elem_origin(elem);

    for (int a = 0; a < ElementQuad<D>::n_loc; ++a) {
        auto loc = unflatten3<D>(a);
        std::array<int, D> idx{};
        for (int d = 0; d < D; ++d) idx[d] = origin[d] + loc[d];
        eq.node[a] = grid.node_id(idx);
    }

    for (int q = 0; q < ElementQuad<D>::n_loc; ++q) {
        auto ql = unflatten3<D>(q);
        double w = 1.0;
        Vec<D> x;
        for (int d = 0; d < D; ++d) {
            x[d] = (origin[d] + 1.0 + Gauss3::xi[ql[d]]) * h;  // x0 + (xi+1)h
            w *= Gauss3::wt[ql[d]] * h;
        }
        eq.xq[q] = x;
        eq.wq[q] = w;
        for (int a = 0; a < ElementQuad<D>::n_loc; ++a) {
            auto al = unflatten3<D>(a);
            double val = 1.0;
            for (int d = 0; d < D; ++d) val *= tab.value_at[ql[d]][al[d]];
            eq.shape[q][a] = val;
            Vec<D> g;
            for (int i = 0; i < D; ++i) {
                double gv = 1.0;
                for (int d = 0; d < D; ++d) {
                    gv *= (d == i) ? tab.deriv_at[ql[d]][al[d]] / h : tab.value_at[ql[d]][al[d]];
                }
                g[i] = gv;
            }
            eq.grad[q][a] = g;
        }
    }
}

/// Iterate all elements, invoking fn(eq) with a filled ElementQuad.
template <int D, class Fn>
inline void for_each_element(const TensorGrid<D>& grid, Fn&& fn) {
    ElementQuad<D> eq;
    const Index ne = grid.elem_count();
    for (Index e = 0; e < ne; ++e) {
        fill_element_quad(grid, grid.elem_index(e), eq);
        fn(eq);
    }
}

}  // namespace detail

enum class FormKind { mass, parallel, perpendicular };

/// Assemble one of the three bilinear forms over the full nodal space.
template <int D>
SpMat assemble_form(const TensorGrid<D>& grid, const FieldCase<D>& field,
                    const Diffusion<D>& diff, FormKind kind) {
    constexpr int n_loc = detail::ipow3(D);
    const Index nn = grid.node_count();
    TripletBuilder builder(nn, nn);
    builder.reserve(static_cast<std::size_t>(grid.elem_count()) * n_loc * n_loc);

    detail::for_each_element(grid, [&](const detail::ElementQuad<D>& eq) {
        std::array<std::array<double, n_loc>, n_loc> local{};
        for (int q = 0; q < n_loc; ++q) {
            const double w = eq.wq[q];
            if (kind == FormKind::mass) {
                for (int r = 0; r < n_loc; ++r) {
                    const double sr = w * eq.shape[q][r];
                    for (int c = 0; c < n_loc; ++c) local[r][c] += sr * eq.shape[q][c];
                }
            } else if (kind == FormKind::parallel) {
                const Vec<D> b = field.frame(eq.xq[q]).b;
                const double apar = diff.a_par(eq.xq[q]);
                std::array<double, n_loc> bg;
                for (int a = 0; a < n_loc; ++a) bg[a] = b.dot(eq.grad[q][a]);
                for (int r = 0; r < n_loc; ++r) {
                    const double sr = w * apar * bg[r];
                    for (int c = 0; c < n_loc; ++c) local[r][c] += sr * bg[c];
                }
            } else {
                const Vec<D> b = field.frame(eq.xq[q]).b;
                const Mat<D> aperp = diff.a_perp(eq.xq[q]);
                std::array<Vec<D>, n_loc> pg;   // perpendicular projections
                std::array<Vec<D>, n_loc> apg;  // A_perp applied
                for (int a = 0; a < n_loc; ++a) {
                    pg[a] = eq.grad[q][a] - b.dot(eq.grad[q][a]) * b;
                    apg[a] = aperp * pg[a];
                }
                for (int r = 0; r < n_loc; ++r) {
                    for (int c = 0; c < n_loc; ++c) local[r][c] += w * apg[c].dot(pg[r]);
                }
            }
        }
        for (int r = 0; r < n_loc; ++r) {
            for (int c = 0; c < n_loc; ++c) builder.add(eq.node[r], eq.node[c], local[r][c]);
        }
    });
    return builder.finalize();
}

/// Load vector F_r = int f theta_r.
template <int D>
VecX assemble_load(const TensorGrid<D>& grid, const std::function<double(const Vec<D>&)>& f) {
    constexpr int n_loc = detail::ipow3(D);
    VecX load = VecX::Zero(grid.node_count());
    detail::for_each_element(grid, [&](const detail::ElementQuad<D>& eq) {
        for (int q = 0; q < n_loc; ++q) {
            const double wf = eq.wq[q] * f(eq.xq[q]);
            for (int r = 0; r < n_loc; ++r) load[eq.node[r]] += wf * eq.shape[q][r];
        }
    });
    return load;
}

/// L2 and full-H1 errors of a nodal coefficient vector against a closed-form
/// solution, by the same quadrature the matrices use.  Relative errors use
/// the computed solution's own norm in the denominator.
struct ErrorNorms {
    double l2_abs = 0.0;
    double h1_abs = 0.0;   // sqrt(l2^2 + |grad e|^2): full H1 norm
    double l2_rel = 0.0;
    double h1_rel = 0.0;
    bool zero_denominator = false;
};

template <int D>
ErrorNorms error_norms(const TensorGrid<D>& grid, const VecX& coeffs,
                       const std::function<double(const Vec<D>&)>& exact,
                       const std::function<Vec<D>(const Vec<D>&)>& exact_grad) {
    if (coeffs.size() != grid.node_count()) {
        throw ConfigError("error_norms: coefficient vector does not match grid");
    }
    constexpr int n_loc = detail::ipow3(D);
    double e_l2 = 0.0, e_grad = 0.0, n_l2 = 0.0, n_grad = 0.0;
    detail::for_each_element(grid, [&](const detail::ElementQuad<D>& eq) {
        for (int q = 0; q < n_loc; ++q) {
            double uh = 0.0;
            Vec<D> guh = Vec<D>::Zero();
            for (int a = 0; a < n_loc; ++a) {
                const double ca = coeffs[eq.node[a]];
                uh += ca * eq.shape[q][a];
                guh += ca * eq.grad[q][a];
            }
            const double du = uh - exact(eq.xq[q]);
            const Vec<D> dg = guh - exact_grad(eq.xq[q]);
            e_l2 += eq.wq[q] * du * du;
            e_grad += eq.wq[q] * dg.squaredNorm();
            n_l2 += eq.wq[q] * uh * uh;
            n_grad += eq.wq[q] * guh.squaredNorm();
        }
    });
    ErrorNorms out;
    out.l2_abs = std::sqrt(e_l2);
    out.h1_abs = std::sqrt(e_l2 + e_grad);
    const double den_l2 = std::sqrt(n_l2);
    const double den_h1 = std::sqrt(n_l2 + n_grad);
    if (den_l2 == 0.0 || den_h1 == 0.0) {
        out.zero_denominator = true;
        out.l2_rel = std::numeric_limits<double>::quiet_NaN();
        out.h1_rel = std::numeric_limits<double>::quiet_NaN();
    } else {
        out.l2_rel = out.l2_abs / den_l2;
        out.h1_rel = out.h1_abs / den_h1;
    }
    return out;
}

/// Point evaluation of the finite-element interpolant (and gradient) at an
/// arbitrary point of the closed unit square/cube.
template <int D>
double eval_fe(const TensorGrid<D>& grid, const VecX& coeffs, const Vec<D>& x) {
    const double h = grid.h();
    std::array<int, D> e{};
    std::array<double, D> xi{};
    for (int d = 0; d < D; ++d) {
        int ed = static_cast<int>(std::floor(x[d] / (2.0 * h)));
        ed = std::max(0, std::min(ed, grid.elems_per_axis() - 1));
        e[d] = ed;
        xi[d] = (x[d] - 2.0 * ed * h) / h - 1.0;
    }
    double value = 0.0;
    for (int a = 0; a < detail::ipow3(D); ++a) {
        auto loc = detail::unflatten3<D>(a);
        std::array<int, D> idx{};
        double s = 1.0;
        for (int d = 0; d < D; ++d) {
            idx[d] = 2 * e[d] + loc[d];
            s *= shape1d(loc[d], xi[d]);
        }
        value += coeffs[grid.node_id(idx)] * s;
    }
    return value;
}

template <int D>
Vec<D> eval_fe_grad(const TensorGrid<D>& grid, const VecX& coeffs, const Vec<D>& x) {
    const double h = grid.h();
    std::array<int, D> e{};
    std::array<double, D> xi{};
    for (int d = 0; d < D; ++d) {
        int ed = static_cast<int>(std::floor(x[d] / (2.0 * h)));
        ed = std::max(0, std::min(ed, grid.elems_per_axis() - 1));
        e[d] = ed;
        xi[d] = (x[d] - 2.0 * ed * h) / h - 1.0;
    }
    Vec<D> grad = Vec<D>::Zero();
    for (int a = 0; a < detail::ipow3(D); ++a) {
        auto loc = detail::unflatten3<D>(a);
        std::array<int, D> idx{};
        for (int d = 0; d < D; ++d) idx[d] = 2 * e[d] + loc[d];
        const double c = coeffs[grid.node_id(idx)];
        for (int gd = 0; gd < D; ++gd) {
            double s = 1.0;
            for (int d = 0; d < D; ++d) {
                s *= (d == gd) ? dshape1d(loc[d], xi[d]) / h : shape1d(loc[d], xi[d]);
            }
            grad[gd] += c * s;
        }
    }
    return grad;
}

}  // namespace apfem
