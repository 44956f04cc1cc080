/// @file fieldline.hpp
/// @brief Field-line tracing used as an independent verification oracle.
///
/// Traces integral curves of the unit field b from the inflow boundary with
/// classical fourth-order Runge-Kutta, propagating alongside the variational
/// (tangent-sensitivity) system dV/dxi = (grad b) V so the coordinate
/// Jacobian J = det[b | V] is available at every sample.  Since |b| = 1 the
/// arc parameter is arc length.  On top of the traces sit the weighted
/// line-average projector (the value of the L2-orthogonal projection onto
/// line-constant functions) and a solution audit that checks a discrete
/// solution for the expected structure: p_h constant along lines, q_h with
/// vanishing weighted line averages.
#pragma once

#include <apfem/assemble.hpp>
#include <apfem/field.hpp>
#include <apfem/grid.hpp>
#include <apfem/types.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace apfem {

template <int D>
struct LineSample {
    double xi = 0.0;                        // arc parameter
    Vec<D> x = Vec<D>::Zero();              // position
    Eigen::Matrix<double, D, D - 1> v;      // V = dX/dseed
    double jac = 1.0;                       // J = det[b | V]
};

template <int D>
struct FieldLine {
    Vec<D> seed = Vec<D>::Zero();
    std::vector<LineSample<D>> samples;     // uniform in xi, final partial sample at exit
    Vec<D> exit_point = Vec<D>::Zero();
    double length = 0.0;
};

struct TraceOptions {
    double h_ode = 1.0 / 64.0;   // uniform step in arc length
    double tol = 1e-12;          // exit bisection tolerance (distance to boundary)
    double length_budget = 0.0;  // 0 -> 100 * diam(domain)
};

namespace detail {

/// Signed distance-like indicator: negative strictly inside the unit box,
/// zero on the boundary, positive outside.
template <int D>
double boundary_excess(const Vec<D>& x) {
    double m = -std::numeric_limits<double>::infinity();
    for (int d = 0; d < D; ++d) m = std::max({m, -x[d], x[d] - 1.0});
    return m;
}

template <int D>
struct TraceState {
    Vec<D> x;
    Eigen::Matrix<double, D, D - 1> v;
};

/// One classical RK4 step of the coupled position/variational system.
template <int D>
TraceState<D> rk4_step(const FieldCase<D>& field, const TraceState<D>& s, double h) {
    auto rhs = [&](const TraceState<D>& u) {
        const FieldFrame<D> fr = field.frame(u.x);
        TraceState<D> d;
        d.x = fr.b;
        d.v = fr.jac_b * u.v;
        return d;
    };
    const TraceState<D> k1 = rhs(s);
    TraceState<D> t;
    t.x = s.x + 0.5 * h * k1.x;
    t.v = s.v + 0.5 * h * k1.v;
    const TraceState<D> k2 = rhs(t);
    t.x = s.x + 0.5 * h * k2.x;
    t.v = s.v + 0.5 * h * k2.v;
    const TraceState<D> k3 = rhs(t);
    t.x = s.x + h * k3.x;
    t.v = s.v + h * k3.v;
    const TraceState<D> k4 = rhs(t);
    TraceState<D> out;
    out.x = s.x + (h / 6.0) * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
    out.v = s.v + (h / 6.0) * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
    return out;
}

template <int D>
double oriented_jacobian(const FieldCase<D>& field, const TraceState<D>& s) {
    Mat<D> m;
    m.col(0) = field.frame(s.x).b;
    for (int c = 0; c < D - 1; ++c) m.col(c + 1) = s.v.col(c);
    return m.determinant();
}

}  // namespace detail

/// Trace the field line of b through `seed` (a point of the inflow boundary)
/// until it leaves the unit box, bisecting the final step onto the outflow
/// boundary.  The initial tangent sensitivity is the derivative of the inflow
/// parametrization: for the built-in cases the inflow face {x_0 = 0} is
/// parametrized by the remaining coordinates, so V(0) = [e_1 ... e_{D-1}].
template <int D>
FieldLine<D> trace_line(const FieldCase<D>& field, const Vec<D>& seed, TraceOptions opt = {}) {
    if (!(opt.h_ode > 0.0)) throw ConfigError("trace_line: step must be positive");
    if (detail::boundary_excess<D>(seed) > opt.tol) {
        throw GeometryError("trace_line: seed lies outside the domain");
    }
    const double budget = opt.length_budget > 0.0 ? opt.length_budget : 100.0 * std::sqrt(double(D));

    detail::TraceState<D> s;
    s.x = seed;
    s.v.setZero();
    for (int c = 0; c < D - 1; ++c) s.v(c + 1, c) = 1.0;

    FieldLine<D> line;
    line.seed = seed;
    auto push = [&](double xi, const detail::TraceState<D>& st) {
        LineSample<D> smp;
        smp.xi = xi;
        smp.x = st.x;
        smp.v = st.v;
        smp.jac = detail::oriented_jacobian(field, st);
        if (!(smp.jac > 0.0)) {
            throw GeometryError("trace_line: field-line Jacobian is not positive (coordinate map degenerates)");
        }
        line.samples.push_back(smp);
    };
    push(0.0, s);

    double xi = 0.0;
    while (true) {
        const detail::TraceState<D> next = detail::rk4_step(field, s, opt.h_ode);
        if (detail::boundary_excess<D>(next.x) > 0.0) {
            // Bisect the substep length t in (0, h_ode] to land on the boundary.
            double lo = 0.0, hi = opt.h_ode;
            detail::TraceState<D> hit = next;
            for (int it = 0; it < 200 && (hi - lo) > 0.25 * opt.tol; ++it) {
                const double mid = 0.5 * (lo + hi);
                const detail::TraceState<D> trial = detail::rk4_step(field, s, mid);
                if (detail::boundary_excess<D>(trial.x) > 0.0) {
                    hi = mid;
                    hit = trial;
                } else {
                    lo = mid;
                    hit = trial;
                }
            }
            const double t_exit = 0.5 * (lo + hi);
            hit = detail::rk4_step(field, s, t_exit);
            if (std::abs(detail::boundary_excess<D>(hit.x)) > 10.0 * opt.tol) {
                throw GeometryError("trace_line: exit bisection failed to converge");
            }
            if (t_exit > 0.25 * opt.tol) push(xi + t_exit, hit);
            line.exit_point = hit.x;
            line.length = xi + t_exit;
            break;
        }
        s = next;
        xi += opt.h_ode;
        push(xi, s);
        if (xi > budget) {
            throw GeometryError("trace_line: field line failed to exit within the length budget "
                                "(field may have closed or trapped lines)");
        }
    }
    if (line.samples.size() < 2) {
        throw GeometryError("trace_line: degenerate line with fewer than two samples");
    }
    return line;
}

namespace detail {

/// Integral over [a, b] of the quadratic interpolating (x0,f0),(x1,f1),(x2,f2).
inline double integrate_quadratic(double x0, double x1, double x2, double f0, double f1,
                                  double f2, double a, double b) {
    auto basis = [&](double p, double q, double den) {
        // antiderivative of (x-p)(x-q)/den evaluated on [a, b]
        auto prim = [&](double x) { return x * x * x / 3.0 - 0.5 * (p + q) * x * x + p * q * x; };
        return (prim(b) - prim(a)) / den;
    };
    return f0 * basis(x1, x2, (x0 - x1) * (x0 - x2)) + f1 * basis(x0, x2, (x1 - x0) * (x1 - x2)) +
           f2 * basis(x0, x1, (x2 - x0) * (x2 - x1));
}

/// Composite quadratic (Simpson-like) integration of sampled values over the
/// sample abscissae; handles the non-uniform final interval.
inline double integrate_samples(const std::vector<double>& xi, const std::vector<double>& f) {
    const std::size_t k = xi.size() - 1;  // number of intervals
    if (k == 0) return 0.0;
    if (k == 1) return 0.5 * (xi[1] - xi[0]) * (f[0] + f[1]);
    double total = 0.0;
    std::size_t i = 0;
    while (k - i >= 2) {
        total += integrate_quadratic(xi[i], xi[i + 1], xi[i + 2], f[i], f[i + 1], f[i + 2],
                                     xi[i], xi[i + 2]);
        i += 2;
    }
    if (i < k) {
        // one interval left: integrate the quadratic through the last three
        // samples over that final interval only
        total += integrate_quadratic(xi[k - 2], xi[k - 1], xi[k], f[k - 2], f[k - 1], f[k],
                                     xi[k - 1], xi[k]);
    }
    return total;
}

}  // namespace detail

/// Weighted average of g along a traced line: int g J dxi / int J dxi.  This
/// is the value the L2-orthogonal projection onto line-constant functions
/// takes everywhere on the line.  Exact (up to roundoff) when g is constant
/// along the line, because numerator and denominator share the quadrature.
template <int D>
double line_average(const FieldLine<D>& line, const std::function<double(const Vec<D>&)>& g) {
    if (line.samples.size() < 2) throw ConfigError("line_average: empty line");
    std::vector<double> xi, num, den;
    xi.reserve(line.samples.size());
    num.reserve(line.samples.size());
    den.reserve(line.samples.size());
    for (const auto& s : line.samples) {
        xi.push_back(s.xi);
        const double gv = g(s.x);
        num.push_back(gv * s.jac);
        den.push_back(s.jac);
    }
    const double bottom = detail::integrate_samples(xi, den);
    if (!(bottom > 0.0)) throw GeometryError("line_average: nonpositive line measure");
    return detail::integrate_samples(xi, num) / bottom;
}

// ---------------------------------------------------------------------------
// Solution audit
// ---------------------------------------------------------------------------

template <int D>
struct LineAudit {
    Vec<D> seed = Vec<D>::Zero();
    double length = 0.0;
    double p_oscillation = 0.0;   // max - min of p_h along the line
    double q_average = 0.0;       // weighted line average of q_h
};

template <int D>
struct AuditReport {
    int n_lines = 0;
    double max_p_oscillation = 0.0;
    double max_abs_q_average = 0.0;
    double p_l2 = 0.0;            // ||p_h||_L2 over the domain
    double q_l2 = 0.0;            // ||q_h||_L2 over the domain
    double pw_constant = 0.0;     // ||q - Pq|| / ||b.grad q|| over the traced lines
    std::vector<LineAudit<D>> lines;
};

/// Trace `n_lines` lines from equispaced inflow seeds (midpoint offsets on
/// the {x_0 = 0} face; in 3D a ceil(sqrt(n))^2 tensor grid of seeds is used)
/// and audit the macro/fluctuation parts of a solved system: oscillation of
/// p_h along each line, weighted line averages of q_h, and an estimate of
/// the Poincare-Wirtinger constant linking ||q - Pq|| to ||b.grad q||.
template <int D>
AuditReport<D> audit_solution(const TensorGrid<D>& grid, const VecX& p_coeffs, const VecX& q_coeffs,
                              const FieldCase<D>& field, int n_lines, TraceOptions opt = {}) {
    if (n_lines < 1) throw ConfigError("audit_solution: need at least one line");
    if (p_coeffs.size() != grid.node_count() || q_coeffs.size() != grid.node_count()) {
        throw ConfigError("audit_solution: coefficient vectors do not match grid");
    }
    std::vector<Vec<D>> seeds;
    if constexpr (D == 2) {
        for (int k = 0; k < n_lines; ++k) {
            seeds.push_back(Vec<2>{0.0, (k + 0.5) / n_lines});
        }
    } else {
        const int m = std::max(2, static_cast<int>(std::ceil(std::sqrt(double(n_lines)))));
        for (int j = 0; j < m; ++j) {
            for (int k = 0; k < m; ++k) {
                seeds.push_back(Vec<3>{0.0, (j + 0.5) / m, (k + 0.5) / m});
            }
        }
    }

    AuditReport<D> report;
    report.n_lines = static_cast<int>(seeds.size());
    auto zero_fn = [](const Vec<D>&) { return 0.0; };
    auto zero_grad = [](const Vec<D>&) { return Vec<D>::Zero().eval(); };
    report.p_l2 = error_norms<D>(grid, p_coeffs, zero_fn, zero_grad).l2_abs;
    report.q_l2 = error_norms<D>(grid, q_coeffs, zero_fn, zero_grad).l2_abs;

    double pw_num = 0.0, pw_den = 0.0;
    for (const auto& seed : seeds) {
        const FieldLine<D> line = trace_line(field, seed, opt);
        LineAudit<D> la;
        la.seed = seed;
        la.length = line.length;

        double pmin = std::numeric_limits<double>::infinity();
        double pmax = -pmin;
        for (const auto& s : line.samples) {
            const double pv = eval_fe(grid, p_coeffs, s.x);
            pmin = std::min(pmin, pv);
            pmax = std::max(pmax, pv);
        }
        la.p_oscillation = pmax - pmin;

        auto q_fn = [&](const Vec<D>& x) { return eval_fe(grid, q_coeffs, x); };
        la.q_average = line_average<D>(line, q_fn);

        // Poincare-Wirtinger pieces: int (q - qbar)^2 J dxi and int (b.grad q)^2 J dxi
        std::vector<double> xi, fluct, par;
        for (const auto& s : line.samples) {
            xi.push_back(s.xi);
            const double dq = eval_fe(grid, q_coeffs, s.x) - la.q_average;
            fluct.push_back(dq * dq * s.jac);
            const Vec<D> gq = eval_fe_grad(grid, q_coeffs, s.x);
            const double bg = field.frame(s.x).b.dot(gq);
            par.push_back(bg * bg * s.jac);
        }
        pw_num += detail::integrate_samples(xi, fluct);
        pw_den += detail::integrate_samples(xi, par);

        report.max_p_oscillation = std::max(report.max_p_oscillation, la.p_oscillation);
        report.max_abs_q_average = std::max(report.max_abs_q_average, std::abs(la.q_average));
        report.lines.push_back(la);
    }
    report.pw_constant = pw_den > 0.0 ? std::sqrt(pw_num / pw_den)
                                      : std::numeric_limits<double>::infinity();
    return report;
}

}  // namespace apfem
