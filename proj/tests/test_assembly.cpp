// FEM assembly: matrices vs. tensor-product and dense-loop oracles, load
// vectors, error norms against closed forms, and point evaluation.
#include <gtest/gtest.h>

#include <apfem/assemble.hpp>
#include <apfem/cases.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

namespace {

using namespace apfem;

constexpr double kPi = std::numbers::pi;

// 1D Q2 mass/stiffness on [0,1] with n intervals (n/2 elements), assembled
// with the same 3-point rule but by an independent dense loop.
void build_1d(int n, Eigen::MatrixXd& mass, Eigen::MatrixXd& stiff) {
    const double h = 1.0 / n;
    mass = Eigen::MatrixXd::Zero(n + 1, n + 1);
    stiff = Eigen::MatrixXd::Zero(n + 1, n + 1);
    for (int e = 0; e < n / 2; ++e) {
        for (int q = 0; q < Gauss3::n; ++q) {
            const double w = Gauss3::wt[q] * h;  // map [-1,1] -> [x0, x0+2h]
            for (int a = 0; a < 3; ++a) {
                for (int b = 0; b < 3; ++b) {
                    const int ga = 2 * e + a, gb = 2 * e + b;
                    mass(ga, gb) += w * shape1d(a, Gauss3::xi[q]) * shape1d(b, Gauss3::xi[q]);
                    stiff(ga, gb) +=
                        Gauss3::wt[q] / h * dshape1d(a, Gauss3::xi[q]) * dshape1d(b, Gauss3::xi[q]);
                }
            }
        }
    }
}

TEST(Assembly, ParallelMatrixIsTensorProductForAlignedField) {
    const int n = 6;
    TensorGrid<2> g(n);
    UniformFieldX<2> field;
    Diffusion<2> diff;
    const SpMat a_par = assemble_form(g, field, diff, FormKind::parallel);

    Eigen::MatrixXd m1, s1;
    build_1d(n, m1, s1);
    const Eigen::MatrixXd dense = Eigen::MatrixXd(a_par);
    const int npa = n + 1;
    ASSERT_EQ(dense.rows(), npa * npa);
    double max_diff = 0.0;
    for (int ix = 0; ix < npa; ++ix) {
        for (int iy = 0; iy < npa; ++iy) {
            for (int jx = 0; jx < npa; ++jx) {
                for (int jy = 0; jy < npa; ++jy) {
                    const double expect = s1(ix, jx) * m1(iy, jy);
                    const double got = dense(ix + npa * iy, jx + npa * jy);
                    max_diff = std::max(max_diff, std::abs(got - expect));
                }
            }
        }
    }
    EXPECT_LE(max_diff, 1e-13 * dense.cwiseAbs().maxCoeff());
}

TEST(Assembly, ParallelKernelContainsConstants) {
    TensorGrid<2> g(8);
    VariableField2 field(2.0, 1);
    Diffusion<2> diff;
    const SpMat a_par = assemble_form(g, field, diff, FormKind::parallel);
    const VecX ones = VecX::Ones(a_par.rows());
    EXPECT_LE((a_par * ones).lpNorm<Eigen::Infinity>(), 1e-13 * inf_norm(a_par));
}

TEST(Assembly, MatricesSymmetricAndDefinite) {
    TensorGrid<2> g(4);
    VariableField2 field(2.0, 1);
    Diffusion<2> diff;
    for (FormKind kind : {FormKind::mass, FormKind::parallel, FormKind::perpendicular}) {
        const SpMat a = assemble_form(g, field, diff, kind);
        const Eigen::MatrixXd d = Eigen::MatrixXd(a);
        EXPECT_LE((d - d.transpose()).cwiseAbs().maxCoeff(), 1e-13 * d.cwiseAbs().maxCoeff());
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (d + d.transpose()));
        if (kind == FormKind::mass) {
            EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);  // positive definite
        } else {
            EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12 * es.eigenvalues().maxCoeff());
        }
    }
    // Mass entries sum to |Omega| = 1 by partition of unity.
    const SpMat mass = assemble_form(g, field, diff, FormKind::mass);
    const VecX ones = VecX::Ones(mass.rows());
    EXPECT_NEAR(ones.dot(mass * ones), 1.0, 1e-13);
}

TEST(Assembly, LoadVectorIntegralsAndOracle) {
    TensorGrid<2> g(4);
    const VecX load1 = assemble_load<2>(g, [](const Vec<2>&) { return 1.0; });
    EXPECT_NEAR(load1.sum(), 1.0, 1e-13);  // sum_a int theta_a f = int f

    const VecX loadx = assemble_load<2>(g, [](const Vec<2>& x) { return x[0]; });
    EXPECT_NEAR(loadx.sum(), 0.5, 1e-13);

    // Dense-loop oracle sharing only the quadrature rule, for the real forcing.
    const auto uni = make_case_2d("uniform2d");
    auto f = [&](const Vec<2>& x) { return uni->forcing(x, 1.0); };
    const VecX load = assemble_load<2>(g, f);

    const int n = g.n(), npa = n + 1;
    const double h = g.h();
    VecX oracle = VecX::Zero(npa * npa);
    for (int ex = 0; ex < n / 2; ++ex) {
        for (int ey = 0; ey < n / 2; ++ey) {
            for (int qx = 0; qx < 3; ++qx) {
                for (int qy = 0; qy < 3; ++qy) {
                    const Vec<2> xq(2 * ex * h + (Gauss3::xi[qx] + 1.0) * h,
                                    2 * ey * h + (Gauss3::xi[qy] + 1.0) * h);
                    const double w = Gauss3::wt[qx] * Gauss3::wt[qy] * h * h;
                    for (int a = 0; a < 3; ++a) {
                        for (int b = 0; b < 3; ++b) {
                            const int node = (2 * ex + a) + npa * (2 * ey + b);
                            oracle[node] += w * f(xq) * shape1d(a, Gauss3::xi[qx]) *
                                            shape1d(b, Gauss3::xi[qy]);
                        }
                    }
                }
            }
        }
    }
    EXPECT_LE((load - oracle).lpNorm<Eigen::Infinity>(),
              1e-13 * oracle.lpNorm<Eigen::Infinity>());
}

TEST(Assembly, ErrorNormsClosedForm) {
    TensorGrid<2> g(16);
    const VecX zero = VecX::Zero(g.node_count());
    const auto norms = error_norms<2>(
        g, zero, [](const Vec<2>& x) { return std::sin(kPi * x[1]); },
        [](const Vec<2>& x) { return Vec<2>(0.0, kPi * std::cos(kPi * x[1])); });
    // ||sin(pi y)||_L2 = sqrt(1/2); full H1 norm adds pi^2/2 under the root.
    EXPECT_NEAR(norms.l2_abs, std::sqrt(0.5), 1e-7);
    EXPECT_NEAR(norms.h1_abs, std::sqrt(0.5 + kPi * kPi / 2.0), 1e-6);
    EXPECT_TRUE(norms.zero_denominator);  // u_h = 0 has no norm to divide by
    EXPECT_TRUE(std::isnan(norms.l2_rel));
    EXPECT_TRUE(std::isnan(norms.h1_rel));
}

TEST(Assembly, BiquadraticReproduction) {
    // Q2 reproduces polynomials of degree <= 2 per axis exactly.
    TensorGrid<2> g(6);
    auto exact = [](const Vec<2>& x) { return x[0] * x[0] + x[1]; };
    auto grad = [](const Vec<2>& x) { return Vec<2>(2.0 * x[0], 1.0); };
    VecX coeffs(g.node_count());
    for (Index id = 0; id < g.node_count(); ++id) {
        coeffs[id] = exact(g.node_coord(g.node_index(id)));
    }
    const auto norms = error_norms<2>(g, coeffs, exact, grad);
    EXPECT_LE(norms.l2_abs, 1e-13);
    EXPECT_LE(norms.h1_abs, 1e-13);
    EXPECT_LE(norms.l2_rel, 1e-12);

    std::mt19937 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 50; ++k) {
        const Vec<2> x(u(rng), u(rng));
        EXPECT_NEAR(eval_fe<2>(g, coeffs, x), exact(x), 1e-13);
        EXPECT_LE((eval_fe_grad<2>(g, coeffs, x) - grad(x)).norm(), 1e-12);
    }
    // Closed-domain corners are valid evaluation points.
    EXPECT_NEAR(eval_fe<2>(g, coeffs, Vec<2>(1.0, 1.0)), 2.0, 1e-13);
    EXPECT_NEAR(eval_fe<2>(g, coeffs, Vec<2>(0.0, 0.0)), 0.0, 1e-13);
}

TEST(Assembly, ThreeDimensionalSanity) {
    TensorGrid<3> g(4);
    UniformFieldX<3> field;
    Diffusion<3> diff;
    const SpMat mass = assemble_form(g, field, diff, FormKind::mass);
    const SpMat a_par = assemble_form(g, field, diff, FormKind::parallel);
    const VecX ones = VecX::Ones(mass.rows());
    EXPECT_NEAR(ones.dot(mass * ones), 1.0, 1e-13);
    EXPECT_LE((a_par * ones).lpNorm<Eigen::Infinity>(), 1e-13 * inf_norm(a_par));

    // Interpolation exactness in 3D as well.
    auto exact = [](const Vec<3>& x) { return x[0] * x[1] + x[2] * x[2]; };
    VecX coeffs(g.node_count());
    for (Index id = 0; id < g.node_count(); ++id) {
        coeffs[id] = exact(g.node_coord(g.node_index(id)));
    }
    EXPECT_NEAR(eval_fe<3>(g, coeffs, Vec<3>(0.3, 0.6, 0.9)), exact(Vec<3>(0.3, 0.6, 0.9)), 1e-13);
}

TEST(Assembly, ErrorNormsRejectWrongSize) {
    TensorGrid<2> g(4);
    const VecX bad = VecX::Zero(7);
    EXPECT_THROW(error_norms<2>(
                     g, bad, [](const Vec<2>&) { return 0.0; },
                     [](const Vec<2>&) { return Vec<2>::Zero().eval(); }),
                 ConfigError);
}

}  // namespace
