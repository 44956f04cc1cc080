// Direction fields: frozen point values, unit normalization, closed-form
// Jacobians vs. finite differences, divergence-free property, and the
// parallel/perpendicular splitter.
#include <gtest/gtest.h>

#include <apfem/field.hpp>

#include <cmath>
#include <numbers>
#include <random>

namespace {

using namespace apfem;

constexpr double kPi = std::numbers::pi;

TEST(Field, UniformFrames) {
    UniformFieldX<2> fx;
    const auto f = fx.frame(Vec<2>(0.3, 0.7));
    EXPECT_DOUBLE_EQ(f.b[0], 1.0);
    EXPECT_DOUBLE_EQ(f.b[1], 0.0);
    EXPECT_DOUBLE_EQ(f.jac_b.norm(), 0.0);
    EXPECT_DOUBLE_EQ(f.div_b, 0.0);

    UniformFieldY2 fy;
    const auto g = fy.frame(Vec<2>(0.5, 0.25));
    EXPECT_DOUBLE_EQ(g.b[0], 0.0);
    EXPECT_DOUBLE_EQ(g.b[1], 1.0);

    UniformFieldX<3> f3;
    const auto h = f3.frame(Vec<3>(0.1, 0.2, 0.3));
    EXPECT_DOUBLE_EQ(h.b[0], 1.0);
    EXPECT_DOUBLE_EQ(h.b[1], 0.0);
    EXPECT_DOUBLE_EQ(h.b[2], 0.0);
    EXPECT_DOUBLE_EQ(h.jac_b.norm(), 0.0);
}

TEST(Field, VariablePointValues) {
    // B = (alpha(2y-1)cos(m pi x) + pi, m pi alpha (y^2-y) sin(m pi x)).
    VariableField2 field(2.0, 1);
    {
        const auto f = field.frame(Vec<2>(0.0, 0.0));
        EXPECT_NEAR(f.B[0], kPi - 2.0, 1e-14);
        EXPECT_NEAR(f.B[1], 0.0, 1e-14);
        EXPECT_NEAR(f.b[0], 1.0, 1e-14);
        EXPECT_NEAR(f.b[1], 0.0, 1e-14);
    }
    {
        // At (1/2,1/2): B_x = 0*cos + pi = pi, B_y = pi*2*(-1/4)*1 = -pi/2.
        const auto f = field.frame(Vec<2>(0.5, 0.5));
        EXPECT_NEAR(f.B[0], kPi, 1e-14);
        EXPECT_NEAR(f.B[1], -kPi / 2.0, 1e-14);
        const double inv = 1.0 / std::sqrt(5.0);
        EXPECT_NEAR(f.b[0], 2.0 * inv, 1e-14);
        EXPECT_NEAR(f.b[1], -inv, 1e-14);
    }
}

TEST(Field, UnitNormAndLowerBound) {
    VariableField2 field(2.0, 1);
    std::mt19937 rng(20240817);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 1000; ++k) {
        const Vec<2> x(u(rng), u(rng));
        const auto f = field.frame(x);
        EXPECT_NEAR(f.b.norm(), 1.0, 1e-14);
        EXPECT_GE(f.B[0], kPi - 2.0 - 1e-12);  // field never turns back
    }
}

TEST(Field, DivergenceFreeRawField) {
    VariableField2 field(2.0, 1);
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(0.01, 0.99);
    const double d = 1e-5;
    for (int k = 0; k < 1000; ++k) {
        const Vec<2> x(u(rng), u(rng));
        double div = 0.0;
        for (int a = 0; a < 2; ++a) {
            Vec<2> xp = x, xm = x;
            xp[a] += d;
            xm[a] -= d;
            Vec<2> bp, bm;
            Mat<2> j;
            field.raw(xp, bp, j);
            field.raw(xm, bm, j);
            div += (bp[a] - bm[a]) / (2.0 * d);
        }
        Vec<2> b;
        Mat<2> j;
        field.raw(x, b, j);
        EXPECT_LE(std::abs(div), 1e-6 * b.norm());
    }
}

TEST(Field, UnitJacobianMatchesFiniteDifference) {
    VariableField2 field(2.0, 1);
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> u(0.05, 0.95);

    auto fd_jac = [&](const Vec<2>& x, double d) {
        Mat<2> j;
        for (int a = 0; a < 2; ++a) {
            Vec<2> xp = x, xm = x;
            xp[a] += d;
            xm[a] -= d;
            const Vec<2> diff = field.unit_b(xp) - field.unit_b(xm);
            j(0, a) = diff[0] / (2.0 * d);
            j(1, a) = diff[1] / (2.0 * d);
        }
        return j;
    };

    for (int k = 0; k < 20; ++k) {
        const Vec<2> x(u(rng), u(rng));
        const auto f = field.frame(x);
        // Absolute agreement at a small step...
        EXPECT_LE((f.jac_b - fd_jac(x, 1e-5)).norm(), 1e-8);
        // ...and O(d^2) truncation: halving d divides the FD error by ~4.
        const double e1 = (f.jac_b - fd_jac(x, 1e-3)).norm();
        const double e2 = (f.jac_b - fd_jac(x, 5e-4)).norm();
        if (e1 > 1e-12) {
            EXPECT_GE(e1 / e2, 3.4);
            EXPECT_LE(e1 / e2, 4.6);
        }
        EXPECT_NEAR(f.div_b, f.jac_b.trace(), 1e-15);
    }
}

TEST(Field, VanishingFieldThrows) {
    class ZeroField final : public FieldCase<2> {
    public:
        std::string name() const override { return "zero"; }
        void raw(const Vec<2>&, Vec<2>& B, Mat<2>& jac) const override {
            B.setZero();
            jac.setZero();
        }
    } zero;
    EXPECT_THROW(zero.frame(Vec<2>(0.5, 0.5)), GeometryError);
}

TEST(Field, SplitParallelPerp) {
    Vec<2> vp, vq;
    split_parallel_perp<2>(Vec<2>(3, 4), Vec<2>(1, 0), vp, vq);
    EXPECT_DOUBLE_EQ(vp[0], 3.0);
    EXPECT_DOUBLE_EQ(vp[1], 0.0);
    EXPECT_DOUBLE_EQ(vq[0], 0.0);
    EXPECT_DOUBLE_EQ(vq[1], 4.0);

    const double s = 1.0 / std::sqrt(2.0);
    split_parallel_perp<2>(Vec<2>(1, 0), Vec<2>(s, s), vp, vq);
    EXPECT_NEAR(vp[0], 0.5, 1e-15);
    EXPECT_NEAR(vp[1], 0.5, 1e-15);
    EXPECT_NEAR(vq[0], 0.5, 1e-15);
    EXPECT_NEAR(vq[1], -0.5, 1e-15);

    const Vec<2> b(s, -s);
    split_parallel_perp<2>(b, b, vp, vq);
    EXPECT_NEAR((vp - b).norm(), 0.0, 1e-15);
    EXPECT_NEAR(vq.norm(), 0.0, 1e-15);
}

TEST(Field, DiffusionValidation) {
    Diffusion<2> good;
    EXPECT_NO_THROW(good.validate());

    Diffusion<2> bad_par;
    bad_par.a_par = [](const Vec<2>&) { return -1.0; };
    EXPECT_THROW(bad_par.validate(), ConfigError);

    Diffusion<2> bad_sym;
    bad_sym.a_perp = [](const Vec<2>&) {
        Mat<2> m;
        m << 1.0, 0.5, -0.5, 1.0;
        return m;
    };
    EXPECT_THROW(bad_sym.validate(), ConfigError);

    Diffusion<2> bad_pd;
    bad_pd.a_perp = [](const Vec<2>&) {
        Mat<2> m;
        m << 1.0, 0.0, 0.0, -2.0;
        return m;
    };
    EXPECT_THROW(bad_pd.validate(), ConfigError);
}

}  // namespace
