/// @file system.hpp
/// @brief The three formulations of the anisotropic problem as block sparse
///        systems: direct singular-perturbation solve (P), the epsilon->0
///        limit with a Lagrange multiplier (L), and the asymptotic-preserving
///        five-field reformulation (AP).
///
/// All blocks share the matrices assembled over the full nodal space:
///   A0 <-> a_par,  A1 <-> a_perp,  C <-> mass.
/// Block layouts (rhs on the right):
///   P : [ A0 + eps A1 ] (phi)                          = eps F
///   L : [ A1  A0 ] (phi)    = F
///       [ A0   0 ] (lambda) = 0
///   AP: [ A1      A0   A1        0   0  ] (p)      = F
///       [ A0      0    0         0   0  ] (lambda) = 0
///       [ eps A1  0    A0+eps A1 C   0  ] (q)      = eps F
///       [ 0       0    C         0   A0 ] (l)      = 0
///       [ 0       0    0         A0  0  ] (mu)     = 0
/// Unknowns p, q, l live in V_h (zero on the Dirichlet boundary); lambda, mu
/// live in L_h (zero on inflow + Dirichlet).  Constraints are applied by
/// zeroing the global row and column of each pinned dof and placing a unit
/// entry at its global diagonal position (also on the zero diagonal blocks of
/// the multipliers), with zero right-hand side.
#pragma once

#include <apfem/assemble.hpp>
#include <apfem/cases.hpp>
#include <apfem/field.hpp>
#include <apfem/grid.hpp>
#include <apfem/linalg.hpp>
#include <apfem/sparse.hpp>
#include <apfem/types.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

namespace apfem {

enum class Model { P, L, AP };

inline const char* to_string(Model m) {
    switch (m) {
        case Model::P: return "P";
        case Model::L: return "L";
        case Model::AP: return "AP";
    }
    return "?";
}

inline Model model_from_string(const std::string& s) {
    if (s == "P" || s == "p") return Model::P;
    if (s == "L" || s == "l") return Model::L;
    if (s == "AP" || s == "ap") return Model::AP;
    throw ConfigError("unknown model '" + s + "' (expected p, l or ap)");
}

/// Everything assembled once per (grid, field, diffusion): the three shared
/// matrices and the boundary masks.
template <int D>
struct Operators {
    TensorGrid<D> grid;
    BoundaryInfo<D> bc;
    SpMat a_par;   // A0
    SpMat a_perp;  // A1
    SpMat mass;    // C
};

template <int D>
Operators<D> build_operators(const TensorGrid<D>& grid, const FieldCase<D>& field,
                             const Diffusion<D>& diff) {
    Operators<D> ops{grid, classify_boundary(grid, [&](const Vec<D>& x) { return field.unit_b(x); }),
                     SpMat(), SpMat(), SpMat()};
    ops.a_par = assemble_form(grid, field, diff, FormKind::parallel);
    ops.a_perp = assemble_form(grid, field, diff, FormKind::perpendicular);
    ops.mass = assemble_form(grid, field, diff, FormKind::mass);
    return ops;
}

struct BlockSystem {
    Model model = Model::P;
    double eps = 0.0;
    Index block_size = 0;
    std::vector<std::string> block_names;
    SpMat matrix;
    VecX rhs;
    std::vector<char> constrained;  // global mask, size = matrix.rows()

    Index rows() const { return matrix.rows(); }
    Index nnz() const { return matrix.nonZeros(); }
};

namespace detail {

/// One term of a block pattern: scale * M placed at block (br, bc).
struct BlockTerm {
    int br, bc;
    const SpMat* m;
    double scale;
};

/// Assemble the constrained global matrix from block terms.  Entries whose
/// global row or column is pinned are dropped; pinned dofs get a unit
/// diagonal; pinned rhs entries are zeroed.
inline BlockSystem assemble_block_system(Model model, double eps, Index block_size,
                                         std::vector<std::string> names,
                                         const std::vector<BlockTerm>& terms,
                                         const std::vector<const std::vector<char>*>& mask_of_block,
                                         const std::vector<std::pair<int, const VecX*>>& rhs_terms,
                                         const std::vector<double>& rhs_scales) {
    const int nb = static_cast<int>(names.size());
    const Index n_total = block_size * nb;

    BlockSystem sys;
    sys.model = model;
    sys.eps = eps;
    sys.block_size = block_size;
    sys.block_names = std::move(names);
    sys.constrained.assign(static_cast<std::size_t>(n_total), 0);
    for (int b = 0; b < nb; ++b) {
        const auto& mask = *mask_of_block[b];
        for (Index i = 0; i < block_size; ++i) {
            if (mask[static_cast<std::size_t>(i)]) sys.constrained[static_cast<std::size_t>(b * block_size + i)] = 1;
        }
    }

    std::size_t nnz_estimate = 0;
    for (const auto& t : terms) nnz_estimate += static_cast<std::size_t>(t.m->nonZeros());
    TripletBuilder builder(n_total, n_total);
    builder.reserve(nnz_estimate + static_cast<std::size_t>(n_total));

    for (const auto& t : terms) {
        const auto& rmask = *mask_of_block[t.br];
        const auto& cmask = *mask_of_block[t.bc];
        const Index roff = static_cast<Index>(t.br) * block_size;
        const Index coff = static_cast<Index>(t.bc) * block_size;
        for (int k = 0; k < t.m->outerSize(); ++k) {
            for (SpMat::InnerIterator it(*t.m, k); it; ++it) {
                if (rmask[static_cast<std::size_t>(it.row())] || cmask[static_cast<std::size_t>(it.col())]) continue;
                builder.add(roff + it.row(), coff + it.col(), t.scale * it.value());
            }
        }
    }
    for (Index g = 0; g < n_total; ++g) {
        if (sys.constrained[static_cast<std::size_t>(g)]) builder.add(g, g, 1.0);
    }
    sys.matrix = builder.finalize();

    sys.rhs = VecX::Zero(n_total);
    for (std::size_t i = 0; i < rhs_terms.size(); ++i) {
        const int b = rhs_terms[i].first;
        const VecX& v = *rhs_terms[i].second;
        const auto& mask = *mask_of_block[b];
        for (Index j = 0; j < block_size; ++j) {
            if (!mask[static_cast<std::size_t>(j)]) sys.rhs[b * block_size + j] = rhs_scales[i] * v[j];
        }
    }
    return sys;
}

}  // namespace detail

/// Build the block system of `model` from shared operators and the load
/// vector F of the forcing (assembled unscaled; the builder applies the
/// epsilon scalings the formulation requires).
template <int D>
BlockSystem build_system(const Operators<D>& ops, const VecX& load, Model model, double eps) {
    if (load.size() != ops.grid.node_count()) {
        throw ConfigError("build_system: load vector does not match grid");
    }
    if ((model == Model::P || model == Model::AP) && !(eps > 0.0)) {
        throw ConfigError("build_system: eps must be positive for the P and AP formulations "
                          "(the limit model is the L formulation)");
    }
    const Index n = ops.grid.node_count();
    const auto& mv = ops.bc.constrained_v;
    const auto& ml = ops.bc.constrained_l;
    const SpMat* A0 = &ops.a_par;
    const SpMat* A1 = &ops.a_perp;
    const SpMat* C = &ops.mass;

    switch (model) {
        case Model::P: {
            return detail::assemble_block_system(model, eps, n, {"phi"},
                                                 {{0, 0, A0, 1.0}, {0, 0, A1, eps}},
                                                 {&mv}, {{0, &load}}, {eps});
        }
        case Model::L: {
            return detail::assemble_block_system(model, eps, n, {"phi", "lambda"},
                                                 {{0, 0, A1, 1.0}, {0, 1, A0, 1.0}, {1, 0, A0, 1.0}},
                                                 {&mv, &ml}, {{0, &load}}, {1.0});
        }
        case Model::AP: {
            return detail::assemble_block_system(
                model, eps, n, {"p", "lambda", "q", "l", "mu"},
                {
                    {0, 0, A1, 1.0}, {0, 1, A0, 1.0}, {0, 2, A1, 1.0},
                    {1, 0, A0, 1.0},
                    {2, 0, A1, eps}, {2, 2, A0, 1.0}, {2, 2, A1, eps}, {2, 3, C, 1.0},
                    {3, 2, C, 1.0}, {3, 4, A0, 1.0},
                    {4, 3, A0, 1.0},
                },
                {&mv, &ml, &mv, &mv, &ml}, {{0, &load}, {2, &load}}, {1.0, eps});
        }
    }
    throw InternalError("build_system: unreachable");
}

/// AP variant with the *defective* multiplier space of the ill-posedness
/// demonstration: lambda/mu pinned on the inflow boundary only, leaving the
/// Dirichlet-side multiplier dofs free.  The resulting matrix is exactly
/// rank-deficient.
template <int D>
BlockSystem build_illposed_variant(const Operators<D>& ops, const VecX& load, double eps) {
    if (!(eps > 0.0)) throw ConfigError("build_illposed_variant: eps must be positive");
    const Index n = ops.grid.node_count();
    std::vector<char> ml_bad(static_cast<std::size_t>(n), 0);
    for (Index i = 0; i < n; ++i) {
        ml_bad[static_cast<std::size_t>(i)] = (ops.bc.tag[static_cast<std::size_t>(i)] == BoundaryTag::inflow) ? 1 : 0;
    }
    const auto& mv = ops.bc.constrained_v;
    const SpMat* A0 = &ops.a_par;
    const SpMat* A1 = &ops.a_perp;
    const SpMat* C = &ops.mass;
    return detail::assemble_block_system(
        Model::AP, eps, n, {"p", "lambda", "q", "l", "mu"},
        {
            {0, 0, A1, 1.0}, {0, 1, A0, 1.0}, {0, 2, A1, 1.0},
            {1, 0, A0, 1.0},
            {2, 0, A1, eps}, {2, 2, A0, 1.0}, {2, 2, A1, eps}, {2, 3, C, 1.0},
            {3, 2, C, 1.0}, {3, 4, A0, 1.0},
            {4, 3, A0, 1.0},
        },
        {&mv, &ml_bad, &mv, &mv, &ml_bad}, {{0, &load}, {2, &load}}, {1.0, eps});
}

/// Solution fields pulled out of a solved block system.
struct Solution {
    Model model = Model::P;
    double eps = 0.0;
    VecX phi;     // P: the solve; L: phi block; AP: p + q
    VecX p, lambda, q, l, mu;
    double l_l2 = 0.0;         // ||l||_L2           (AP only)
    double lambda_par = 0.0;   // ||grad_par lambda|| (AP, L)
};

template <int D>
Solution extract_solution(const Operators<D>& ops, const BlockSystem& sys, const VecX& x) {
    if (x.size() != sys.rows()) throw InternalError("extract_solution: vector does not match system");
    const Index n = sys.block_size;
    auto block = [&](int b) { return x.segment(b * n, n); };

    Solution s;
    s.model = sys.model;
    s.eps = sys.eps;
    switch (sys.model) {
        case Model::P:
            s.phi = x;
            break;
        case Model::L:
            s.phi = block(0);
            s.lambda = block(1);
            break;
        case Model::AP:
            s.p = block(0);
            s.lambda = block(1);
            s.q = block(2);
            s.l = block(3);
            s.mu = block(4);
            s.phi = s.p + s.q;
            break;
    }
    if (s.l.size() > 0) {
        s.l_l2 = std::sqrt(std::max(0.0, s.l.dot(ops.mass * s.l)));
    }
    if (s.lambda.size() > 0) {
        s.lambda_par = std::sqrt(std::max(0.0, s.lambda.dot(ops.a_par * s.lambda)));
    }
    return s;
}

// ---------------------------------------------------------------------------
// Multiplier-space kernel of the ill-posed variant (uniform field along +y:
// inflow y = 0, Dirichlet sides x in {0,1})
// ---------------------------------------------------------------------------

enum class KernelSide { left, right };

/// 1D Q2 mass matrix on [0,1] with n intervals (dense; n+1 nodes).
inline Eigen::MatrixXd mass_matrix_1d(int n) {
    if (n < 2 || n % 2 != 0) throw ConfigError("mass_matrix_1d: n must be even and >= 2");
    const double h = 1.0 / n;
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n + 1, n + 1);
    // element [2e, 2e+2] has length 2h; local mass = (2h/30) [[4,2,-1],[2,16,2],[-1,2,4]]
    const double s = 2.0 * h / 30.0;
    const double loc[3][3] = {{4, 2, -1}, {2, 16, 2}, {-1, 2, 4}};
    for (int e = 0; e < n / 2; ++e) {
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) m(2 * e + a, 2 * e + b) += s * loc[a][b];
        }
    }
    return m;
}

/// Construct one kernel function of the defective multiplier space, for the
/// uniform +y field: lambda_h(x, y) = sum_i a_i theta_i(x) theta_j(y) with
/// M a = e, M the 1D cross-field mass matrix and e the unit vector at the
/// left or right boundary index.  Row index j must satisfy 1 <= j <= N
/// (row 0 is the inflow, where the defective space is still pinned).
/// Returns nodal coefficients over the full grid.
inline VecX construct_kernel(const TensorGrid<2>& grid, int j, KernelSide side) {
    const int n = grid.n();
    if (j < 1 || j > n) throw ConfigError("construct_kernel: row index out of range (need 1 <= j <= N)");
    const Eigen::MatrixXd m = mass_matrix_1d(n);
    VecX e = VecX::Zero(n + 1);
    e[side == KernelSide::left ? 0 : n] = 1.0;
    const VecX a = m.partialPivLu().solve(e);

    VecX lam = VecX::Zero(grid.node_count());
    for (int i = 0; i <= n; ++i) {
        lam[grid.node_id({i, j})] = a[i];
    }
    return lam;
}

}  // namespace apfem
