/// @file grid.hpp
/// @brief Homogeneous tensor-product grid on the unit square/cube, node and
///        element indexing, and boundary classification against a direction
///        field.
///
/// Nodes sit at x_i = i/N per axis, i = 0..N with N even.  One finite element
/// covers a 2x2 (2x2x2 in 3D) patch of grid intervals, carrying the tensor Q2
/// nodes {2e, 2e+1, 2e+2} per axis.  Node ids are lexicographic, axis 0
/// fastest.
#pragma once

#include <apfem/types.hpp>

#include <array>
#include <string>
#include <vector>

namespace apfem {

/// Boundary classification of a grid node against the direction field b:
///   dirichlet : node on a face where b is tangential (|b.n| <= tau)
///   inflow    : node on a face where b enters the domain (b.n < -tau)
///   outflow   : node on a face where b leaves the domain (b.n > tau)
/// A node on several faces takes `dirichlet` if any incident face is
/// tangential (corner precedence).
enum class BoundaryTag { interior, dirichlet, inflow, outflow };

inline const char* to_string(BoundaryTag t) {
    switch (t) {
        case BoundaryTag::interior: return "interior";
        case BoundaryTag::dirichlet: return "dirichlet";
        case BoundaryTag::inflow: return "inflow";
        case BoundaryTag::outflow: return "outflow";
    }
    return "?";
}

template <int D>
class TensorGrid {
    static_assert(D == 2 || D == 3, "TensorGrid supports D = 2 or 3");

public:
    explicit TensorGrid(int n_intervals) : n_(n_intervals) {
        if (n_ < 2) throw ConfigError("grid: N must be >= 2");
        if (n_ % 2 != 0) throw ConfigError("grid: N must be even (elements span 2x2 interval patches)");
        h_ = 1.0 / static_cast<double>(n_);
    }

    int n() const { return n_; }                       ///< intervals per axis
    double h() const { return h_; }                    ///< grid spacing 1/N
    int nodes_per_axis() const { return n_ + 1; }
    int elems_per_axis() const { return n_ / 2; }

    Index node_count() const {
        Index c = 1;
        for (int d = 0; d < D; ++d) c *= nodes_per_axis();
        return c;
    }
    Index elem_count() const {
        Index c = 1;
        for (int d = 0; d < D; ++d) c *= elems_per_axis();
        return c;
    }

    /// Lexicographic node id from per-axis indices (axis 0 fastest).
    Index node_id(const std::array<int, D>& idx) const {
        Index id = 0;
        for (int d = D - 1; d >= 0; --d) id = id * nodes_per_axis() + idx[d];
        return id;
    }

    std::array<int, D> node_index(Index id) const {
        std::array<int, D> idx{};
        for (int d = 0; d < D; ++d) {
            idx[d] = static_cast<int>(id % nodes_per_axis());
            id /= nodes_per_axis();
        }
        return idx;
    }

    Vec<D> node_coord(const std::array<int, D>& idx) const {
        Vec<D> x;
        for (int d = 0; d < D; ++d) x[d] = idx[d] * h_;
        return x;
    }

    Index elem_id(const std::array<int, D>& e) const {
        Index id = 0;
        for (int d = D - 1; d >= 0; --d) id = id * elems_per_axis() + e[d];
        return id;
    }

    std::array<int, D> elem_index(Index id) const {
        std::array<int, D> e{};
        for (int d = 0; d < D; ++d) {
            e[d] = static_cast<int>(id % elems_per_axis());
            id /= elems_per_axis();
        }
        return e;
    }

    /// Lower-left(-front) grid node index of element e: per-axis 2*e.
    std::array<int, D> elem_origin(const std::array<int, D>& e) const {
        std::array<int, D> o{};
        for (int d = 0; d < D; ++d) o[d] = 2 * e[d];
        return o;
    }

private:
    int n_;
    double h_;
};

/// Per-node tags plus the constrained-DOF masks of the two discrete spaces:
///   V_h: zero on the Dirichlet boundary;
///   L_h: zero on the inflow *and* Dirichlet boundaries (multiplier space).
template <int D>
struct BoundaryInfo {
    std::vector<BoundaryTag> tag;       // size node_count
    std::vector<char> constrained_v;    // 1 where V_h dofs are pinned
    std::vector<char> constrained_l;    // 1 where L_h dofs are pinned
    Index free_v = 0;
    Index free_l = 0;
};

/// Classify every node of `grid` against the unit direction field `b`.
/// `b` is any callable Vec<D> -> Vec<D> returning the *unit* field.
/// `tau` is the tangency tolerance on |b.n| (default 1e-12).
template <int D, class BFunc>
BoundaryInfo<D> classify_boundary(const TensorGrid<D>& grid, BFunc&& b, double tau = 1e-12) {
    BoundaryInfo<D> info;
    const Index nn = grid.node_count();
    info.tag.assign(static_cast<std::size_t>(nn), BoundaryTag::interior);
    info.constrained_v.assign(static_cast<std::size_t>(nn), 0);
    info.constrained_l.assign(static_cast<std::size_t>(nn), 0);

    const int last = grid.n();
    for (Index id = 0; id < nn; ++id) {
        const auto idx = grid.node_index(id);
        bool on_boundary = false;
        bool any_d = false, any_in = false, any_out = false;
        const Vec<D> x = grid.node_coord(idx);
        const Vec<D> bx = b(x);
        for (int d = 0; d < D; ++d) {
            for (int side = 0; side < 2; ++side) {
                if ((side == 0 && idx[d] != 0) || (side == 1 && idx[d] != last)) continue;
                on_boundary = true;
                const double bn = (side == 0) ? -bx[d] : bx[d];  // outward normal is -/+ e_d
                if (std::abs(bn) <= tau) {
                    any_d = true;
                } else if (bn < 0.0) {
                    any_in = true;
                } else {
                    any_out = true;
                }
            }
        }
        if (!on_boundary) continue;
        if (any_d) {
            info.tag[id] = BoundaryTag::dirichlet;
        } else if (any_in && any_out) {
            throw InternalError("classify_boundary: node sits on both inflow and outflow faces "
                                "with no tangential face; geometry not supported");
        } else if (any_in) {
            info.tag[id] = BoundaryTag::inflow;
        } else {
            info.tag[id] = BoundaryTag::outflow;
        }
        if (info.tag[id] == BoundaryTag::dirichlet) {
            info.constrained_v[id] = 1;
            info.constrained_l[id] = 1;
        } else if (info.tag[id] == BoundaryTag::inflow) {
            info.constrained_l[id] = 1;
        }
    }
    for (Index id = 0; id < nn; ++id) {
        if (!info.constrained_v[id]) ++info.free_v;
        if (!info.constrained_l[id]) ++info.free_l;
    }
    return info;
}

}  // namespace apfem
