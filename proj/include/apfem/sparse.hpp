/// @file sparse.hpp
/// @brief Compressed sparse matrix storage and a coordinate-format builder.
///
/// Storage is column-compressed (Eigen).  The builder contract matters more
/// than the backend: duplicate insertions are summed on finalize and entries
/// that sum to exactly zero are dropped, so nonzero counts reported downstream
/// refer to genuinely stored entries.
#pragma once

#include <apfem/types.hpp>

#include <Eigen/Sparse>

#include <vector>

namespace apfem {

using SpMat = Eigen::SparseMatrix<double>;

class TripletBuilder {
public:
    TripletBuilder(Index rows, Index cols) : rows_(rows), cols_(cols) {
        if (rows <= 0 || cols <= 0) throw ConfigError("sparse builder: dimensions must be positive");
    }

    void reserve(std::size_t n) { trips_.reserve(n); }

    void add(Index r, Index c, double v) {
        if (r < 0 || r >= rows_ || c < 0 || c >= cols_) {
            throw InternalError("sparse builder: entry out of range");
        }
        trips_.emplace_back(static_cast<int>(r), static_cast<int>(c), v);
    }

    Index rows() const { return rows_; }
    Index cols() const { return cols_; }

    /// Sum duplicates, drop exact zeros, compress.
    SpMat finalize() const {
        SpMat m(static_cast<int>(rows_), static_cast<int>(cols_));
        m.setFromTriplets(trips_.begin(), trips_.end());
        m.prune([](const auto&, const auto&, const auto& v) { return v != 0.0; });
        m.makeCompressed();
        return m;
    }

private:
    Index rows_, cols_;
    std::vector<Eigen::Triplet<double>> trips_;
};

/// Max absolute row sum.
inline double inf_norm(const SpMat& a) {
    std::vector<double> row_sum(static_cast<std::size_t>(a.rows()), 0.0);
    for (int k = 0; k < a.outerSize(); ++k) {
        for (SpMat::InnerIterator it(a, k); it; ++it) {
            row_sum[static_cast<std::size_t>(it.row())] += std::abs(it.value());
        }
    }
    double m = 0.0;
    for (double s : row_sum) m = std::max(m, s);
    return m;
}

/// Number of structurally empty rows (used to refuse factorization early).
inline Index count_empty_rows(const SpMat& a) {
    std::vector<char> seen(static_cast<std::size_t>(a.rows()), 0);
    for (int k = 0; k < a.outerSize(); ++k) {
        for (SpMat::InnerIterator it(a, k); it; ++it) seen[static_cast<std::size_t>(it.row())] = 1;
    }
    Index empty = 0;
    for (char s : seen) {
        if (!s) ++empty;
    }
    return empty;
}

}  // namespace apfem
