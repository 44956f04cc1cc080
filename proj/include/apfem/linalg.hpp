/// @file linalg.hpp
/// @brief Sparse direct LU with row pivoting, pivot-magnitude statistics and
///        near-singularity reporting.
///
/// The factorization is supernodal LU with partial (row) pivoting and a
/// deterministic fill-reducing column ordering.  Pivot magnitudes are the
/// diagonal of U; a factorization whose smallest pivot falls at or below
/// 1e-13 times the largest is flagged near-singular.  Near-singular factors
/// can still be applied (back-substitution stays finite for nonzero pivots) —
/// that is deliberate: severely ill-conditioned systems are part of the
/// experiment matrix and their garbage solutions are the observable.  Only an
/// exactly zero pivot (or a structurally empty row) refuses to solve.
#pragma once

#include <apfem/sparse.hpp>
#include <apfem/types.hpp>

#include <Eigen/SparseLU>

#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>

namespace apfem {

/// Scaled residual ||Ax - b||_inf / (||A||_inf ||x||_inf + ||b||_inf).
inline double matvec_residual(const SpMat& a, const VecX& x, const VecX& b) {
    if (a.cols() != x.size() || a.rows() != b.size()) {
        throw ConfigError("matvec_residual: dimension mismatch");
    }
    const double num = (a * x - b).lpNorm<Eigen::Infinity>();
    const double den = inf_norm(a) * x.lpNorm<Eigen::Infinity>() + b.lpNorm<Eigen::Infinity>();
    if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return num / den;
}

struct SingularityReport {
    Index pivot_index = -1;    ///< column (in factor ordering) of the offending pivot
    double min_pivot = 0.0;
    double max_pivot = 0.0;
    bool exact_zero = false;   ///< factorization aborted on a zero pivot
    std::string detail;
};

enum class FactorStatus {
    ok,             ///< pivots healthy
    near_singular,  ///< min pivot <= 1e-13 * max pivot; solves still possible
    failed,         ///< zero pivot or empty row; solves refused
};

namespace detail {

/// Subclass purely to reach the protected supernodal store: the diagonal
/// blocks of U live inside it, which is how pivot magnitudes are recovered
/// (same walk the library's own determinant routines use).
class LuCore : public Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> {
public:
    struct PivotScan {
        double min_abs = std::numeric_limits<double>::infinity();
        double max_abs = 0.0;
        Index argmin = -1;
        bool any_zero = false;
    };

    PivotScan scan_pivots() const {
        PivotScan s;
        for (Index j = 0; j < static_cast<Index>(this->cols()); ++j) {
            double diag = 0.0;
            for (SCMatrix::InnerIterator it(m_Lstore, j); it; ++it) {
                if (it.index() == j) {
                    diag = it.value();
                    break;
                }
            }
            const double a = std::abs(diag);
            if (a < s.min_abs) {
                s.min_abs = a;
                s.argmin = j;
            }
            s.max_abs = std::max(s.max_abs, a);
            if (a == 0.0) s.any_zero = true;
        }
        return s;
    }
};

}  // namespace detail

/// Threshold separating an exactly rank-deficient system (the multiplier-space
/// kernel shows ratios near machine epsilon) from ill-conditioned but solvable
/// perturbation systems.
inline constexpr double kSingularPivotRatio = 1e-13;

class Factorization {
public:
    FactorStatus status() const { return status_; }
    bool solvable() const { return status_ != FactorStatus::failed; }
    double min_pivot() const { return min_pivot_; }
    double max_pivot() const { return max_pivot_; }
    double pivot_ratio() const { return max_pivot_ > 0.0 ? min_pivot_ / max_pivot_ : 0.0; }
    const std::optional<SingularityReport>& singularity() const { return report_; }
    double factor_seconds() const { return factor_seconds_; }
    Index rows() const { return rows_; }

    /// Back-substitution.  Throws on a failed factorization.
    VecX apply(const VecX& b) const {
        if (!solvable()) {
            throw InternalError("solve: factorization failed (" +
                                (report_ ? report_->detail : std::string("unknown")) + ")");
        }
        if (b.size() != rows_) throw ConfigError("solve: right-hand side size mismatch");
        return lu_->solve(b);
    }

private:
    friend Factorization factorize(const SpMat&);
    std::shared_ptr<detail::LuCore> lu_;
    FactorStatus status_ = FactorStatus::failed;
    std::optional<SingularityReport> report_;
    double min_pivot_ = 0.0;
    double max_pivot_ = 0.0;
    double factor_seconds_ = 0.0;
    Index rows_ = 0;
};

/// Factor a square sparse matrix.  Always returns; inspect status() /
/// singularity() for rank trouble.
inline Factorization factorize(const SpMat& a) {
    if (a.rows() != a.cols()) throw ConfigError("factorize: matrix must be square");
    Factorization f;
    f.rows_ = a.rows();

    const auto t0 = std::chrono::steady_clock::now();
    if (count_empty_rows(a) > 0) {
        SingularityReport rep;
        rep.exact_zero = true;
        rep.detail = "structurally empty row";
        f.report_ = rep;
        f.status_ = FactorStatus::failed;
        return f;
    }

    f.lu_ = std::make_shared<detail::LuCore>();
    f.lu_->isSymmetric(false);
    f.lu_->compute(a);
    const auto t1 = std::chrono::steady_clock::now();
    f.factor_seconds_ = std::chrono::duration<double>(t1 - t0).count();

    if (f.lu_->info() != Eigen::Success) {
        SingularityReport rep;
        rep.exact_zero = true;
        rep.detail = "factorization aborted: " + f.lu_->lastErrorMessage();
        // The backend reports the failing column as the trailing integer of
        // its message ("... ZERO COLUMN AT <k>", 1-based).
        const std::string& msg = f.lu_->lastErrorMessage();
        std::size_t pos = msg.find_last_not_of("0123456789");
        if (pos != std::string::npos && pos + 1 < msg.size()) {
            rep.pivot_index = std::stoll(msg.substr(pos + 1)) - 1;
        }
        f.report_ = rep;
        f.status_ = FactorStatus::failed;
        f.lu_.reset();
        return f;
    }

    const auto scan = f.lu_->scan_pivots();
    f.min_pivot_ = scan.min_abs;
    f.max_pivot_ = scan.max_abs;
    if (scan.any_zero || scan.max_abs == 0.0) {
        SingularityReport rep;
        rep.pivot_index = scan.argmin;
        rep.min_pivot = scan.min_abs;
        rep.max_pivot = scan.max_abs;
        rep.exact_zero = true;
        rep.detail = "zero pivot on U diagonal";
        f.report_ = rep;
        f.status_ = FactorStatus::failed;
        return f;
    }
    if (scan.min_abs <= kSingularPivotRatio * scan.max_abs) {
        SingularityReport rep;
        rep.pivot_index = scan.argmin;
        rep.min_pivot = scan.min_abs;
        rep.max_pivot = scan.max_abs;
        rep.exact_zero = false;
        rep.detail = "near-singular: pivot ratio " + std::to_string(scan.min_abs / scan.max_abs);
        f.report_ = rep;
        f.status_ = FactorStatus::near_singular;
        return f;
    }
    f.status_ = FactorStatus::ok;
    return f;
}

struct SolveResult {
    VecX x;
    double scaled_residual = 0.0;
    double solve_seconds = 0.0;
};

/// Apply a factorization and attach the scaled residual.
inline SolveResult solve(const Factorization& f, const SpMat& a, const VecX& b) {
    SolveResult r;
    const auto t0 = std::chrono::steady_clock::now();
    r.x = f.apply(b);
    const auto t1 = std::chrono::steady_clock::now();
    r.solve_seconds = std::chrono::duration<double>(t1 - t0).count();
    r.scaled_residual = matvec_residual(a, r.x, b);
    return r;
}

}  // namespace apfem
