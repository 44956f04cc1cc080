/// @file experiment.hpp
/// @brief Experiment runner and report emission: epsilon sweeps, mesh
///        convergence studies, the m-sweep, the defective-multiplier-space
///        demonstration, and CSV/JSON serialization of error records.
///
/// Every run goes through the same path -- assemble, constrain, factorize,
/// solve, measure -- for all three formulations, so their errors, sizes and
/// timings are directly comparable.  Records are sorted by key before
/// emission so identical configurations produce identical bytes (up to the
/// timing columns).
#pragma once

#include <apfem/assemble.hpp>
#include <apfem/cases.hpp>
#include <apfem/fieldline.hpp>
#include <apfem/grid.hpp>
#include <apfem/linalg.hpp>
#include <apfem/system.hpp>
#include <apfem/types.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace apfem {

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

enum class RunStatus { ok, near_singular, failed };

inline const char* to_string(RunStatus s) {
    switch (s) {
        case RunStatus::ok: return "ok";
        case RunStatus::near_singular: return "near_singular";
        case RunStatus::failed: return "failed";
    }
    return "?";
}

/// One (case, model, grid, eps, m) measurement; the 17 serialized fields
/// match the CSV schema below.
struct ErrorRecord {
    std::string case_id;
    std::string model;
    int dim = 2;
    int n = 0;
    double eps = 0.0;
    int m = 1;
    double l2_abs = 0.0;
    double h1_abs = 0.0;
    double l2_rel = 0.0;
    double h1_rel = 0.0;
    Index rows = 0;
    Index nnz = 0;
    double factor_s = 0.0;
    double solve_s = 0.0;
    double pivot_ratio = 0.0;
    double l_norm = 0.0;
    double lambda_par_norm = 0.0;
    // Not serialized: run health, for callers that must react to flagged runs.
    RunStatus status = RunStatus::ok;
    double scaled_residual = 0.0;

    auto key() const { return std::tie(case_id, model, dim, n, eps, m); }
};

struct ExperimentConfig {
    std::string case_id = "uniform2d";
    int dim = 2;
    double alpha = 2.0;
    std::vector<int> m_list = {1};
    std::vector<Model> models = {Model::AP};
    std::vector<int> grids = {100};
    std::vector<double> eps_list = {1e-6};
    int timing_reps = 1;

    void validate() const {
        if (models.empty()) throw ConfigError("experiment: need at least one model");
        if (grids.empty()) throw ConfigError("experiment: need at least one grid size");
        if (eps_list.empty()) throw ConfigError("experiment: need at least one eps");
        if (m_list.empty()) throw ConfigError("experiment: need at least one m");
        if (dim != 2 && dim != 3) throw ConfigError("experiment: dim must be 2 or 3");
        if (timing_reps < 1) throw ConfigError("experiment: timing repetitions must be >= 1");
    }
};

// ---------------------------------------------------------------------------
// Single solve
// ---------------------------------------------------------------------------

/// Everything reusable across eps values at a fixed (case, m, grid).
template <int D>
struct CaseContext {
    std::shared_ptr<const ManufacturedCase<D>> problem;
    TensorGrid<D> grid;
    Operators<D> ops;
    int m = 1;
    double alpha = 2.0;
};

template <int D>
CaseContext<D> make_context(const std::string& case_id, int n, double alpha = 2.0, int m = 1) {
    std::shared_ptr<const ManufacturedCase<D>> problem;
    if constexpr (D == 2) {
        problem = make_case_2d(case_id, alpha, m);
    } else {
        problem = make_case_3d(case_id);
    }
    TensorGrid<D> grid(n);
    Operators<D> ops = build_operators(grid, problem->field(), Diffusion<D>{});
    return CaseContext<D>{problem, grid, ops, m, alpha};
}

/// Assemble, constrain, factorize and solve one (model, eps) instance and
/// measure its errors against the exact solution.  Singular systems produce
/// a record with status = failed and NaN error fields instead of throwing,
/// so sweeps continue past pathological points.  Timing is averaged over
/// `timing_reps` factorize+solve repetitions.
template <int D>
ErrorRecord run_single(const CaseContext<D>& ctx, Model model, double eps, int timing_reps = 1,
                       Solution* solution_out = nullptr) {
    const auto& problem = *ctx.problem;
    ErrorRecord rec;
    rec.case_id = problem.name();
    rec.model = to_string(model);
    rec.dim = D;
    rec.n = ctx.grid.n();
    rec.eps = eps;
    rec.m = ctx.m;

    const VecX load = assemble_load<D>(ctx.grid, [&](const Vec<D>& x) { return problem.forcing(x, eps); });
    const BlockSystem sys = build_system(ctx.ops, load, model, eps);
    rec.rows = sys.rows();
    rec.nnz = sys.nnz();

    const double nan = std::numeric_limits<double>::quiet_NaN();
    double factor_total = 0.0, solve_total = 0.0;
    Factorization fact;
    SolveResult sol;
    for (int rep = 0; rep < std::max(1, timing_reps); ++rep) {
        fact = factorize(sys.matrix);
        factor_total += fact.factor_seconds();
        if (fact.status() == FactorStatus::failed) break;
        sol = solve(fact, sys.matrix, sys.rhs);
        solve_total += sol.solve_seconds;
    }
    rec.pivot_ratio = fact.pivot_ratio();
    if (fact.status() == FactorStatus::failed) {
        rec.status = RunStatus::failed;
        rec.factor_s = factor_total;
        rec.l2_abs = rec.h1_abs = rec.l2_rel = rec.h1_rel = nan;
        rec.scaled_residual = nan;
        return rec;
    }
    rec.status = fact.status() == FactorStatus::near_singular ? RunStatus::near_singular : RunStatus::ok;
    rec.factor_s = factor_total / std::max(1, timing_reps);
    rec.solve_s = solve_total / std::max(1, timing_reps);
    rec.scaled_residual = sol.scaled_residual;

    const Solution s = extract_solution(ctx.ops, sys, sol.x);
    rec.l_norm = s.l_l2;
    rec.lambda_par_norm = s.lambda_par;
    const ErrorNorms err = error_norms<D>(
        ctx.grid, s.phi, [&](const Vec<D>& x) { return problem.phi_eps(x, eps); },
        [&](const Vec<D>& x) { return problem.grad_phi_eps(x, eps); });
    rec.l2_abs = err.l2_abs;
    rec.h1_abs = err.h1_abs;
    rec.l2_rel = err.l2_rel;
    rec.h1_rel = err.h1_rel;
    if (solution_out) *solution_out = s;
    return rec;
}

/// Run the full cartesian product in the config; never throws on singular
/// systems (flagged records instead).
inline std::vector<ErrorRecord> run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<ErrorRecord> records;
    auto sweep = [&](auto dim_tag) {
        constexpr int D = decltype(dim_tag)::value;
        for (int m : cfg.m_list) {
            for (int n : cfg.grids) {
                const CaseContext<D> ctx = make_context<D>(cfg.case_id, n, cfg.alpha, m);
                for (double eps : cfg.eps_list) {
                    for (Model model : cfg.models) {
                        records.push_back(run_single<D>(ctx, model, eps, cfg.timing_reps));
                    }
                }
            }
        }
    };
    if (cfg.dim == 2) {
        sweep(std::integral_constant<int, 2>{});
    } else {
        sweep(std::integral_constant<int, 3>{});
    }
    return records;
}

// ---------------------------------------------------------------------------
// Convergence rates
// ---------------------------------------------------------------------------

struct RateStep {
    int n_coarse = 0;
    int n_fine = 0;
    double l2_rate = 0.0;
    double h1_rate = 0.0;
    bool degenerate = false;  // zero or non-finite errors: rates are NaN
};

struct RateGroup {
    std::string case_id;
    std::string model;
    int dim = 2;
    double eps = 0.0;
    int m = 1;
    std::vector<RateStep> steps;
};

/// Group records by (case, model, dim, eps, m) and compute per-refinement
/// rates log2(e(2h)/e(h)).  Grid sizes within a group must be nested
/// (each double the previous).
inline std::vector<RateGroup> convergence_rates(std::vector<ErrorRecord> records) {
    std::sort(records.begin(), records.end(), [](const ErrorRecord& a, const ErrorRecord& b) {
        return std::tie(a.case_id, a.model, a.dim, a.eps, a.m, a.n) <
               std::tie(b.case_id, b.model, b.dim, b.eps, b.m, b.n);
    });
    std::vector<RateGroup> groups;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < records.size();) {
        std::size_t j = i;
        while (j < records.size() &&
               records[j].case_id == records[i].case_id && records[j].model == records[i].model &&
               records[j].dim == records[i].dim && records[j].eps == records[i].eps &&
               records[j].m == records[i].m) {
            ++j;
        }
        RateGroup g;
        g.case_id = records[i].case_id;
        g.model = records[i].model;
        g.dim = records[i].dim;
        g.eps = records[i].eps;
        g.m = records[i].m;
        for (std::size_t k = i + 1; k < j; ++k) {
            const ErrorRecord& coarse = records[k - 1];
            const ErrorRecord& fine = records[k];
            if (fine.n != 2 * coarse.n) {
                throw ConfigError("convergence_rates: grids are not nested (need doubling N)");
            }
            RateStep step;
            step.n_coarse = coarse.n;
            step.n_fine = fine.n;
            const bool bad = !(coarse.l2_abs > 0.0) || !(fine.l2_abs > 0.0) ||
                             !(coarse.h1_abs > 0.0) || !(fine.h1_abs > 0.0) ||
                             !std::isfinite(coarse.l2_abs) || !std::isfinite(fine.l2_abs) ||
                             !std::isfinite(coarse.h1_abs) || !std::isfinite(fine.h1_abs);
            if (bad) {
                step.degenerate = true;
                step.l2_rate = nan;
                step.h1_rate = nan;
            } else {
                step.l2_rate = std::log2(coarse.l2_abs / fine.l2_abs);
                step.h1_rate = std::log2(coarse.h1_abs / fine.h1_abs);
            }
            g.steps.push_back(step);
        }
        if (j - i >= 2) groups.push_back(std::move(g));
        i = j;
    }
    return groups;
}

// ---------------------------------------------------------------------------
// Defective multiplier-space demonstration
// ---------------------------------------------------------------------------

struct AppendixBReport {
    int n = 0;
    int kernel_count = 0;            // 2 N_y candidates
    int kernel_rank = 0;             // rank of the stacked candidates
    double max_illposed_residual = 0.0;   // max ||A_bad v|| / ||v|| over candidates
    double min_corrected_residual = 0.0;  // min ||A v|| / ||v|| over candidates
    bool illposed_flagged = false;        // factorization failed or near-singular
    double illposed_pivot_ratio = 0.0;
    double corrected_pivot_ratio = 0.0;
    bool corrected_ok = false;
};

/// Demonstrate that pinning the multiplier space on the inflow boundary only
/// yields a singular system: builds the five-field system with both
/// multiplier spaces for the y-aligned uniform field, constructs all 2 N_y
/// kernel candidates of the defective variant, and measures their residuals
/// against both matrices as well as both factorizations' pivot health.
inline AppendixBReport appendix_b_demo(int n, double eps = 1e-6) {
    const CaseContext<2> ctx = make_context<2>("uniform2d-y", n);
    const auto& problem = *ctx.problem;
    const VecX load =
        assemble_load<2>(ctx.grid, [&](const Vec<2>& x) { return problem.forcing(x, eps); });
    const BlockSystem good = build_system(ctx.ops, load, Model::AP, eps);
    const BlockSystem bad = build_illposed_variant(ctx.ops, load, eps);

    AppendixBReport rep;
    rep.n = n;
    const Index nn = ctx.grid.node_count();
    Eigen::MatrixXd stacked(nn, 2 * n);
    int col = 0;
    rep.min_corrected_residual = std::numeric_limits<double>::infinity();
    for (int j = 1; j <= n; ++j) {
        for (KernelSide side : {KernelSide::left, KernelSide::right}) {
            const VecX lam = construct_kernel(ctx.grid, j, side);
            stacked.col(col++) = lam;
            VecX v = VecX::Zero(bad.rows());
            v.segment(nn, nn) = lam;  // lambda block
            const double vnorm = v.norm();
            rep.max_illposed_residual =
                std::max(rep.max_illposed_residual, (bad.matrix * v).norm() / vnorm);
            rep.min_corrected_residual =
                std::min(rep.min_corrected_residual, (good.matrix * v).norm() / vnorm);
        }
    }
    rep.kernel_count = col;
    rep.kernel_rank = static_cast<int>(Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(stacked).rank());

    const Factorization fbad = factorize(bad.matrix);
    rep.illposed_flagged = fbad.status() != FactorStatus::ok;
    rep.illposed_pivot_ratio = fbad.pivot_ratio();
    const Factorization fgood = factorize(good.matrix);
    rep.corrected_ok = fgood.status() == FactorStatus::ok;
    rep.corrected_pivot_ratio = fgood.pivot_ratio();
    return rep;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline constexpr const char* kCsvHeader =
    "case,model,dim,N,eps,m,l2_abs,h1_abs,l2_rel,h1_rel,rows,nnz,factor_s,solve_s,"
    "pivot_ratio,l_norm,lambda_par_norm";

/// Full-precision scientific notation; round-trips doubles bit-exactly.
inline std::string format_sci(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17e", v);
    return buf;
}

inline void sort_records(std::vector<ErrorRecord>& records) {
    std::sort(records.begin(), records.end(),
              [](const ErrorRecord& a, const ErrorRecord& b) { return a.key() < b.key(); });
}

inline std::string to_csv(std::vector<ErrorRecord> records) {
    sort_records(records);
    std::ostringstream out;
    out << kCsvHeader << "\n";
    for (const auto& r : records) {
        out << r.case_id << ',' << r.model << ',' << r.dim << ',' << r.n << ',' << format_sci(r.eps)
            << ',' << r.m << ',' << format_sci(r.l2_abs) << ',' << format_sci(r.h1_abs) << ','
            << format_sci(r.l2_rel) << ',' << format_sci(r.h1_rel) << ',' << r.rows << ',' << r.nnz
            << ',' << format_sci(r.factor_s) << ',' << format_sci(r.solve_s) << ','
            << format_sci(r.pivot_ratio) << ',' << format_sci(r.l_norm) << ','
            << format_sci(r.lambda_par_norm) << "\n";
    }
    return out.str();
}

inline nlohmann::json to_json(std::vector<ErrorRecord> records) {
    sort_records(records);
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : records) {
        arr.push_back({{"case", r.case_id},
                       {"model", r.model},
                       {"dim", r.dim},
                       {"N", r.n},
                       {"eps", r.eps},
                       {"m", r.m},
                       {"l2_abs", r.l2_abs},
                       {"h1_abs", r.h1_abs},
                       {"l2_rel", r.l2_rel},
                       {"h1_rel", r.h1_rel},
                       {"rows", r.rows},
                       {"nnz", r.nnz},
                       {"factor_s", r.factor_s},
                       {"solve_s", r.solve_s},
                       {"pivot_ratio", r.pivot_ratio},
                       {"l_norm", r.l_norm},
                       {"lambda_par_norm", r.lambda_par_norm}});
    }
    return arr;
}

/// Parse a CSV produced by to_csv (testing and downstream tooling).
inline std::vector<ErrorRecord> parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("parse_csv: empty input");
    if (line != kCsvHeader) throw ConfigError("parse_csv: unexpected header: " + line);
    std::vector<ErrorRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (f.size() != 17) throw ConfigError("parse_csv: malformed row: " + line);
        ErrorRecord r;
        r.case_id = f[0];
        r.model = f[1];
        r.dim = std::stoi(f[2]);
        r.n = std::stoi(f[3]);
        r.eps = std::stod(f[4]);
        r.m = std::stoi(f[5]);
        r.l2_abs = std::stod(f[6]);
        r.h1_abs = std::stod(f[7]);
        r.l2_rel = std::stod(f[8]);
        r.h1_rel = std::stod(f[9]);
        r.rows = std::stoll(f[10]);
        r.nnz = std::stoll(f[11]);
        r.factor_s = std::stod(f[12]);
        r.solve_s = std::stod(f[13]);
        r.pivot_ratio = std::stod(f[14]);
        r.l_norm = std::stod(f[15]);
        r.lambda_par_norm = std::stod(f[16]);
        records.push_back(std::move(r));
    }
    return records;
}

inline void write_report(const std::vector<ErrorRecord>& records, const std::string& format,
                         const std::string& path) {
    if (records.empty()) throw ConfigError("write_report: no records to write");
    std::ofstream out(path);
    if (!out) throw ConfigError("write_report: cannot open output path: " + path);
    if (format == "csv") {
        out << to_csv(records);
    } else if (format == "json") {
        out << to_json(records).dump(2) << "\n";
    } else {
        throw ConfigError("write_report: unknown format '" + format + "' (expected csv or json)");
    }
    if (!out.good()) throw ConfigError("write_report: write failed for " + path);
}

inline nlohmann::json to_json(const AppendixBReport& r) {
    return {{"N", r.n},
            {"kernel_count", r.kernel_count},
            {"kernel_rank", r.kernel_rank},
            {"max_illposed_residual", r.max_illposed_residual},
            {"min_corrected_residual", r.min_corrected_residual},
            {"illposed_flagged", r.illposed_flagged},
            {"illposed_pivot_ratio", r.illposed_pivot_ratio},
            {"corrected_pivot_ratio", r.corrected_pivot_ratio},
            {"corrected_ok", r.corrected_ok}};
}

template <int D>
nlohmann::json to_json(const AuditReport<D>& r) {
    nlohmann::json lines = nlohmann::json::array();
    for (const auto& l : r.lines) {
        nlohmann::json seed = nlohmann::json::array();
        for (int d = 0; d < D; ++d) seed.push_back(l.seed[d]);
        lines.push_back({{"seed", seed},
                         {"length", l.length},
                         {"p_oscillation", l.p_oscillation},
                         {"q_average", l.q_average}});
    }
    return {{"n_lines", r.n_lines},
            {"max_p_oscillation", r.max_p_oscillation},
            {"max_abs_q_average", r.max_abs_q_average},
            {"p_l2", r.p_l2},
            {"q_l2", r.q_l2},
            {"pw_constant", r.pw_constant},
            {"lines", lines}};
}

}  // namespace apfem
