/// Command-line driver for the anisotropic-diffusion experiments.
///
/// Subcommands:
///   solve       one (case, model, N, eps) instance, timing averaged over --reps
///   sweep-eps   cartesian sweep over eps values and models at fixed N
///   convergence sweep over doubling grid sizes; prints per-step rates
///   sweep-m     sweep over field-oscillation counts m (variable field)
///   appendix-b  defective multiplier-space demonstration (JSON report)
///   audit       field-line audit of an AP solve (JSON report)
///
/// Record-producing subcommands write CSV (default) or JSON via --format;
/// appendix-b and audit are JSON-only.  Exit codes: 0 success, 1 a solve
/// failed (the failing tuple goes to stderr), 2 configuration error.

#include <apfem/apfem.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

namespace {

using namespace apfem;

struct CommonArgs {
    std::string case_id = "uniform2d";
    std::vector<std::string> models = {"ap"};
    std::vector<int> grids = {100};
    std::vector<double> eps = {1e-6};
    double alpha = 2.0;
    std::vector<int> m = {1};
    int dim = 2;
    std::string out;
    std::string format = "csv";
    int reps = 1;
    int lines = 20;
};

void add_common_flags(CLI::App* cmd, CommonArgs& a, bool multi_n, bool multi_eps, bool multi_m) {
    cmd->add_option("--case", a.case_id, "test case: uniform2d, uniform2d-y, variable2d, uniform3d");
    cmd->add_option("--model", a.models, "formulation(s): p, l, ap")->delimiter(',');
    if (multi_n) {
        cmd->add_option("--n", a.grids, "grid size(s) N (even)")->delimiter(',');
    } else {
        a.grids.resize(1);
        cmd->add_option("--n", a.grids[0], "grid size N (even)");
    }
    if (multi_eps) {
        cmd->add_option("--eps", a.eps, "anisotropy ratio(s)")->delimiter(',');
    } else {
        a.eps.resize(1);
        cmd->add_option("--eps", a.eps[0], "anisotropy ratio");
    }
    cmd->add_option("--alpha", a.alpha, "field variation amplitude (variable2d)");
    if (multi_m) {
        cmd->add_option("--m", a.m, "field oscillation count(s) (variable2d)")->delimiter(',');
    } else {
        a.m.resize(1);
        cmd->add_option("--m", a.m[0], "field oscillation count (variable2d)");
    }
    cmd->add_option("--dim", a.dim, "space dimension (2 or 3)");
    cmd->add_option("--out", a.out, "output path (default: stdout)");
    cmd->add_option("--format", a.format, "output format: csv or json");
}

ExperimentConfig to_config(const CommonArgs& a) {
    ExperimentConfig cfg;
    cfg.case_id = a.case_id;
    cfg.dim = a.dim;
    cfg.alpha = a.alpha;
    cfg.m_list = a.m;
    cfg.models.clear();
    for (const auto& m : a.models) cfg.models.push_back(model_from_string(m));
    cfg.grids = a.grids;
    cfg.eps_list = a.eps;
    cfg.timing_reps = a.reps;
    return cfg;
}

void emit_records(const std::vector<ErrorRecord>& records, const CommonArgs& a) {
    if (a.format != "csv" && a.format != "json") {
        throw ConfigError("unknown format '" + a.format + "' (expected csv or json)");
    }
    if (a.out.empty()) {
        if (a.format == "csv") {
            std::cout << to_csv(records);
        } else {
            std::cout << to_json(records).dump(2) << "\n";
        }
    } else {
        write_report(records, a.format, a.out);
        std::cerr << "wrote " << records.size() << " record(s) to " << a.out << "\n";
    }
}

void emit_json_report(const nlohmann::json& j, const CommonArgs& a) {
    if (a.format != "json") {
        throw ConfigError("this subcommand emits JSON only (pass --format json or omit --format)");
    }
    if (a.out.empty()) {
        std::cout << j.dump(2) << "\n";
    } else {
        std::ofstream f(a.out);
        if (!f) throw ConfigError("cannot open output path: " + a.out);
        f << j.dump(2) << "\n";
        std::cerr << "wrote report to " << a.out << "\n";
    }
}

/// Returns 1 if any run in `records` failed outright, 0 otherwise.
int report_failures(const std::vector<ErrorRecord>& records) {
    int code = 0;
    for (const auto& r : records) {
        if (r.status == RunStatus::failed) {
            std::fprintf(stderr, "solve failed: case=%s model=%s N=%d eps=%g\n", r.case_id.c_str(),
                         r.model.c_str(), r.n, r.eps);
            code = 1;
        } else if (r.status == RunStatus::near_singular) {
            std::fprintf(stderr,
                         "warning: near-singular factorization (pivot ratio %.3e): "
                         "case=%s model=%s N=%d eps=%g\n",
                         r.pivot_ratio, r.case_id.c_str(), r.model.c_str(), r.n, r.eps);
        }
    }
    return code;
}

int cmd_records(const CommonArgs& a) {
    const std::vector<ErrorRecord> records = run_experiment(to_config(a));
    emit_records(records, a);
    return report_failures(records);
}

int cmd_convergence(const CommonArgs& a) {
    ExperimentConfig cfg = to_config(a);
    std::sort(cfg.grids.begin(), cfg.grids.end());
    const std::vector<ErrorRecord> records = run_experiment(cfg);
    const std::vector<RateGroup> groups = convergence_rates(records);
    emit_records(records, a);
    for (const auto& g : groups) {
        std::fprintf(stderr, "rates %s %s dim=%d eps=%g m=%d:\n", g.case_id.c_str(),
                     g.model.c_str(), g.dim, g.eps, g.m);
        for (const auto& s : g.steps) {
            std::fprintf(stderr, "  N %d -> %d : L2 rate %.3f, H1 rate %.3f%s\n", s.n_coarse,
                         s.n_fine, s.l2_rate, s.h1_rate, s.degenerate ? " (degenerate)" : "");
        }
    }
    return report_failures(records);
}

int cmd_appendix_b(const CommonArgs& a) {
    const AppendixBReport rep = appendix_b_demo(a.grids.at(0), a.eps.at(0));
    emit_json_report(to_json(rep), a);
    return 0;
}

template <int D>
int run_audit(const CommonArgs& a) {
    const CaseContext<D> ctx = make_context<D>(a.case_id, a.grids.at(0), a.alpha, a.m.at(0));
    Solution sol;
    const ErrorRecord rec = run_single<D>(ctx, Model::AP, a.eps.at(0), 1, &sol);
    if (rec.status == RunStatus::failed) {
        std::fprintf(stderr, "solve failed: case=%s model=AP N=%d eps=%g\n", rec.case_id.c_str(),
                     rec.n, rec.eps);
        return 1;
    }
    TraceOptions opt;
    opt.h_ode = ctx.grid.h() / 4.0;
    const AuditReport<D> audit = audit_solution<D>(ctx.grid, sol.p, sol.q, ctx.problem->field(),
                                                   a.lines, opt);
    nlohmann::json j;
    j["record"] = to_json(std::vector<ErrorRecord>{rec})[0];
    j["audit"] = to_json(audit);
    emit_json_report(j, a);
    return 0;
}

int cmd_audit(const CommonArgs& a) {
    for (const auto& m : a.models) {
        if (model_from_string(m) != Model::AP) {
            throw ConfigError("audit inspects the p/q split and requires --model ap");
        }
    }
    if (a.dim == 2) return run_audit<2>(a);
    if (a.dim == 3) return run_audit<3>(a);
    throw ConfigError("audit: dim must be 2 or 3");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finite-element study of highly anisotropic elliptic problems: "
                 "direct, limit and asymptotic-preserving formulations"};
    app.require_subcommand(1);

    CommonArgs solve_args;
    solve_args.reps = 3;
    CLI::App* solve_cmd = app.add_subcommand("solve", "solve one instance and report its errors");
    add_common_flags(solve_cmd, solve_args, false, false, false);
    solve_cmd->add_option("--reps", solve_args.reps, "timing repetitions (average reported)");

    CommonArgs sweep_args;
    CLI::App* sweep_cmd =
        app.add_subcommand("sweep-eps", "sweep the anisotropy ratio at fixed grid size");
    add_common_flags(sweep_cmd, sweep_args, false, true, false);
    sweep_cmd->add_option("--reps", sweep_args.reps, "timing repetitions (average reported)");

    CommonArgs conv_args;
    conv_args.grids = {50, 100, 200};
    CLI::App* conv_cmd =
        app.add_subcommand("convergence", "mesh-refinement study over doubling grid sizes");
    add_common_flags(conv_cmd, conv_args, true, false, false);

    CommonArgs m_args;
    m_args.case_id = "variable2d";
    m_args.m = {1, 2, 5, 10};
    m_args.eps = {1e-10};
    CLI::App* m_cmd =
        app.add_subcommand("sweep-m", "sweep the field oscillation count (variable field)");
    add_common_flags(m_cmd, m_args, true, false, true);

    CommonArgs apx_args;
    apx_args.grids = {8};
    apx_args.format = "json";
    CLI::App* apx_cmd = app.add_subcommand(
        "appendix-b", "demonstrate the ill-posedness of the defective multiplier space");
    add_common_flags(apx_cmd, apx_args, false, false, false);

    CommonArgs audit_args;
    audit_args.format = "json";
    CLI::App* audit_cmd =
        app.add_subcommand("audit", "field-line audit of an AP solution (p/q structure)");
    add_common_flags(audit_cmd, audit_args, false, false, false);
    audit_cmd->add_option("--lines", audit_args.lines, "number of field lines to trace");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // bad usage is a configuration error
    }

    try {
        if (solve_cmd->parsed()) return cmd_records(solve_args);
        if (sweep_cmd->parsed()) return cmd_records(sweep_args);
        if (conv_cmd->parsed()) return cmd_convergence(conv_args);
        if (m_cmd->parsed()) return cmd_records(m_args);
        if (apx_cmd->parsed()) return cmd_appendix_b(apx_args);
        if (audit_cmd->parsed()) return cmd_audit(audit_args);
        std::cerr << "no subcommand given\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
