// Experiment harness: record serialization, determinism, sweep shapes,
// convergence-rate computation, and the defective-space demonstration.
#include <gtest/gtest.h>

#include <apfem/experiment.hpp>

#include <cmath>
#include <cstring>

namespace {

using namespace apfem;

ErrorRecord sample_record() {
    ErrorRecord r;
    r.case_id = "uniform2d";
    r.model = "AP";
    r.dim = 2;
    r.n = 100;
    r.eps = 1e-6;
    r.m = 1;
    r.l2_abs = 1.0 / 3.0;
    r.h1_abs = 2.0 / 7.0;
    r.l2_rel = 1e-15;
    r.h1_rel = 0.1 + 0.2;  // deliberately not exactly 0.3
    r.rows = 51005;
    r.nnz = 1563213;
    r.factor_s = 9.91;
    r.solve_s = 0.125;
    r.pivot_ratio = 1.7e-7;
    r.l_norm = 4.7e-13;
    r.lambda_par_norm = 3.14159;
    return r;
}

TEST(Report, CsvHeaderIsFrozen) {
    EXPECT_STREQ(kCsvHeader,
                 "case,model,dim,N,eps,m,l2_abs,h1_abs,l2_rel,h1_rel,rows,nnz,"
                 "factor_s,solve_s,pivot_ratio,l_norm,lambda_par_norm");
}

TEST(Report, OneRecordMakesTwoLines) {
    const std::string csv = to_csv({sample_record()});
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
    EXPECT_EQ(csv.substr(0, std::string(kCsvHeader).size()), kCsvHeader);
}

TEST(Report, CsvRoundTripIsBitExact) {
    const ErrorRecord r = sample_record();
    const auto parsed = parse_csv(to_csv({r}));
    ASSERT_EQ(parsed.size(), 1u);
    const ErrorRecord& p = parsed[0];
    EXPECT_EQ(p.case_id, r.case_id);
    EXPECT_EQ(p.model, r.model);
    EXPECT_EQ(p.dim, r.dim);
    EXPECT_EQ(p.n, r.n);
    EXPECT_EQ(p.m, r.m);
    EXPECT_EQ(p.rows, r.rows);
    EXPECT_EQ(p.nnz, r.nnz);
    // %.17e keeps every double bit-for-bit.
    EXPECT_EQ(std::memcmp(&p.eps, &r.eps, sizeof(double)), 0);
    EXPECT_EQ(std::memcmp(&p.l2_abs, &r.l2_abs, sizeof(double)), 0);
    EXPECT_EQ(std::memcmp(&p.h1_abs, &r.h1_abs, sizeof(double)), 0);
    EXPECT_EQ(std::memcmp(&p.l2_rel, &r.l2_rel, sizeof(double)), 0);
    EXPECT_EQ(std::memcmp(&p.h1_rel, &r.h1_rel, sizeof(double)), 0);
    EXPECT_EQ(std::memcmp(&p.factor_s, &r.factor_s, sizeof(double)), 0);
    EXPECT_EQ(std::memcmp(&p.solve_s, &r.solve_s, sizeof(double)), 0);
    EXPECT_EQ(std::memcmp(&p.pivot_ratio, &r.pivot_ratio, sizeof(double)), 0);
    EXPECT_EQ(std::memcmp(&p.l_norm, &r.l_norm, sizeof(double)), 0);
    EXPECT_EQ(std::memcmp(&p.lambda_par_norm, &r.lambda_par_norm, sizeof(double)), 0);
}

TEST(Report, NanErrorsSurviveSerialization) {
    ErrorRecord r = sample_record();
    r.l2_abs = std::numeric_limits<double>::quiet_NaN();
    r.h1_abs = std::numeric_limits<double>::quiet_NaN();
    const auto parsed = parse_csv(to_csv({r}));
    ASSERT_EQ(parsed.size(), 1u);
    EXPECT_TRUE(std::isnan(parsed[0].l2_abs));
    EXPECT_TRUE(std::isnan(parsed[0].h1_abs));
}

TEST(Report, RejectsMalformedInput) {
    EXPECT_THROW(parse_csv("not,a,header\n1,2,3\n"), ConfigError);
    const std::string good = to_csv({sample_record()});
    const std::string short_row = good.substr(0, good.rfind(','));  // drops the last cell
    EXPECT_THROW(parse_csv(short_row), ConfigError);
}

TEST(Report, RecordsAreSortedDeterministically) {
    ErrorRecord a = sample_record();
    ErrorRecord b = sample_record();
    ErrorRecord c = sample_record();
    a.eps = 1e-2;
    b.eps = 1e-6;
    b.n = 50;
    c.model = "L";
    std::vector<ErrorRecord> recs = {a, b, c};
    const std::string once = to_csv(recs);
    std::swap(recs[0], recs[2]);
    const std::string twice = to_csv(recs);
    EXPECT_EQ(once, twice);  // emission sorts on the record key

    const auto parsed = parse_csv(once);
    ASSERT_EQ(parsed.size(), 3u);
    EXPECT_EQ(parsed[0].model, "AP");
    EXPECT_EQ(parsed[0].n, 50);   // smaller grid first within a model
    EXPECT_EQ(parsed[2].model, "L");
}

TEST(Report, JsonMirrorsCsvFields) {
    const auto j = to_json(std::vector<ErrorRecord>{sample_record()});
    ASSERT_TRUE(j.is_array());
    ASSERT_EQ(j.size(), 1u);
    EXPECT_EQ(j[0].size(), 17u);
    EXPECT_EQ(j[0]["case"], "uniform2d");
    EXPECT_EQ(j[0]["model"], "AP");
    EXPECT_EQ(j[0]["N"], 100);
    EXPECT_EQ(j[0]["rows"], 51005);
    EXPECT_DOUBLE_EQ(j[0]["l2_abs"].get<double>(), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(j[0]["lambda_par_norm"].get<double>(), 3.14159);
}

TEST(Experiment, ConfigValidation) {
    ExperimentConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.models.clear();
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = ExperimentConfig{};
    cfg.dim = 4;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = ExperimentConfig{};
    cfg.timing_reps = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = ExperimentConfig{};
    cfg.eps_list.clear();
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Experiment, SweepShapeMatchesConfig) {
    // Seven eps values x three models on a toy grid: 21 records, sorted, solvable.
    ExperimentConfig cfg;
    cfg.case_id = "uniform2d";
    cfg.grids = {4};
    cfg.eps_list = {10.0, 1.0, 1e-1, 1e-4, 1e-6, 1e-10, 1e-15};
    cfg.models = {Model::P, Model::L, Model::AP};
    const auto records = run_experiment(cfg);
    ASSERT_EQ(records.size(), 21u);
    for (const auto& r : records) {
        EXPECT_EQ(r.dim, 2);
        EXPECT_EQ(r.n, 4);
        EXPECT_NE(r.status, RunStatus::failed);
        EXPECT_TRUE(std::isfinite(r.l2_abs));
        EXPECT_GT(r.rows, 0);
        EXPECT_GT(r.nnz, 0);
        if (r.model == "P") EXPECT_EQ(r.rows, 25);
        if (r.model == "L") EXPECT_EQ(r.rows, 50);
        if (r.model == "AP") EXPECT_EQ(r.rows, 125);
    }
    // Deterministic modulo timing: repeat and compare every non-timing field.
    const auto again = run_experiment(cfg);
    ASSERT_EQ(again.size(), records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        EXPECT_EQ(records[i].model, again[i].model);
        EXPECT_EQ(std::memcmp(&records[i].l2_abs, &again[i].l2_abs, sizeof(double)), 0);
        EXPECT_EQ(std::memcmp(&records[i].h1_abs, &again[i].h1_abs, sizeof(double)), 0);
        EXPECT_EQ(std::memcmp(&records[i].pivot_ratio, &again[i].pivot_ratio, sizeof(double)), 0);
        EXPECT_EQ(records[i].nnz, again[i].nnz);
    }
}

TEST(Experiment, SingleRunAgainstKnownCase) {
    const auto ctx = make_context<2>("uniform2d", 8);
    Solution sol;
    const ErrorRecord rec = run_single<2>(ctx, Model::AP, 1e-6, 1, &sol);
    EXPECT_EQ(rec.status, RunStatus::ok);
    EXPECT_EQ(rec.rows, 5 * 81);
    EXPECT_GT(rec.l2_abs, 0.0);
    EXPECT_LT(rec.l2_rel, 1.0);
    EXPECT_GT(rec.factor_s, 0.0);
    EXPECT_EQ(sol.phi.size(), 81);
    EXPECT_THROW(make_context<2>("uniform3d", 8), ConfigError);
    EXPECT_THROW(make_context<2>("uniform2d", 7), ConfigError);
}

TEST(Rates, ComputedFromNestedGrids) {
    auto rec = [](int n, double l2, double h1) {
        ErrorRecord r;
        r.case_id = "c";
        r.model = "AP";
        r.dim = 2;
        r.n = n;
        r.eps = 1e-4;
        r.m = 1;
        r.l2_abs = l2;
        r.h1_abs = h1;
        return r;
    };
    const auto groups =
        convergence_rates({rec(200, 1.25e-7, 8.0e-5), rec(50, 8e-6, 1.28e-3), rec(100, 1e-6, 3.2e-4)});
    ASSERT_EQ(groups.size(), 1u);
    ASSERT_EQ(groups[0].steps.size(), 2u);
    EXPECT_NEAR(groups[0].steps[0].l2_rate, 3.0, 1e-12);
    EXPECT_NEAR(groups[0].steps[0].h1_rate, 2.0, 1e-12);
    EXPECT_NEAR(groups[0].steps[1].l2_rate, 3.0, 1e-12);
    EXPECT_EQ(groups[0].steps[0].n_coarse, 50);
    EXPECT_EQ(groups[0].steps[1].n_fine, 200);

    // Non-nested grids are a configuration error.
    EXPECT_THROW(convergence_rates({rec(50, 1, 1), rec(120, 0.1, 0.1)}), ConfigError);

    // A single record per group yields no rate group at all.
    EXPECT_TRUE(convergence_rates({rec(50, 1, 1)}).empty());

    // Zero errors cannot produce a rate: flagged, not faked.
    const auto degenerate = convergence_rates({rec(50, 0.0, 1e-3), rec(100, 1e-7, 5e-4)});
    ASSERT_EQ(degenerate.size(), 1u);
    EXPECT_TRUE(degenerate[0].steps[0].degenerate);
    EXPECT_TRUE(std::isnan(degenerate[0].steps[0].l2_rate));
    EXPECT_TRUE(std::isnan(degenerate[0].steps[0].h1_rate));
}

TEST(AppendixB, SmallGridDemonstration) {
    const AppendixBReport rep = appendix_b_demo(4);
    EXPECT_EQ(rep.n, 4);
    EXPECT_EQ(rep.kernel_count, 8);  // exactly 2 N_y candidates
    EXPECT_EQ(rep.kernel_rank, 8);   // linearly independent
    EXPECT_LE(rep.max_illposed_residual, 1e-10);
    EXPECT_GT(rep.min_corrected_residual, 1e-6);
    // The defective factorization must announce rank trouble one way or another.
    EXPECT_TRUE(rep.illposed_flagged || rep.illposed_pivot_ratio <= 1e-10);
    EXPECT_TRUE(rep.corrected_ok);
    EXPECT_GT(rep.corrected_pivot_ratio, 1e-8);

    const auto j = to_json(rep);
    EXPECT_EQ(j["kernel_count"], 8);
    EXPECT_EQ(j["kernel_rank"], 8);
}

}  // namespace
