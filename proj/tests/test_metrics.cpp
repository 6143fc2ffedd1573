#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "test_util.hpp"
#include "trussrl/baseline.hpp"
#include "trussrl/metrics.hpp"

using namespace trussrl;

namespace {

DesignEvaluation make_eval(int frames, int failed, double p90, bool in_defl) {
    DesignEvaluation e;
    e.frame_count = frames;
    e.failed_count = failed;
    e.utilization_p90 = p90;
    e.allowable_deflection = 0.05;
    e.max_deflection = in_defl ? 0.01 : 0.08;
    return e;
}

Scenario grid_6x14() {
    Scenario s;
    s.height = 6;
    s.width = 14;
    s.support = {5, 6};
    s.targets = {{{2, 0}, 100.0}, {{2, 13}, 100.0}};
    s.inventory = {20, 10};
    s.validate();
    return s;
}

std::vector<DesignRecord> baseline_records(const Scenario& s, int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<DesignRecord> out;
    for (int k = 0; k < n; ++k) {
        const GridState g = generate_baseline(s, rng);
        out.push_back({g, encode_state(g, s), evaluate_design(g, s), 0, k});
    }
    return out;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(HighPerforming, StrictBounds) {
    EXPECT_TRUE(is_high_performing(19, 2));
    EXPECT_FALSE(is_high_performing(20, 0));
    EXPECT_FALSE(is_high_performing(5, 3));
    EXPECT_TRUE(is_high_performing(1, 0));
}

TEST(Summarize, AveragesAndPercentages) {
    const auto m = summarize({make_eval(10, 0, 0.2, true), make_eval(30, 4, 0.6, false), std::nullopt,
                              make_eval(20, 2, 0.4, true)});
    EXPECT_EQ(m.n_designs, 4);
    EXPECT_EQ(m.analysis_failures, 1);
    EXPECT_DOUBLE_EQ(m.avg_frame_count, 20.0);
    EXPECT_DOUBLE_EQ(m.avg_failed_elements, 2.0);
    EXPECT_NEAR(m.utilization_p90, 0.4, 1e-15);
    EXPECT_DOUBLE_EQ(m.pct_without_failures, 25.0);
    EXPECT_DOUBLE_EQ(m.pct_within_allowable_deflection, 50.0);
    EXPECT_EQ(m.high_performing_count, 1);
    EXPECT_DOUBLE_EQ(m.high_performing_pct(), 25.0);
}

TEST(Summarize, PermutationInvariant) {
    Rng rng(8);
    std::vector<std::optional<DesignEvaluation>> v;
    for (int k = 0; k < 60; ++k)
        v.emplace_back(make_eval(static_cast<int>(rng.uniform_int(5, 40)), static_cast<int>(rng.uniform_int(0, 5)),
                                 rng.uniform01(), rng.bernoulli(0.5)));
    const auto a = summarize(v);
    rng.shuffle(v);
    const auto b = summarize(v);
    std::ostringstream sa, sb;
    write_summary_csv(sa, "x", a);
    write_summary_csv(sb, "x", b);
    EXPECT_EQ(sa.str(), sb.str());
    EXPECT_EQ(a.utilization_p90, b.utilization_p90);
}

TEST(Compare, SignedDifferences) {
    MetricsSummary p, b;
    p.avg_failed_elements = 0.5;
    b.avg_failed_elements = 4.0;
    p.pct_without_failures = 62.0;
    b.pct_without_failures = 50.0;
    p.utilization_p90 = 0.31;
    b.utilization_p90 = 0.25;
    const auto rows = compare(p, b);
    ASSERT_EQ(rows.size(), 6u);
    EXPECT_EQ(rows[1].metric, "avg_failed_elements");
    EXPECT_DOUBLE_EQ(rows[1].delta, -3.5);
    EXPECT_TRUE(rows[1].improved());
    EXPECT_DOUBLE_EQ(rows[3].delta, 12.0);
    EXPECT_TRUE(rows[3].improved());
    EXPECT_NEAR(rows[0].delta, 6.0, 1e-12);
}

TEST(Compare, AggregateOverScenarios) {
    MetricsSummary a, b, c;
    a.avg_frame_count = 10;
    b.avg_frame_count = 14;
    c.avg_frame_count = 20;
    const auto agg = aggregate_deltas({compare(a, c), compare(b, c)});
    const auto it = std::find_if(agg.begin(), agg.end(), [](const auto& r) { return r.metric == "avg_frame_count"; });
    ASSERT_NE(it, agg.end());
    EXPECT_DOUBLE_EQ(it->avg, -8.0);
    EXPECT_DOUBLE_EQ(it->best, -10.0);
    EXPECT_DOUBLE_EQ(it->worst, -6.0);
}

TEST(SummaryCsv, RoundTrip) {
    const auto m = summarize({make_eval(12, 1, 0.37, true), make_eval(25, 0, 0.21, false)});
    const auto path = (std::filesystem::temp_directory_path() / "trussrl_summary.csv").string();
    {
        std::ofstream os(path);
        write_summary_csv(os, "policy", m);
    }
    std::string label;
    const auto back = read_summary_csv(path, &label);
    EXPECT_EQ(label, "policy");
    EXPECT_EQ(back.n_designs, 2);
    EXPECT_DOUBLE_EQ(back.avg_frame_count, m.avg_frame_count);
    EXPECT_NEAR(back.utilization_p90, m.utilization_p90, 1e-12);
    std::filesystem::remove(path);
}

TEST(DesignVectors, ShapeAndByteIdenticalReexport) {
    const Scenario s = grid_6x14();
    const auto records = baseline_records(s, 5, 3);
    const auto dir = std::filesystem::temp_directory_path();
    const auto p1 = (dir / "trussrl_vec1.csv").string(), p2 = (dir / "trussrl_vec2.csv").string();
    export_design_vectors(records, s, p1);

    std::ifstream in(p1);
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(std::count(header.begin(), header.end(), ',') + 1, 9 * 14 + 4);

    const auto vectors = import_design_vectors(p1);
    ASSERT_EQ(vectors.size(), 5u);
    std::vector<DesignRecord> again;
    for (std::size_t k = 0; k < vectors.size(); ++k) {
        const GridState g = design_from_vector(vectors[k].cells, s);
        EXPECT_EQ(g.design, records[k].design.design);
        EXPECT_EQ(g.remaining, records[k].design.remaining);
        EXPECT_EQ(vectors[k].cells, records[k].state.data);
        again.push_back({g, encode_state(g, s), evaluate_design(g, s), 0, 0});
    }
    export_design_vectors(again, s, p2);
    EXPECT_EQ(slurp(p1), slurp(p2));
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
}

TEST(DesignVectors, EmptySetIsHeaderOnly) {
    std::ostringstream os;
    write_design_vectors(os, {}, 6);
    EXPECT_EQ(os.str(), "c0,c1,c2,c3,c4,c5,frame_count,failed_count,max_deflection_m,reward\n");
}

TEST(DesignVectors, WrongLengthIsAShapeError) {
    try {
        design_from_vector({1, 2, 3}, grid_6x14());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.category(), ErrorCategory::shape);
    }
}

TEST(SnapshotSchedule, IntervalsPlusFinal) {
    EXPECT_EQ(snapshot_schedule(1000, 7000), (std::vector<long long>{1000, 2000, 3000, 4000, 5000, 6000, 7000}));
    EXPECT_EQ(snapshot_schedule(1000, 6500).size(), 7u);
    EXPECT_EQ(snapshot_schedule(10000, 5000), (std::vector<long long>{5000}));
    EXPECT_EQ(snapshot_schedule(0, 5000), (std::vector<long long>{5000}));
}

TEST(Evaluate, BaselineDesignsAreAllAnalysed) {
    const Scenario s = grid_6x14();
    const auto records = baseline_records(s, 20, 9);
    std::vector<GridState> designs;
    for (const auto& r : records) designs.push_back(r.design);
    const auto a = evaluate(designs, s), b = evaluate(records);
    EXPECT_EQ(a.n_designs, 20);
    EXPECT_EQ(a.analysis_failures, 0);
    EXPECT_DOUBLE_EQ(a.avg_frame_count, b.avg_frame_count);
    EXPECT_DOUBLE_EQ(a.utilization_p90, b.utilization_p90);
    designs.push_back(initial_state(s));
    EXPECT_THROW(evaluate(designs, s), Error);
}
