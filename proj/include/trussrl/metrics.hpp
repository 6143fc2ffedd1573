#pragma once

// Design-set statistics and policy/baseline comparison.
// Also the flattened design-vector export read by external embedding tools.

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "trussrl/trainer.hpp"

namespace trussrl {

inline constexpr int kHighPerformingMaxFrames = 20;  // exclusive
inline constexpr int kHighPerformingMaxFailed = 3;   // exclusive

inline bool is_high_performing(int frame_count, int failed_count) {
    return frame_count < kHighPerformingMaxFrames && failed_count < kHighPerformingMaxFailed;
}

struct MetricsSummary {
    int n_designs = 0;
    int analysis_failures = 0;  // designs whose FEA failed; flagged as failing, excluded from averages
    double avg_failed_elements = 0;
    double avg_frame_count = 0;
    double utilization_p90 = 0;  // mean of per-design p90
    double pct_without_failures = 0;
    double pct_within_allowable_deflection = 0;
    int high_performing_count = 0;

    double high_performing_pct() const { return n_designs ? 100.0 * high_performing_count / n_designs : 0.0; }
};

namespace detail {
/// Order-independent sum (sorted before accumulation).
inline double stable_sum(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return std::accumulate(v.begin(), v.end(), 0.0);
}
}  // namespace detail

/// Aggregates already-analysed designs; `nullopt` entries are analysis failures.
inline MetricsSummary summarize(const std::vector<std::optional<DesignEvaluation>>& evals) {
    MetricsSummary m;
    m.n_designs = static_cast<int>(evals.size());
    std::vector<double> failed, frames, p90;
    int no_fail = 0, in_defl = 0;
    for (const auto& e : evals) {
        if (!e) {
            ++m.analysis_failures;
            continue;
        }
        failed.push_back(e->failed_count);
        frames.push_back(e->frame_count);
        p90.push_back(e->utilization_p90);
        no_fail += e->failed_count == 0;
        in_defl += e->within_deflection();
        m.high_performing_count += is_high_performing(e->frame_count, e->failed_count);
    }
    const double n_ok = static_cast<double>(failed.size());
    if (n_ok > 0) {
        m.avg_failed_elements = detail::stable_sum(failed) / n_ok;
        m.avg_frame_count = detail::stable_sum(frames) / n_ok;
        m.utilization_p90 = detail::stable_sum(p90) / n_ok;
    }
    if (m.n_designs > 0) {
        m.pct_without_failures = 100.0 * no_fail / m.n_designs;
        m.pct_within_allowable_deflection = 100.0 * in_defl / m.n_designs;
    }
    return m;
}

/// Runs the FEA on every design; requires each to be terminate-feasible.
inline MetricsSummary evaluate(const std::vector<GridState>& designs, const Scenario& s, const RewardConfig& reward = {},
                               const StructureConfig& structure = {}) {
    std::vector<std::optional<DesignEvaluation>> evals;
    evals.reserve(designs.size());
    for (const auto& g : designs) {
        if (connected_fraction(g, s) < 1.0)
            throw Error(ErrorCategory::contract, "evaluate: design does not connect every target");
        try {
            evals.emplace_back(evaluate_design(g, s, reward, structure));
        } catch (const Error& e) {
            if (e.category() != ErrorCategory::analysis && e.category() != ErrorCategory::numeric) throw;
            evals.emplace_back(std::nullopt);
        }
    }
    return summarize(evals);
}

inline MetricsSummary evaluate(const std::vector<DesignRecord>& records) {
    std::vector<std::optional<DesignEvaluation>> evals;
    for (const auto& r : records) evals.emplace_back(r.evaluation);
    return summarize(evals);
}

struct MetricDelta {
    std::string metric;
    double policy = 0;
    double baseline = 0;
    double delta = 0;  // policy - baseline; utilization in percentage points
    bool higher_is_better = true;

    bool improved() const { return higher_is_better ? delta > 0 : delta < 0; }
};

/// Signed policy-minus-baseline differences: utilization and percentages improve
/// upward, failed elements and frame count improve downward.
inline std::vector<MetricDelta> compare(const MetricsSummary& policy, const MetricsSummary& baseline) {
    auto row = [](const char* name, double p, double b, bool up) { return MetricDelta{name, p, b, p - b, up}; };
    return {row("utilization_p90_pct", 100.0 * policy.utilization_p90, 100.0 * baseline.utilization_p90, true),
            row("avg_failed_elements", policy.avg_failed_elements, baseline.avg_failed_elements, false),
            row("avg_frame_count", policy.avg_frame_count, baseline.avg_frame_count, false),
            row("pct_without_failures", policy.pct_without_failures, baseline.pct_without_failures, true),
            row("pct_within_allowable_deflection", policy.pct_within_allowable_deflection,
                baseline.pct_within_allowable_deflection, true),
            row("high_performing_pct", policy.high_performing_pct(), baseline.high_performing_pct(), true)};
}

struct DeltaAggregate {
    std::string metric;
    double avg = 0;
    double best = 0;   // largest improvement ("Max")
    double worst = 0;  // smallest improvement ("Min")
};

/// Avg / Max / Min of each metric's delta across scenarios.
inline std::vector<DeltaAggregate> aggregate_deltas(const std::vector<std::vector<MetricDelta>>& per_scenario) {
    std::vector<DeltaAggregate> out;
    if (per_scenario.empty()) return out;
    for (std::size_t k = 0; k < per_scenario.front().size(); ++k) {
        DeltaAggregate a;
        a.metric = per_scenario.front()[k].metric;
        const bool up = per_scenario.front()[k].higher_is_better;
        std::vector<double> d;
        for (const auto& sc : per_scenario) d.push_back(sc[k].delta);
        a.avg = detail::stable_sum(d) / static_cast<double>(d.size());
        const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
        a.best = up ? *hi : *lo;
        a.worst = up ? *lo : *hi;
        out.push_back(a);
    }
    return out;
}

inline void write_delta_csv(std::ostream& os, const std::vector<MetricDelta>& rows) {
    os << std::setprecision(10) << "metric,policy,baseline,delta,improved\n";
    for (const auto& r : rows)
        os << r.metric << ',' << r.policy << ',' << r.baseline << ',' << r.delta << ',' << (r.improved() ? 1 : 0) << '\n';
}

inline void write_delta_table(std::ostream& os, const std::vector<MetricDelta>& rows) {
    os << std::left << std::setw(34) << "metric" << std::right << std::setw(12) << "policy" << std::setw(12)
       << "baseline" << std::setw(12) << "delta" << '\n';
    os << std::fixed << std::setprecision(3);
    for (const auto& r : rows)
        os << std::left << std::setw(34) << r.metric << std::right << std::setw(12) << r.policy << std::setw(12)
           << r.baseline << std::setw(11) << std::showpos << r.delta << std::noshowpos << (r.improved() ? "*" : " ")
           << '\n';
    os << std::defaultfloat;
}

inline void write_aggregate_csv(std::ostream& os, const std::vector<DeltaAggregate>& rows) {
    os << std::setprecision(10) << "metric,avg_delta,max_delta,min_delta\n";
    for (const auto& r : rows) os << r.metric << ',' << r.avg << ',' << r.best << ',' << r.worst << '\n';
}

inline const char* kSummaryHeader =
    "label,n_designs,analysis_failures,avg_failed_elements,avg_frame_count,utilization_p90,pct_without_failures,"
    "pct_within_allowable_deflection,high_performing_count";

inline void write_summary_csv(std::ostream& os, const std::string& label, const MetricsSummary& m, bool header = true) {
    if (header) os << kSummaryHeader << '\n';
    std::ostringstream r;
    r << std::setprecision(12) << label << ',' << m.n_designs << ',' << m.analysis_failures << ','
      << m.avg_failed_elements << ',' << m.avg_frame_count << ',' << m.utilization_p90 << ',' << m.pct_without_failures
      << ',' << m.pct_within_allowable_deflection << ',' << m.high_performing_count << '\n';
    os << r.str();
}

namespace detail {
inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) out.push_back(f);
    return out;
}
}  // namespace detail

/// Reads the first data row of a summary CSV.
inline MetricsSummary read_summary_csv(const std::string& path, std::string* label = nullptr) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCategory::io, "cannot open " + path);
    std::string line;
    std::getline(in, line);
    if (line != kSummaryHeader) throw Error(ErrorCategory::input, path + ": not a metrics summary file");
    if (!std::getline(in, line)) throw Error(ErrorCategory::input, path + ": no summary row");
    const auto f = detail::split_csv(line);
    if (f.size() != 9) throw Error(ErrorCategory::input, path + ": malformed summary row");
    MetricsSummary m;
    try {
        if (label) *label = f[0];
        m.n_designs = std::stoi(f[1]);
        m.analysis_failures = std::stoi(f[2]);
        m.avg_failed_elements = std::stod(f[3]);
        m.avg_frame_count = std::stod(f[4]);
        m.utilization_p90 = std::stod(f[5]);
        m.pct_without_failures = std::stod(f[6]);
        m.pct_within_allowable_deflection = std::stod(f[7]);
        m.high_performing_count = std::stoi(f[8]);
    } catch (const std::exception&) {
        throw Error(ErrorCategory::input, path + ": malformed summary row");
    }
    return m;
}

/// Header c0..c{n-1},frame_count,failed_count,max_deflection_m,reward then one
/// row per design (state tensor flattened row-major).
inline void write_design_vectors(std::ostream& os, const std::vector<DesignRecord>& designs, int cells) {
    for (int k = 0; k < cells; ++k) os << 'c' << k << ',';
    os << "frame_count,failed_count,max_deflection_m,reward\n";
    for (const auto& d : designs) {
        if (static_cast<int>(d.state.data.size()) != cells)
            throw Error(ErrorCategory::shape, "design vector length differs from the export width");
        std::ostringstream r;
        r << std::setprecision(12);
        for (int v : d.state.data) r << v << ',';
        r << d.evaluation.frame_count << ',' << d.evaluation.failed_count << ',' << d.evaluation.max_deflection << ','
          << d.evaluation.reward << '\n';
        os << r.str();
    }
}

inline void export_design_vectors(const std::vector<DesignRecord>& designs, const Scenario& s, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw Error(ErrorCategory::io, "cannot write " + path);
    write_design_vectors(os, designs, (s.inventory_row_count() + s.height) * s.width);
    if (!os) throw Error(ErrorCategory::io, "failed writing " + path);
}

struct DesignVector {
    std::vector<int> cells;
    int frame_count = 0;
    int failed_count = 0;
    double max_deflection = 0;
    double reward = 0;
};

inline std::vector<DesignVector> import_design_vectors(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCategory::io, "cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCategory::input, path + ": empty file");
    const std::size_t n_cols = detail::split_csv(line).size();
    if (n_cols < 4) throw Error(ErrorCategory::input, path + ": malformed header");
    std::vector<DesignVector> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = detail::split_csv(line);
        if (f.size() != n_cols) throw Error(ErrorCategory::input, path + ": row width differs from header");
        DesignVector d;
        try {
            for (std::size_t k = 0; k + 4 < n_cols; ++k) d.cells.push_back(std::stoi(f[k]));
            d.frame_count = std::stoi(f[n_cols - 4]);
            d.failed_count = std::stoi(f[n_cols - 3]);
            d.max_deflection = std::stod(f[n_cols - 2]);
            d.reward = std::stod(f[n_cols - 1]);
        } catch (const std::exception&) {
            throw Error(ErrorCategory::input, path + ": non-numeric field");
        }
        out.push_back(std::move(d));
    }
    return out;
}

/// Rebuilds the grid state of an exported vector (design rows are the last
/// `height` rows; remaining stock is recomputed from the scenario inventory).
inline GridState design_from_vector(const std::vector<int>& cells, const Scenario& s) {
    const int rows = s.inventory_row_count() + s.height;
    if (static_cast<int>(cells.size()) != rows * s.width)
        throw Error(ErrorCategory::shape, "design vector length does not match the scenario");
    GridState g = initial_state(s);
    const std::size_t off = static_cast<std::size_t>(s.inventory_row_count() * s.width);
    for (int k = 0; k < s.cell_count(); ++k) g.design[static_cast<std::size_t>(k)] = cells[off + static_cast<std::size_t>(k)];
    g.remaining = s.inventory;
    for (int v : g.design)
        if (v >= 2) g.remaining[static_cast<std::size_t>(s.ordinal_of(v))] -= 1;
    for (int n : g.remaining)
        if (n < 0) throw Error(ErrorCategory::input, "design uses more frames than the scenario inventory");
    if (g.design[s.flat(s.support)] != kSupport) throw Error(ErrorCategory::input, "design vector lacks the support frame");
    g.step_count = g.frames_used();
    return g;
}

struct SearchSnapshot {
    long long step = 0;  // phase-2 step threshold the snapshot is labelled with
    std::vector<DesignRecord> designs;
};

/// Snapshot labels for a fine-tuning run: interval, 2*interval, ... below
/// total, plus the final step count.
inline std::vector<long long> snapshot_schedule(long long interval, long long total) {
    std::vector<long long> out;
    if (interval > 0)
        for (long long s = interval; s < total; s += interval) out.push_back(s);
    out.push_back(total);
    return out;
}

/// Fine-tunes `t` on `s`, sampling `per_snapshot` policy designs at each
/// scheduled step. Sampling uses its own generator so the training stream is
/// unaffected by snapshotting.
inline std::vector<SearchSnapshot> run_search_trace(Trainer& t, const Scenario& s, const TrainConfig& cfg,
                                                    long long interval, int per_snapshot, std::uint64_t seed,
                                                    const TrainHooks& extra = {}) {
    const auto schedule = snapshot_schedule(interval, cfg.total_steps);
    std::vector<SearchSnapshot> snaps;
    Rng sampler(seed);
    std::size_t next = 0;
    auto take = [&](long long label) {
        SearchSnapshot snap;
        snap.step = label;
        snap.designs = sample_policy_designs(t.network, s, per_snapshot, sampler, false, 0, cfg.reward).designs;
        for (auto& d : snap.designs) d.step = label;
        snaps.push_back(std::move(snap));
    };
    TrainHooks hooks = extra;
    hooks.on_steps = [&](long long steps) {
        while (next + 1 < schedule.size() && schedule[next] <= steps) take(schedule[next++]);
        if (extra.on_steps) extra.on_steps(steps);
    };
    train_phase2(t, s, cfg, hooks);
    while (next < schedule.size()) take(schedule[next++]);
    return snaps;
}

}  // namespace trussrl
