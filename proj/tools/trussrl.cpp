#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "trussrl/baseline.hpp"
#include "trussrl/checkpoint.hpp"
#include "trussrl/metrics.hpp"
#include "trussrl/scenario_io.hpp"

namespace fs = std::filesystem;
using namespace trussrl;

namespace {

struct Globals {
    std::string scenario;
    std::uint64_t seed = 0;
    std::string config;
    std::string out = ".";
};

std::ofstream open_out(const Globals& g, const std::string& name) {
    fs::create_directories(g.out);
    const fs::path p = fs::path(g.out) / name;
    std::ofstream os(p, std::ios::trunc);
    if (!os) throw Error(ErrorCategory::io, "cannot write " + p.string());
    return os;
}

std::string out_path(const Globals& g, const std::string& name) {
    fs::create_directories(g.out);
    return (fs::path(g.out) / name).string();
}

Scenario require_scenario(const Globals& g) {
    if (g.scenario.empty()) throw Error(ErrorCategory::input, "--scenario is required for this command");
    return load_scenario(g.scenario);
}

TrainConfig load_config(const Globals& g, TrainConfig base = {}) {
    if (g.config.empty()) return base;
    return train_config_from_json(read_json_file(g.config), base);
}

/// Log file plus an optional checkpoint every `checkpoint_every` iterations.
TrainHooks logging_hooks(std::ostream& log, Trainer*& trainer, const Globals& g, const std::string& prefix) {
    TrainHooks h;
    h.on_iteration = [&log, &trainer, g, prefix](const IterationLog& l) {
        write_log_row(log, l);
        log.flush();
        const int every = trainer ? trainer->config.checkpoint_every : 0;
        if (trainer && every > 0 && l.iteration % every == 0)
            save_checkpoint(*trainer, out_path(g, prefix + "_iter" + std::to_string(l.iteration) + ".ckpt"));
        std::cerr << prefix << " iteration " << l.iteration << "  steps " << l.steps << "  mean reward " << l.mean_reward
                  << "  terminated " << l.terminated << "/" << l.iteration_episodes << '\n';
    };
    return h;
}

void write_summary(const Globals& g, const std::string& file, const std::string& label, const MetricsSummary& m) {
    auto os = open_out(g, file);
    write_summary_csv(os, label, m);
}

std::vector<DesignRecord> baseline_records(const Scenario& s, int count, Rng& rng, const BaselineConfig& cfg) {
    std::vector<DesignRecord> out;
    for (int k = 0; k < count; ++k) {
        const GridState d = generate_baseline(s, rng, cfg);
        DesignRecord r{d, encode_state(d, s), {}, 0, k};
        try {
            r.evaluation = evaluate_design(d, s);
        } catch (const Error& e) {
            if (e.category() != ErrorCategory::analysis && e.category() != ErrorCategory::numeric) throw;
            std::cerr << "baseline design " << k << ": " << e.what() << '\n';
            continue;
        }
        out.push_back(std::move(r));
    }
    return out;
}

void print_summary(const std::string& label, const MetricsSummary& m) {
    std::cout << label << ": designs " << m.n_designs << ", avg frames " << m.avg_frame_count << ", avg failed "
              << m.avg_failed_elements << ", p90 utilization " << m.utilization_p90 << ", without failures "
              << m.pct_without_failures << "%, within deflection " << m.pct_within_allowable_deflection
              << "%, high-performing " << m.high_performing_count << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Modular truss-frame cantilever design with masked PPO"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--scenario", g.scenario, "Scenario JSON file");
    app.add_option("--seed", g.seed, "Random seed");
    app.add_option("--config", g.config, "Training config JSON (missing keys keep defaults)");
    app.add_option("--out", g.out, "Output directory");

    // train-base
    auto* base = app.add_subcommand("train-base", "Phase 1: randomized targets, self-load, one frame type");
    long long base_steps = -1;
    base->add_option("--steps", base_steps, "Total environment steps (overrides config)");

    // finetune
    auto* fine = app.add_subcommand("finetune", "Phase 2: fine-tune a base checkpoint on the scenario");
    std::string fine_ckpt;
    long long fine_steps = -1;
    fine->add_option("--checkpoint", fine_ckpt, "Base checkpoint")->required();
    fine->add_option("--steps", fine_steps, "Total environment steps (overrides config)");

    // baseline
    auto* bl = app.add_subcommand("baseline", "Generate randomized baseline designs");
    int bl_count = 500;
    BaselineConfig bl_cfg;
    bl->add_option("--count", bl_count, "Number of designs");
    bl->add_option("--p-expand", bl_cfg.p_expand, "Frontier expansion probability");
    bl->add_option("--max-retries", bl_cfg.max_retries, "Retries per design");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Sample designs from a policy checkpoint");
    std::string ev_ckpt;
    int ev_count = 100;
    bool ev_greedy = false, ev_traces = false;
    ev->add_option("--checkpoint", ev_ckpt, "Policy checkpoint")->required();
    ev->add_option("--count", ev_count, "Number of terminated designs wanted");
    ev->add_flag("--greedy", ev_greedy, "Arg-max actions instead of sampling");
    ev->add_flag("--traces", ev_traces, "Write per-step episode traces (JSONL)");

    // compare
    auto* cmp = app.add_subcommand("compare", "Signed metric differences between policy and baseline summaries");
    std::vector<std::string> cmp_policy, cmp_baseline;
    cmp->add_option("--policy", cmp_policy, "Policy summary CSV (repeatable)")->required();
    cmp->add_option("--baseline", cmp_baseline, "Baseline summary CSV (repeatable, paired in order)")->required();

    // export-space
    auto* ex = app.add_subcommand("export-space", "Export policy and baseline design vectors for embedding");
    std::string ex_ckpt;
    int ex_count = 500;
    ex->add_option("--checkpoint", ex_ckpt, "Policy checkpoint")->required();
    ex->add_option("--count", ex_count, "Designs per source");

    // trace-search
    auto* ts = app.add_subcommand("trace-search", "Fine-tune while snapshotting policy designs");
    std::string ts_ckpt;
    long long ts_interval = 7500, ts_steps = -1;
    int ts_per = 100;
    ts->add_option("--checkpoint", ts_ckpt, "Base checkpoint")->required();
    ts->add_option("--interval", ts_interval, "Snapshot interval in steps");
    ts->add_option("--steps", ts_steps, "Fine-tuning steps (overrides config)");
    ts->add_option("--per-snapshot", ts_per, "Designs sampled per snapshot");

    // analyze
    auto* an = app.add_subcommand("analyze", "Run the FEA on one exported design vector");
    std::string an_file;
    int an_row = 0;
    an->add_option("--designs", an_file, "Design vector CSV")->required();
    an->add_option("--row", an_row, "Zero-based data row");

    CLI11_PARSE(app, argc, argv);

    try {
        if (base->parsed()) {
            if (g.scenario.empty()) throw Error(ErrorCategory::input, "--scenario is required for this command");
            const Scenario tmpl = load_scenario(g.scenario, false);
            TrainConfig cfg = load_config(g);
            if (base_steps >= 0) cfg.total_steps = base_steps;
            auto log = open_out(g, "train_log.csv");
            write_log_header(log);
            Trainer* live = nullptr;
            TrainHooks hooks = logging_hooks(log, live, g, "base");
            Scenario shape = tmpl;
            shape.inventory_rows = tmpl.inventory_row_count();
            Trainer t(input_spec(shape), cfg, g.seed);
            live = &t;
            t.train(phase1_sampler(tmpl, cfg.phase1_target_count), cfg.n_rand, cfg.total_steps, hooks);
            save_checkpoint(t, out_path(g, "base.ckpt"));
            std::cout << "wrote " << out_path(g, "base.ckpt") << '\n';
        } else if (fine->parsed()) {
            const Scenario s = require_scenario(g);
            Trainer t = load_checkpoint(fine_ckpt);
            TrainConfig cfg = load_config(g, t.config);
            if (fine_steps >= 0) cfg.total_steps = fine_steps;
            auto log = open_out(g, "finetune_log.csv");
            write_log_header(log);
            Trainer* live = &t;
            TrainHooks hooks = logging_hooks(log, live, g, "finetune");
            std::vector<DesignRecord> designs;
            hooks.on_design = [&](const DesignRecord& d) { designs.push_back(d); };
            train_phase2(t, s, cfg, hooks);
            save_checkpoint(t, out_path(g, "finetuned.ckpt"));
            export_design_vectors(designs, s, out_path(g, "training_designs.csv"));
            std::cout << "wrote " << out_path(g, "finetuned.ckpt") << " and " << designs.size() << " training designs\n";
        } else if (bl->parsed()) {
            const Scenario s = require_scenario(g);
            Rng rng(g.seed);
            const auto records = baseline_records(s, bl_count, rng, bl_cfg);
            export_design_vectors(records, s, out_path(g, "baseline_designs.csv"));
            const MetricsSummary m = evaluate(records);
            write_summary(g, "baseline_summary.csv", "baseline", m);
            print_summary("baseline", m);
        } else if (ev->parsed()) {
            const Scenario s = require_scenario(g);
            Trainer t = load_checkpoint(ev_ckpt);
            Rng rng(g.seed);
            std::vector<EpisodeTrace> traces;
            const auto samples = sample_policy_designs(t.network, s, ev_count, rng, ev_greedy, 0, t.config.reward,
                                                       ev_traces ? &traces : nullptr);
            export_design_vectors(samples.designs, s, out_path(g, "policy_designs.csv"));
            const MetricsSummary m = evaluate(samples.designs);
            write_summary(g, "policy_summary.csv", "policy", m);
            if (ev_traces) {
                auto os = open_out(g, "traces.jsonl");
                for (std::size_t k = 0; k < traces.size(); ++k) write_trace_jsonl(os, static_cast<int>(k), traces[k]);
            }
            print_summary("policy", m);
            std::cout << "episodes " << samples.episodes << ", truncated " << samples.truncated << '\n';
        } else if (cmp->parsed()) {
            if (cmp_policy.size() != cmp_baseline.size())
                throw Error(ErrorCategory::input, "--policy and --baseline must be given the same number of times");
            std::vector<std::vector<MetricDelta>> all;
            for (std::size_t k = 0; k < cmp_policy.size(); ++k)
                all.push_back(compare(read_summary_csv(cmp_policy[k]), read_summary_csv(cmp_baseline[k])));
            {
                auto os = open_out(g, "compare.csv");
                write_delta_csv(os, all.front());
            }
            write_delta_table(std::cout, all.front());
            if (all.size() > 1) {
                auto os = open_out(g, "compare_aggregate.csv");
                write_aggregate_csv(os, aggregate_deltas(all));
            }
        } else if (ex->parsed()) {
            const Scenario s = require_scenario(g);
            Trainer t = load_checkpoint(ex_ckpt);
            Rng rng(g.seed);
            auto policy = sample_policy_designs(t.network, s, ex_count, rng, false, 0, t.config.reward).designs;
            auto baseline = baseline_records(s, ex_count, rng, {});
            std::vector<DesignRecord> all = policy;
            all.insert(all.end(), baseline.begin(), baseline.end());
            export_design_vectors(all, s, out_path(g, "space_vectors.csv"));
            auto labels = open_out(g, "space_labels.csv");
            labels << "row,source,high_performing\n";
            for (std::size_t k = 0; k < all.size(); ++k)
                labels << k << ',' << (k < policy.size() ? "policy" : "baseline") << ','
                       << int(is_high_performing(all[k].evaluation.frame_count, all[k].evaluation.failed_count)) << '\n';
            print_summary("policy", evaluate(policy));
            print_summary("baseline", evaluate(baseline));
        } else if (ts->parsed()) {
            const Scenario s = require_scenario(g);
            Trainer t = load_checkpoint(ts_ckpt);
            TrainConfig cfg = load_config(g, t.config);
            if (ts_steps >= 0) cfg.total_steps = ts_steps;
            auto log = open_out(g, "finetune_log.csv");
            write_log_header(log);
            Trainer* live = &t;
            const auto snaps =
                run_search_trace(t, s, cfg, ts_interval, ts_per, g.seed ^ 0x5eedULL, logging_hooks(log, live, g, "trace"));
            auto index = open_out(g, "snapshots.csv");
            index << "snapshot,step,file,n_designs\n";
            for (std::size_t k = 0; k < snaps.size(); ++k) {
                const std::string file = "snapshot_" + std::to_string(snaps[k].step) + ".csv";
                export_design_vectors(snaps[k].designs, s, out_path(g, file));
                index << k << ',' << snaps[k].step << ',' << file << ',' << snaps[k].designs.size() << '\n';
            }
            std::cout << "wrote " << snaps.size() << " snapshots\n";
        } else if (an->parsed()) {
            const Scenario s = require_scenario(g);
            const auto vectors = import_design_vectors(an_file);
            if (an_row < 0 || an_row >= static_cast<int>(vectors.size()))
                throw Error(ErrorCategory::input, "--row out of range");
            const GridState d = design_from_vector(vectors[static_cast<std::size_t>(an_row)].cells, s);
            const FEModel model = build_fe_model(d, s);
            const FEAResult r = solve_static(model);
            {
                auto os = open_out(g, "model.txt");
                write_model_listing(model, os);
            }
            {
                auto os = open_out(g, "fea_nodes.csv");
                write_node_csv(model, r, os);
            }
            {
                auto os = open_out(g, "fea_elements.csv");
                write_element_csv(model, r, os);
            }
            const auto e = evaluate_design(d, s);
            std::cout << "frames " << e.frame_count << ", failed " << e.failed_count << ", max deflection "
                      << e.max_deflection << " m (allowable " << e.allowable_deflection << "), reward " << e.reward
                      << '\n';
        }
    } catch (const Error& e) {
        std::cerr << "error [" << category_name(e.category()) << "]: " << e.what() << '\n';
        return exit_code(e.category());
    } catch (const std::exception& e) {
        std::cerr << "error [io]: " << e.what() << '\n';
        return exit_code(ErrorCategory::io);
    }
    return 0;
}
