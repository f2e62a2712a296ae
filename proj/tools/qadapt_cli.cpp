// Command-line harness around the simulator: scenario runs, feasibility
// maps, inner-loop identification, and the acceptance criteria.
//
// Exit codes: 0 success, 1 abnormal run outcome (diverged / grid lost /
// stopped on trip), 2 configuration or usage error, 3 verification failure.
#include "qadapt/config.hpp"
#include "qadapt/errors.hpp"
#include "qadapt/pq_map.hpp"
#include "qadapt/simulation.hpp"
#include "qadapt/trace_io.hpp"
#include "qadapt/verification.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct RunOptions {
    std::string config_path;
    std::string mode;
    std::string scenario;
    std::optional<double> duration;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> stride;
    bool plot = false;
    bool hold_exogenous = false;
    bool hard_stop_on_trip = false;
};

qadapt::SimConfig assemble_config(const RunOptions& opt,
                                  std::vector<std::string>& warnings) {
    qadapt::SimConfig cfg = opt.config_path.empty()
                                ? qadapt::default_config()
                                : qadapt::load_config(opt.config_path, &warnings);
    if (!opt.mode.empty()) cfg.outer_mode = qadapt::outer_mode_from_string(opt.mode);
    if (!opt.scenario.empty()) {
        cfg.scenario.kind = qadapt::scenario_kind_from_string(opt.scenario);
    }
    if (opt.duration) cfg.scenario.duration = *opt.duration;
    if (opt.out_dir) cfg.output.dir = *opt.out_dir;
    if (opt.seed) cfg.seed = *opt.seed;
    if (opt.stride) cfg.output.trace_stride = *opt.stride;
    if (opt.plot) cfg.output.plot = true;
    if (opt.hold_exogenous) cfg.scenario.hold_exogenous = true;
    if (opt.hard_stop_on_trip) cfg.output.hard_stop_on_trip = true;
    for (const std::string& w : qadapt::validate_config(cfg)) warnings.push_back(w);
    return cfg;
}

void print_warnings(const std::vector<std::string>& warnings) {
    for (const std::string& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

int cmd_run(const RunOptions& opt) {
    std::vector<std::string> warnings;
    const qadapt::SimConfig cfg = assemble_config(opt, warnings);
    print_warnings(warnings);

    qadapt::ConvergenceSummary summary;
    const qadapt::ConvergenceSummary* summary_ptr = nullptr;
    const qadapt::SimResult res = qadapt::run_scenario(cfg);
    if (cfg.outer_mode == qadapt::OuterMode::ofo && !res.triggers.empty()) {
        try {
            const qadapt::InnerLoopConstants consts = qadapt::identify_inner_loop(cfg);
            summary = qadapt::summarize_convergence(res.triggers, consts, cfg.limits,
                                                    cfg.ofo.trigger_divisor());
            summary_ptr = &summary;
        } catch (const std::exception& e) {
            std::fprintf(stderr, "warning: convergence analysis skipped: %s\n", e.what());
        }
    }

    const qadapt::OutputPaths paths = qadapt::write_outputs(res, cfg.output, summary_ptr);
    std::printf("%s", qadapt::render_metrics_json(res.metrics, summary_ptr).c_str());
    std::fprintf(stderr, "trace:   %s\nmetrics: %s\n", paths.trace_csv.c_str(),
                 paths.metrics_json.c_str());
    if (!paths.plot_svg.empty()) std::fprintf(stderr, "plot:    %s\n", paths.plot_svg.c_str());

    // 2 flags every early termination: divergence, grid loss, hard stop.
    return res.metrics.outcome == qadapt::RunOutcome::completed ? 0 : 2;
}

int cmd_pqmap(const std::string& config_path, int points, const std::string& out_path,
              double voltage_fraction) {
    std::vector<std::string> warnings;
    RunOptions opt;
    opt.config_path = config_path;
    const qadapt::SimConfig cfg = assemble_config(opt, warnings);
    print_warnings(warnings);
    const qadapt::DqVector v{voltage_fraction * cfg.limits.v_g_nom, 0.0};
    const auto rows = qadapt::pq_feasible_map(cfg.limits, cfg.plant, cfg.v_dc_ref, v, points);
    const std::string csv = qadapt::render_pq_map_csv(rows);
    if (out_path.empty() || out_path == "-") {
        std::printf("%s", csv.c_str());
    } else {
        qadapt::write_text_file(out_path, csv);
        std::fprintf(stderr, "map: %s (%d slices)\n", out_path.c_str(), points);
    }
    return 0;
}

int cmd_identify(const std::string& config_path) {
    std::vector<std::string> warnings;
    RunOptions opt;
    opt.config_path = config_path;
    const qadapt::SimConfig cfg = assemble_config(opt, warnings);
    print_warnings(warnings);
    const qadapt::InnerLoopConstants c = qadapt::identify_inner_loop(cfg);
    std::printf("c1 = %.6g\nc2 = %.6g per tick\nc3 = %.6g\nfit residual = %.3g\n", c.c1,
                c.c2, c.c3, c.fit_residual);
    const int m = cfg.ofo.trigger_divisor();
    std::printf("timescale separation c1 e^{-c2 m} = %.3g (m = %d)\n",
                c.c1 * std::exp(-c.c2 * m), m);
    return 0;
}

int cmd_verify(std::optional<int> only) {
    if (only) {
        const qadapt::CriterionResult r = qadapt::run_criterion(*only);
        std::printf("%s  %d  %s  [%.2fs]  %s\n", r.pass ? "PASS" : "FAIL", r.index,
                    r.name.c_str(), r.seconds, r.detail.c_str());
        return r.pass ? 0 : 3;
    }
    const auto results = qadapt::run_all_criteria(&std::cout);
    for (const auto& r : results) {
        if (!r.pass) return 3;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Grid-side reactive set-point adaptation simulator"};
    app.require_subcommand(0, 1);

    bool print_schema = false;
    app.add_flag("--print-schema", print_schema, "Print the config file reference and exit");

    RunOptions run_opt;
    CLI::App* run = app.add_subcommand("run", "Simulate one scenario and write outputs");
    run->add_option("--config", run_opt.config_path, "JSON config file")
        ->check(CLI::ExistingFile);
    run->add_option("--mode", run_opt.mode, "Outer loop: none | af | ofo");
    run->add_option("--scenario", run_opt.scenario,
                    "voltage_dip | reference_step | over_voltage | custom");
    run->add_option("--duration", run_opt.duration, "Run length in seconds");
    run->add_option("--out", run_opt.out_dir, "Output directory");
    run->add_option("--seed", run_opt.seed, "Deterministic run seed");
    run->add_option("--stride", run_opt.stride, "Record every Nth control tick");
    run->add_flag("--plot", run_opt.plot, "Also write plot.svg");
    run->add_flag("--hold-exogenous", run_opt.hold_exogenous,
                  "Hold exogenous signals constant between optimizer triggers");
    run->add_flag("--hard-stop-on-trip", run_opt.hard_stop_on_trip,
                  "Stop at the first protection trip");

    std::string pq_config;
    int pq_points = 401;
    std::string pq_out;
    double pq_voltage = 1.0;
    CLI::App* pqmap = app.add_subcommand("pqmap", "Write the admissible (P, Q) region");
    pqmap->add_option("--config", pq_config, "JSON config file")->check(CLI::ExistingFile);
    pqmap->add_option("--points", pq_points, "Active-power slices")
        ->check(CLI::Range(2, 2000000));
    pqmap->add_option("--out", pq_out, "CSV path ('-' for stdout)");
    pqmap->add_option("--voltage", pq_voltage, "Grid voltage as a fraction of nominal");

    std::string id_config;
    CLI::App* identify = app.add_subcommand(
        "identify", "Measure the inner-loop decay envelope at the scenario start");
    identify->add_option("--config", id_config, "JSON config file")
        ->check(CLI::ExistingFile);

    std::optional<int> verify_only;
    CLI::App* verify = app.add_subcommand("verify", "Run the acceptance criteria");
    verify->add_option("--only", verify_only, "Run a single criterion by number")
        ->check(CLI::Range(1, qadapt::criterion_count()));

    CLI11_PARSE(app, argc, argv);

    try {
        if (print_schema) {
            std::printf("%s", qadapt::schema_reference().c_str());
            return 0;
        }
        if (run->parsed()) return cmd_run(run_opt);
        if (pqmap->parsed()) return cmd_pqmap(pq_config, pq_points, pq_out, pq_voltage);
        if (identify->parsed()) return cmd_identify(id_config);
        if (verify->parsed()) return cmd_verify(verify_only);
        std::printf("%s", app.help().c_str());
        return 0;
    } catch (const qadapt::ValidationError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
