#pragma once

#include "qadapt/config.hpp"
#include "qadapt/convergence.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace qadapt {

// Per-tick history, one entry per recorded control tick (see
// output.trace_stride). Norm columns carry dq magnitudes.
struct ScenarioTrace {
    std::vector<double> t;
    std::vector<double> w, w_ref;
    std::vector<double> v_dc;
    std::vector<double> tau_m, tau_l;
    std::vector<double> m_norm, m_raw_norm;
    std::vector<double> i_norm, i_star_norm, i_star_raw_norm, i_err_norm;
    std::vector<double> p_star, p_meas, q_meas, q_ref, q_star;
    std::vector<double> v_g_norm;
    std::vector<std::uint8_t> current_feasible, modulation_feasible, degraded;
    std::vector<std::uint8_t> ofo_trigger, tripped;

    double m_limit = 0.0;   // configured modulation ceiling, for reference
    double i_g_max = 0.0;   // configured current ceiling, for reference

    std::size_t size() const { return t.size(); }
};

struct Counters {
    std::int64_t control_ticks = 0;
    std::int64_t plant_steps = 0;
    std::int64_t af_steps = 0;
    std::int64_t ofo_tick_calls = 0;
    std::int64_t ofo_triggers = 0;
    std::int64_t degraded_triggers = 0;
};

struct TripEvent {
    double t = 0.0;
    double v_dc = 0.0;
    std::string kind;  // dc_overvoltage | dc_undervoltage
};

enum class RunOutcome { completed, diverged, grid_lost, stopped_on_trip };

std::string to_string(RunOutcome o);

struct MetricsReport {
    RunOutcome outcome = RunOutcome::completed;
    std::string termination_reason;  // empty when completed
    double end_time = 0.0;
    std::size_t rows = 0;
    Counters counters;

    double max_i_norm = 0.0;
    double max_m_norm = 0.0;
    double max_m_raw_norm = 0.0;
    double max_abs_w = 0.0;
    double min_v_dc = 0.0;
    double max_v_dc = 0.0;
    bool overspeed = false;    // |w| exceeded 1.05 w_max at some tick
    bool overcurrent = false;  // ||i_g|| exceeded 1.001 i_g_max at some tick

    // Seconds of exposure, accumulated per control tick.
    double time_m_saturated = 0.0;
    double time_current_infeasible = 0.0;
    double time_modulation_infeasible = 0.0;
    double time_disjoint = 0.0;
    double time_degraded = 0.0;

    // RMS tracking errors over the trailing half of the run.
    double q_ref_rms_err_tail = 0.0;
    double q_star_rms_err_tail = 0.0;

    double final_w = 0.0;
    double final_v_dc = 0.0;
    double final_q_star = 0.0;
    double final_q_meas = 0.0;
    double final_p_meas = 0.0;

    std::vector<TripEvent> trips;
    bool tripped() const { return !trips.empty(); }
};

struct SimResult {
    ScenarioTrace trace;
    MetricsReport metrics;
    std::vector<TriggerSample> triggers;  // optimizer mode only
};

// Runs one scenario to completion (or premature termination, reported in
// metrics.outcome). The configuration is validated internally.
SimResult run_scenario(const SimConfig& cfg);

// Identifies the inner-loop envelope constants by stepping the reactive
// set-point at a frozen operating point and fitting the current-residual
// decay. c1 is widened to the smallest envelope-admissible value so the
// bound holds pointwise on the measured response, not just on the fit.
InnerLoopConstants identify_inner_loop(const SimConfig& cfg);

struct ConvergenceSummary {
    InnerLoopConstants constants;
    int m = 0;               // control ticks per optimizer trigger
    double epsilon = 0.0;    // per-trigger contraction factor
    std::size_t n_triggers = 0;
    std::size_t n_usable = 0;
    ContractionBoundReport bound_check;
    double max_psi_ratio = 0.0;  // worst observed psi(l+1)/psi(l)
    double dq_max = 0.0;         // max optimum drift per trigger
    double asymptote = 0.0;      // guaranteed limsup of psi
    double tail_sup_psi = 0.0;   // sup of psi over the trailing triggers
    bool asymptote_holds = false;
};

// Evaluates the contraction certificate on a recorded trigger sequence.
ConvergenceSummary summarize_convergence(std::span<const TriggerSample> triggers,
                                         const InnerLoopConstants& constants,
                                         const Limits& lim, int m,
                                         double tail_fraction = 0.5);

} // namespace qadapt
