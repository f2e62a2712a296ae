#pragma once

#include "qadapt/inner_control.hpp"
#include "qadapt/outer_ofo.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace qadapt {

// Inner-loop envelope constants: ||i(k) - i*|| <= c1 ||i(0) - i*|| e^{-c2 k}
// with k counted in control ticks; c3 is the optimizer step scale
// (mu = c3 ||v_g||^2).
struct InnerLoopConstants {
    double c1 = 0.0;
    double c2 = 0.0;
    double c3 = 0.0;
    double fit_residual = 0.0;  // RMS residual of the log-linear fit
};

// Closed-form minimizer of 1/2 (||h(Q)||^2 + gamma (Q - Q_ref)^2) clamped to
// the feasible interval. Throws InfeasibleError when the interval is empty.
double optimal_q_analytic(const DisturbanceSample& d, double q_ref, double gamma,
                          const FeasibleInterval& interval);

// Grid scan plus golden-section refinement of the same objective.
double optimal_q_bruteforce(const DisturbanceSample& d, double q_ref, double gamma,
                            const FeasibleInterval& interval, int n_grid);

inline double psi_metric(double q_star, double q_opt) {
    return std::abs(q_star - q_opt);
}

// Log-linear least-squares fit of a residual-norm step response sampled per
// control tick. Requires at least 20 samples above the numerical floor.
InnerLoopConstants estimate_inner_loop_constants(std::span<const double> residual_norms);

// Smallest c1 making the two-point envelope
// r[k] <= c1 r[j] e^{-c2 (k-j)} hold over every ordered sample pair.
double envelope_admissible_c1(std::span<const double> residual_norms, double c2);

// One optimizer trigger as observed by the harness. q_star_pre is the
// iterate entering the update, q_star_post the projected result.
struct TriggerSample {
    std::int64_t tick = 0;
    double q_star_pre = 0.0;
    double q_star_post = 0.0;
    double q_ref = 0.0;
    DisturbanceSample d;
    DqVector i_meas;
    FeasibleInterval interval;
    double mu = 0.0;
    double gamma = 0.0;
    double epsilon = 0.0;
    bool degraded = false;
};

struct ConvergenceRecord {
    std::int64_t k = 0;          // control tick of the trigger
    double psi = 0.0;            // |q_star_pre - q_opt|
    double epsilon = 0.0;        // contraction factor at this trigger
    double delta_q_opt = 0.0;    // |q_opt(next) - q_opt(this)|, 0 at the tail
    double inner_residual = 0.0; // ||i_meas - h(q_star_pre, d)||
    double bound_rhs = 0.0;      // epsilon psi + delta_q_opt + c1 c3 ||v|| r e^{-c2}
    bool usable = false;         // interval admitted a clamped optimum
};

std::vector<ConvergenceRecord> build_convergence_records(
    std::span<const TriggerSample> triggers, const InnerLoopConstants& consts);

struct ContractionBoundReport {
    int pairs = 0;
    int satisfied = 0;
    double worst_margin = 0.0;  // min over pairs of bound_rhs - psi(next)
    bool pass = false;          // every pair satisfied up to 1e-9 slack
};

// Checks psi(l+1) <= bound_rhs(l) over consecutive usable triggers spaced
// exactly m control ticks apart.
ContractionBoundReport contraction_bound_check(std::span<const ConvergenceRecord> records, int m);

// Asymptotic tracking-error bound
//   (dq_max + 2 c1 c3 alpha_q p_g_max e^{-c2} / (1 - c1 e^{-c2 m})) / (1 - eps_max).
double tracking_error_asymptote(const InnerLoopConstants& consts, double eps_max,
                            double dq_max, const Limits& lim, int m);

} // namespace qadapt
