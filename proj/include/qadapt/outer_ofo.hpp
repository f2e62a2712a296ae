#pragma once

#include "qadapt/dq.hpp"
#include "qadapt/inner_control.hpp"
#include "qadapt/plant.hpp"

#include <cstdint>

namespace qadapt {

// Projected-gradient set-point optimizer running every t_ofo seconds on the
// control-tick grid.
struct OfoConfig {
    double k_mu = 0.0;      // gradient-step scale, 1/s
    double k_gamma = 0.0;   // tracking-weight scale, 1/s
    double t_ofo = 0.0;     // optimizer period T_s, s
    double t_control = 0.0; // control tick T_c, s

    // Control ticks per optimizer trigger.
    int trigger_divisor() const;
};

// Exogenous quantities the optimizer treats as constant between triggers.
struct DisturbanceSample {
    double p_star = 0.0;
    DqVector v_g;
};

// Admissible reactive-power interval from the current circle intersected
// with the modulation constraint evaluated through the steady-state map.
struct FeasibleInterval {
    double lo = 0.0;  // intersection, meaningful when usable()
    double hi = 0.0;
    bool current_feasible = true;     // current circle admits some Q
    bool modulation_feasible = true;  // modulation quadratic admits some Q
    bool disjoint = false;            // both admit Q but do not overlap
    double cur_lo = 0.0, cur_hi = 0.0;
    double mod_lo = 0.0, mod_hi = 0.0;

    bool usable() const { return modulation_feasible && !disjoint; }
};

FeasibleInterval constraint_interval(const DisturbanceSample& d, const Limits& lim,
                                     const PlantParams& p, double v_dc_ref);

struct Projection {
    double q = 0.0;
    bool degraded = false;  // a fallback rule was applied
};

// Clamp into the intersection; on disjoint sub-intervals take the modulation
// endpoint nearest the current interval; with no modulation-feasible Q at
// all, fall back to Q_mm clamped into the current interval.
Projection project(double q, const FeasibleInterval& interval, double q_mm);

// Gradient of 1/2 (||i||^2 + gamma (Q - Q_ref)^2) through the steady-state
// sensitivity H = -J v_g / ||v_g||^2, with the measured current in place of
// the steady-state value.
double composite_gradient(double q_star, DqVector i_meas, double q_ref,
                          DqVector v_g, double gamma);

struct StepSize {
    double mu = 0.0;
    double gamma = 0.0;
};

// mu = k_mu T_s ||v_g||^2, gamma = k_gamma T_s / ||v_g||^2. Validates the
// descent condition k_mu T_s (1 + k_gamma T_s) < 2.
StepSize step_size(DqVector v_g, const OfoConfig& cfg);

// Per-trigger contraction factor 1 - mu (gamma + 1/||v_g||^2); independent
// of the voltage by construction.
double contraction_factor(const OfoConfig& cfg);

struct OfoState {
    double q_star = 0.0;
    std::int64_t tick_count = 0;
    FeasibleInterval last_interval;
    bool degraded = false;
};

// Advance one control tick; the projected-gradient update fires every
// trigger_divisor() ticks (tick 0 included).
OfoState ofo_step(OfoState st, const DisturbanceSample& d, DqVector i_meas,
                  double q_ref, const Limits& lim, const PlantParams& p,
                  double v_dc_ref, const OfoConfig& cfg);

} // namespace qadapt
