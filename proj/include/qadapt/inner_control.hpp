#pragma once

#include "qadapt/dq.hpp"
#include "qadapt/plant.hpp"

namespace qadapt {

// Operating envelope of the drive. Derived members are filled by
// make_limits so the coupling between them holds by construction.
struct Limits {
    double tau_max = 0.0;    // N m
    double w_max = 0.0;      // rad/s
    double alpha_q = 1.0;    // apparent-power de-rating factor, >= 1
    double alpha_v = 1.0;    // DC voltage utilization factor
    double v_g_nom = 0.0;    // nominal grid voltage dq magnitude, V
    double m_lim = 0.0;      // applied modulation norm limit, <= 1/sqrt(2)
    double v_g_floor = 0.0;  // grid-lost threshold, V

    double p_g_max = 0.0;    // tau_max * w_max
    double q_g_max = 0.0;    // p_g_max * sqrt(alpha_q^2 - 1)
    double i_g_max = 0.0;    // alpha_q * p_g_max / v_g_nom
};

Limits make_limits(double tau_max, double w_max, double alpha_q, double alpha_v,
                   double v_g_nom, double m_lim, double v_g_floor_fraction = 0.01);

// PI gains placed for a critically parameterized second-order closed loop:
// kp = 2 zeta omega X, ki = omega^2 X where X is the storage element.
struct LoopGains {
    double kp = 0.0;
    double ki = 0.0;
    double omega_bw = 0.0;
    double zeta = 0.0;
};

LoopGains gains_from_bandwidth(double omega_bw, double zeta, double plant_constant);

struct PiStep {
    double output = 0.0;      // saturated command
    double integrator = 0.0;  // updated integrator state
};

// Speed loop: tau_m = sat(-kp (w - w_ref) - ki x_m). Conditional
// anti-windup: the integrator holds whenever the command is saturated and
// the error would push it deeper into the limit.
PiStep speed_pi_step(double w, double w_ref, double x_m, double dt,
                     const LoopGains& g, double tau_max);

// DC-link loop: P_g* = sat((-kp (v_dc - v_dc_ref) - ki x_dc) v_dc_ref
//                          + tau_m w_ref), same anti-windup rule.
PiStep dc_pi_step(double v_dc, double v_dc_ref, double x_dc, double tau_m,
                  double w_ref, double dt, const LoopGains& g, double p_g_max);

// Maps a (P, Q) command to the current achieving it at voltage v_g, then
// applies the circular current limit. Throws GridLostError below v_floor.
DqVector current_reference(double p_star, double q_star, DqVector v_g,
                           double i_g_max, double v_floor);

// Unsaturated affine steady-state map h(Q; P, v_g).
DqVector steady_state_current(double p_star, double q_star, DqVector v_g);

struct CurrentPiStep {
    DqVector m_g;       // applied modulation (circularly limited)
    DqVector m_g_raw;   // command before the limiter
    DqVector integrator;
};

// Current loop with full feed-forward of v_g and Z_g i*. The integrator is
// clamped per component to the box circumscribing the modulation disc.
CurrentPiStep current_pi_step(DqVector i_g, DqVector i_star, DqVector x_g,
                              DqVector v_g, double dt, const LoopGains& g,
                              const PlantParams& p, double v_dc_ref,
                              double m_lim);

// Steady-state squared modulation norm at operating point (P, Q):
// (||v||^2 - 2 R P - 2 X Q + ||Z||^2 (P^2 + Q^2) / ||v||^2) / v_dc_ref^2.
double modulation_norm_squared(double p, double q, DqVector v_g,
                               const PlantParams& params, double v_dc_ref);

} // namespace qadapt
