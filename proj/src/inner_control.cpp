#include "qadapt/inner_control.hpp"

#include "qadapt/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace qadapt {

namespace {

constexpr double k_inv_sqrt2 = 1.0 / std::numbers::sqrt2;

// Conditional integration shared by the scalar loops. The command is
// raw(x) = base - ki * x; integration is accepted unless it drives a
// saturated command further into the active limit.
PiStep conditional_pi(double base, double error, double x, double dt,
                      double ki, double limit) {
    const double x_next = x + dt * error;
    const double raw_next = base - ki * x_next;
    if (std::abs(raw_next) <= limit) {
        return {raw_next, x_next};
    }
    const double raw_hold = base - ki * x;
    const bool deeper = (raw_next > limit && raw_next > raw_hold) ||
                        (raw_next < -limit && raw_next < raw_hold);
    if (deeper) {
        return {sat_scalar(raw_hold, limit), x};
    }
    return {sat_scalar(raw_next, limit), x_next};
}

} // namespace

Limits make_limits(double tau_max, double w_max, double alpha_q, double alpha_v,
                   double v_g_nom, double m_lim, double v_g_floor_fraction) {
    if (!(tau_max > 0.0)) throw ValidationError("limits.tau_max must be positive");
    if (!(w_max > 0.0)) throw ValidationError("limits.w_max must be positive");
    if (!(alpha_q >= 1.0)) throw ValidationError("limits.alpha_q must be >= 1");
    if (!(alpha_v >= 1.0)) throw ValidationError("limits.alpha_v must be >= 1");
    if (!(v_g_nom > 0.0)) throw ValidationError("limits.v_g_nom must be positive");
    if (!(m_lim > 0.0 && m_lim <= k_inv_sqrt2 + 1e-12)) {
        throw ValidationError("limits.modulation_limit must lie in (0, 1/sqrt(2)]");
    }
    if (!(v_g_floor_fraction > 0.0 && v_g_floor_fraction < 1.0)) {
        throw ValidationError("limits.v_g_floor_fraction must lie in (0, 1)");
    }
    Limits lim;
    lim.tau_max = tau_max;
    lim.w_max = w_max;
    lim.alpha_q = alpha_q;
    lim.alpha_v = alpha_v;
    lim.v_g_nom = v_g_nom;
    lim.m_lim = m_lim;
    lim.v_g_floor = v_g_floor_fraction * v_g_nom;
    lim.p_g_max = tau_max * w_max;
    lim.q_g_max = lim.p_g_max * std::sqrt(alpha_q * alpha_q - 1.0);
    lim.i_g_max = alpha_q * lim.p_g_max / v_g_nom;
    return lim;
}

LoopGains gains_from_bandwidth(double omega_bw, double zeta, double plant_constant) {
    if (!(omega_bw > 0.0)) throw ValidationError("tuning: loop bandwidth must be positive");
    if (!(zeta > 0.0)) throw ValidationError("tuning: loop damping must be positive");
    if (!(plant_constant > 0.0)) {
        throw ValidationError("tuning: plant storage constant must be positive");
    }
    return {2.0 * zeta * omega_bw * plant_constant,
            omega_bw * omega_bw * plant_constant, omega_bw, zeta};
}

PiStep speed_pi_step(double w, double w_ref, double x_m, double dt,
                     const LoopGains& g, double tau_max) {
    const double e = w - w_ref;
    return conditional_pi(-g.kp * e, e, x_m, dt, g.ki, tau_max);
}

PiStep dc_pi_step(double v_dc, double v_dc_ref, double x_dc, double tau_m,
                  double w_ref, double dt, const LoopGains& g, double p_g_max) {
    const double e = v_dc - v_dc_ref;
    const double base = -g.kp * e * v_dc_ref + tau_m * w_ref;
    return conditional_pi(base, e, x_dc, dt, g.ki * v_dc_ref, p_g_max);
}

DqVector steady_state_current(double p_star, double q_star, DqVector v_g) {
    const double v2 = norm_squared(v_g);
    return (p_star * v_g - q_star * rotate90(v_g)) / v2;
}

DqVector current_reference(double p_star, double q_star, DqVector v_g,
                           double i_g_max, double v_floor) {
    if (norm(v_g) < v_floor) {
        throw GridLostError("current_reference: grid voltage below operating floor");
    }
    return sat_circular(steady_state_current(p_star, q_star, v_g), i_g_max);
}

CurrentPiStep current_pi_step(DqVector i_g, DqVector i_star, DqVector x_g,
                              DqVector v_g, double dt, const LoopGains& g,
                              const PlantParams& p, double v_dc_ref,
                              double m_lim) {
    const DqVector e = i_g - i_star;
    // Rectangular limiter circumscribing the modulation disc keeps the
    // integrator contribution per axis within 1/sqrt(2).
    const double x_box = v_dc_ref / (std::numbers::sqrt2 * g.ki);
    DqVector x_next = x_g + dt * e;
    x_next.d = sat_scalar(x_next.d, x_box);
    x_next.q = sat_scalar(x_next.q, x_box);
    const DqVector raw = (v_g - apply_grid_impedance(i_star, p) + g.kp * e +
                          g.ki * x_next) /
                         v_dc_ref;
    return {sat_circular(raw, m_lim), raw, x_next};
}

double modulation_norm_squared(double p, double q, DqVector v_g,
                               const PlantParams& params, double v_dc_ref) {
    const double v2 = norm_squared(v_g);
    if (!(v2 > 0.0)) {
        throw GridLostError("modulation_norm_squared: zero grid voltage");
    }
    const double z2 = params.impedance_norm_squared();
    const double x = params.grid_reactance();
    const double r = params.grid_resistance;
    const double num = v2 - 2.0 * r * p - 2.0 * x * q + z2 * (p * p + q * q) / v2;
    return num / (v_dc_ref * v_dc_ref);
}

} // namespace qadapt
