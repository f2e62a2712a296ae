#include "qadapt/outer_ofo.hpp"

#include "qadapt/errors.hpp"
#include "qadapt/outer_af.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace qadapt {

int OfoConfig::trigger_divisor() const {
    if (!(t_control > 0.0) || !(t_ofo > 0.0)) {
        throw ValidationError("ofo: t_ofo and t_control must be positive");
    }
    const double ratio = t_ofo / t_control;
    const int m = static_cast<int>(std::lround(ratio));
    if (m < 1 || std::abs(ratio - m) > 1e-9 * ratio) {
        throw ValidationError("ofo.t_ofo must be an integer multiple of timing.t_control");
    }
    return m;
}

FeasibleInterval constraint_interval(const DisturbanceSample& d, const Limits& lim,
                                     const PlantParams& p, double v_dc_ref) {
    const double vn = norm(d.v_g);
    if (vn < lim.v_g_floor) {
        throw GridLostError("constraint_interval: grid voltage below operating floor");
    }
    const double v2 = vn * vn;

    FeasibleInterval iv;
    const double cap = v2 * lim.i_g_max * lim.i_g_max - d.p_star * d.p_star;
    iv.current_feasible = cap >= 0.0;
    const double a = std::sqrt(std::max(0.0, cap));
    iv.cur_lo = -a;
    iv.cur_hi = a;

    const double z2 = p.impedance_norm_squared();
    const double k_mod = lim.m_lim * lim.m_lim * v_dc_ref * v_dc_ref;
    if (z2 == 0.0) {
        // Constraint degenerates to ||v_g||^2 <= (m_lim v_dc_ref)^2, with no
        // Q dependence left.
        iv.modulation_feasible = v2 <= k_mod;
        iv.mod_lo = -std::numeric_limits<double>::infinity();
        iv.mod_hi = std::numeric_limits<double>::infinity();
    } else {
        const double x = p.grid_reactance();
        const double qa = z2 / v2;
        const double qc = v2 - 2.0 * p.grid_resistance * d.p_star +
                          z2 * d.p_star * d.p_star / v2;
        const double disc = x * x - qa * (qc - k_mod);
        iv.modulation_feasible = disc >= 0.0;
        if (iv.modulation_feasible) {
            const double center = x * v2 / z2;
            const double half = std::sqrt(disc) / qa;
            iv.mod_lo = center - half;
            iv.mod_hi = center + half;
        }
    }

    if (iv.modulation_feasible) {
        iv.lo = std::max(iv.cur_lo, iv.mod_lo);
        iv.hi = std::min(iv.cur_hi, iv.mod_hi);
        iv.disjoint = iv.lo > iv.hi;
    }
    return iv;
}

Projection project(double q, const FeasibleInterval& interval, double q_mm) {
    if (!interval.modulation_feasible) {
        return {std::clamp(q_mm, interval.cur_lo, interval.cur_hi), true};
    }
    if (interval.disjoint) {
        // Modulation priority: the endpoint of the modulation interval
        // nearest to the current interval.
        return {interval.mod_lo > interval.cur_hi ? interval.mod_lo : interval.mod_hi,
                true};
    }
    return {std::clamp(q, interval.lo, interval.hi), false};
}

double composite_gradient(double q_star, DqVector i_meas, double q_ref,
                          DqVector v_g, double gamma) {
    const double v2 = norm_squared(v_g);
    if (!(v2 > 0.0)) {
        throw GridLostError("composite_gradient: zero grid voltage");
    }
    const double q_measured = instantaneous_power(v_g, i_meas).reactive_var;
    return gamma * (q_star - q_ref) + q_measured / v2;
}

StepSize step_size(DqVector v_g, const OfoConfig& cfg) {
    const double v2 = norm_squared(v_g);
    if (!(v2 > 0.0)) {
        throw GridLostError("step_size: zero grid voltage");
    }
    const double c3 = cfg.k_mu * cfg.t_ofo;
    const double gv2 = cfg.k_gamma * cfg.t_ofo;
    if (!(c3 > 0.0) || gv2 < 0.0 || c3 * (1.0 + gv2) >= 2.0) {
        throw ValidationError(
            "ofo: descent condition k_mu*t_ofo*(1 + k_gamma*t_ofo) < 2 violated "
            "(got " + std::to_string(c3 * (1.0 + gv2)) + ")");
    }
    return {c3 * v2, gv2 / v2};
}

double contraction_factor(const OfoConfig& cfg) {
    return 1.0 - cfg.k_mu * cfg.t_ofo * (1.0 + cfg.k_gamma * cfg.t_ofo);
}

OfoState ofo_step(OfoState st, const DisturbanceSample& d, DqVector i_meas,
                  double q_ref, const Limits& lim, const PlantParams& p,
                  double v_dc_ref, const OfoConfig& cfg) {
    const bool trigger = st.tick_count % cfg.trigger_divisor() == 0;
    ++st.tick_count;
    if (!trigger) return st;

    const auto [mu, gamma] = step_size(d.v_g, cfg);
    const double phi = composite_gradient(st.q_star, i_meas, q_ref, d.v_g, gamma);
    const FeasibleInterval iv = constraint_interval(d, lim, p, v_dc_ref);
    const double q_mm = q_min_modulation(d.v_g, p);
    const Projection pr = project(st.q_star - mu * phi, iv, q_mm);
    st.q_star = pr.q;
    st.last_interval = iv;
    st.degraded = pr.degraded;
    return st;
}

} // namespace qadapt
