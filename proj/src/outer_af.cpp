#include "qadapt/outer_af.hpp"

#include "qadapt/errors.hpp"

#include <cmath>
#include <stdexcept>

namespace qadapt {

double hinge(double value, double threshold, double sharpness) {
    if (sharpness <= 0.0 || threshold <= 0.0) {
        return std::max(0.0, value - threshold);
    }
    const double beta = sharpness / threshold;
    const double z = beta * (value - threshold);
    // softplus(z)/beta in the overflow-safe form max(z,0) + log1p(exp(-|z|))
    return (std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)))) / beta;
}

double gamma1(double i_star_norm, double thr1, double sharpness) {
    if (thr1 < 0.0) throw std::invalid_argument("gamma1: threshold must be non-negative");
    return hinge(i_star_norm, thr1, sharpness);
}

double gamma2(double m_raw_norm, double thr2, double sharpness) {
    if (thr2 < 0.0) throw std::invalid_argument("gamma2: threshold must be non-negative");
    return hinge(m_raw_norm, thr2, sharpness);
}

double q_min_modulation(DqVector v_g, const PlantParams& p) {
    const double z2 = p.impedance_norm_squared();
    if (!(z2 > 0.0)) {
        throw std::invalid_argument("q_min_modulation: grid impedance must be nonzero");
    }
    return p.grid_reactance() * norm_squared(v_g) / z2;
}

AfState af_step(AfState st, double q_ref, double i_star_norm, double m_raw_norm,
                double q_mm, double dt, const AfConfig& cfg) {
    const double g1 = gamma1(i_star_norm, cfg.thr1, cfg.sharpness);
    const double g2 = gamma2(m_raw_norm, cfg.thr2, cfg.sharpness);
    const double dq = -cfg.omega_q * (st.q_star - q_ref) -
                      cfg.kappa1 * g1 * st.q_star -
                      cfg.kappa2 * g2 * (st.q_star - q_mm);
    st.q_star += dt * dq;
    return st;
}

} // namespace qadapt
