#pragma once

#include "qadapt/dq.hpp"
#include "qadapt/plant.hpp"

namespace qadapt {

// Activation-function set-point governor. Drives the reactive-power
// set-point toward its external reference while hinge penalties push it away
// from current and modulation constraint violations.
struct AfConfig {
    double omega_q = 0.0;    // tracking rate, 1/s
    double kappa1 = 0.0;     // current-hinge gain, 1/(A s)
    double kappa2 = 0.0;     // modulation-hinge gain, 1/s
    double thr1 = 0.0;       // current activation threshold, A
    double thr2 = 0.0;       // modulation activation threshold
    double sharpness = 0.0;  // 0 selects the hard hinge; >0 selects softplus
};

struct AfState {
    double q_star = 0.0;
};

// max(0, value - threshold), or its softplus smoothing
// (1/beta) log(1 + exp(beta (value - threshold))) with beta = sharpness/threshold.
double hinge(double value, double threshold, double sharpness);

// Current-magnitude activation, evaluated on the reference magnitude before
// circular saturation.
double gamma1(double i_star_norm, double thr1, double sharpness);

// Modulation-magnitude activation, evaluated on the raw modulation command.
double gamma2(double m_raw_norm, double thr2, double sharpness);

// Minimizer of the steady-state modulation norm over Q:
// Q_mm = omega0 L_g ||v_g||^2 / ||Z_g||^2.
double q_min_modulation(DqVector v_g, const PlantParams& p);

// Forward-Euler step of
//   dQ*/dt = -omega_q (Q* - Q_ref) - kappa1 G1 Q* - kappa2 G2 (Q* - Q_mm).
AfState af_step(AfState st, double q_ref, double i_star_norm, double m_raw_norm,
                double q_mm, double dt, const AfConfig& cfg);

} // namespace qadapt
