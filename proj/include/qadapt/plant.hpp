#pragma once

#include "qadapt/dq.hpp"

namespace qadapt {

// Lumped back-to-back converter drive: shaft inertia, DC link, grid-side RL
// branch. The motor-side converter is abstracted as an ideal torque source
// drawing w*tau_m from the DC link.
struct PlantParams {
    double inertia = 0.0;          // M, kg m^2
    double damping = 0.0;          // D, N m s/rad
    double dc_capacitance = 0.0;   // C_dc, F
    double dc_conductance = 0.0;   // G_dc, S
    double grid_inductance = 0.0;  // L_g, H
    double grid_resistance = 0.0;  // R_g, ohm
    double omega0 = 0.0;           // grid frequency, rad/s

    double grid_reactance() const { return omega0 * grid_inductance; }
    // Both singular values of Z_g = R_g I + omega0 L_g J coincide.
    double impedance_norm_squared() const {
        const double x = grid_reactance();
        return grid_resistance * grid_resistance + x * x;
    }
};

// Z_g i = R_g i + omega0 L_g J i.
inline DqVector apply_grid_impedance(DqVector i, const PlantParams& p) {
    return p.grid_resistance * i + p.grid_reactance() * rotate90(i);
}

struct PlantState {
    double w = 0.0;      // shaft speed, rad/s
    double v_dc = 0.0;   // DC-link voltage, V
    DqVector i_g;        // grid current towards the converter, A
};

struct PlantInputs {
    double tau_m = 0.0;  // electromagnetic torque, N m
    double tau_l = 0.0;  // load torque, N m
    DqVector m_g;        // grid-side modulation vector
    DqVector v_g;        // grid voltage, V
};

struct PlantDerivatives {
    double dw = 0.0;
    double dv_dc = 0.0;
    DqVector di_g;
};

PlantDerivatives plant_derivatives(const PlantState& s, const PlantInputs& u,
                                   const PlantParams& p);

// One forward-Euler step. Throws SimulationDivergedError if the DC link
// collapses to a non-positive voltage.
PlantState plant_step(const PlantState& s, const PlantInputs& u,
                      const PlantParams& p, double dt);

// Grid power at equilibrium implied by the power balance (losses on the
// grid branch are excluded; they are second-order at rated impedances).
double steady_state_active_power(double w_ref, double v_dc_ref, double tau_l,
                                 const PlantParams& p);

} // namespace qadapt
