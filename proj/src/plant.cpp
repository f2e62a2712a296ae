#include "qadapt/plant.hpp"

#include "qadapt/errors.hpp"

#include <cmath>

namespace qadapt {

PlantDerivatives plant_derivatives(const PlantState& s, const PlantInputs& u,
                                   const PlantParams& p) {
    if (!(s.v_dc > 0.0)) {
        throw SimulationDivergedError("plant_derivatives: v_dc must stay positive", 0.0);
    }
    PlantDerivatives d;
    d.dw = (-p.damping * s.w + u.tau_m - u.tau_l) / p.inertia;
    d.dv_dc = (-p.dc_conductance * s.v_dc - (s.w / s.v_dc) * u.tau_m +
               dot(u.m_g, s.i_g)) /
              p.dc_capacitance;
    d.di_g = (u.v_g - apply_grid_impedance(s.i_g, p) - s.v_dc * u.m_g) /
             p.grid_inductance;
    return d;
}

PlantState plant_step(const PlantState& s, const PlantInputs& u,
                      const PlantParams& p, double dt) {
    const PlantDerivatives d = plant_derivatives(s, u, p);
    PlantState n;
    n.w = s.w + dt * d.dw;
    n.v_dc = s.v_dc + dt * d.dv_dc;
    n.i_g = s.i_g + dt * d.di_g;
    if (!(n.v_dc > 0.0)) {
        throw SimulationDivergedError("plant_step: DC link collapsed within one step", 0.0);
    }
    return n;
}

double steady_state_active_power(double w_ref, double v_dc_ref, double tau_l,
                                 const PlantParams& p) {
    return p.damping * w_ref * w_ref + p.dc_conductance * v_dc_ref * v_dc_ref +
           w_ref * tau_l;
}

} // namespace qadapt
