#pragma once

#include "qadapt/inner_control.hpp"
#include "qadapt/outer_ofo.hpp"
#include "qadapt/plant.hpp"

#include <string>
#include <vector>

namespace qadapt {

// One active-power slice of the admissible (P, Q) region.
struct PqMapRow {
    double p = 0.0;
    double q_lo = 0.0;       // meaningful when feasible
    double q_hi = 0.0;
    bool feasible = false;   // both constraints admit a common Q
    bool current_feasible = false;
    bool modulation_feasible = false;
    bool disjoint = false;
};

// Sweeps P over [-p_g_max, p_g_max] at fixed grid voltage and intersects the
// current-circle and modulation constraints at every slice.
std::vector<PqMapRow> pq_feasible_map(const Limits& lim, const PlantParams& p,
                                      double v_dc_ref, DqVector v_g, int n_points);

std::string render_pq_map_csv(const std::vector<PqMapRow>& rows);

} // namespace qadapt
