#include "qadapt/pq_map.hpp"

#include "qadapt/errors.hpp"
#include "qadapt/trace_io.hpp"

namespace qadapt {

std::vector<PqMapRow> pq_feasible_map(const Limits& lim, const PlantParams& p,
                                      double v_dc_ref, DqVector v_g, int n_points) {
    if (n_points < 2) throw ValidationError("pq map needs at least 2 points");
    std::vector<PqMapRow> rows;
    rows.reserve(static_cast<std::size_t>(n_points));
    for (int k = 0; k < n_points; ++k) {
        const double frac = static_cast<double>(k) / static_cast<double>(n_points - 1);
        PqMapRow row;
        row.p = -lim.p_g_max + 2.0 * lim.p_g_max * frac;
        const FeasibleInterval iv =
            constraint_interval({row.p, v_g}, lim, p, v_dc_ref);
        row.current_feasible = iv.current_feasible;
        row.modulation_feasible = iv.modulation_feasible;
        row.disjoint = iv.disjoint;
        row.feasible = iv.current_feasible && iv.usable();
        if (row.feasible) {
            row.q_lo = iv.lo;
            row.q_hi = iv.hi;
        }
        rows.push_back(row);
    }
    return rows;
}

std::string render_pq_map_csv(const std::vector<PqMapRow>& rows) {
    std::string out = "p,q_lo,q_hi,feasible,current_feasible,modulation_feasible,disjoint\n";
    out.reserve(out.size() + rows.size() * 80);
    for (const auto& r : rows) {
        out += format_double(r.p);
        out += ',';
        out += format_double(r.q_lo);
        out += ',';
        out += format_double(r.q_hi);
        out += ',';
        out += r.feasible ? '1' : '0';
        out += ',';
        out += r.current_feasible ? '1' : '0';
        out += ',';
        out += r.modulation_feasible ? '1' : '0';
        out += ',';
        out += r.disjoint ? '1' : '0';
        out += '\n';
    }
    return out;
}

} // namespace qadapt
