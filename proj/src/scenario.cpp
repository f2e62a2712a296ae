#include "qadapt/scenario.hpp"

#include "qadapt/errors.hpp"

#include <algorithm>
#include <cmath>

namespace qadapt {

double Profile::at(double t) const {
    if (points.empty()) throw ValidationError("profile: empty profile evaluated");
    if (t <= points.front().first) return points.front().second;
    if (t >= points.back().first) return points.back().second;
    // First point with time > t; its predecessor starts the active segment.
    auto it = std::upper_bound(points.begin(), points.end(), t,
                               [](double v, const auto& pt) { return v < pt.first; });
    const auto& [t1, y1] = *it;
    const auto& [t0, y0] = *(it - 1);
    if (t1 == t0) return y1;
    return y0 + (y1 - y0) * (t - t0) / (t1 - t0);
}

std::string to_string(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::voltage_dip: return "voltage_dip";
        case ScenarioKind::reference_step: return "reference_step";
        case ScenarioKind::over_voltage: return "over_voltage";
        case ScenarioKind::custom: return "custom";
    }
    return "unknown";
}

ScenarioKind scenario_kind_from_string(const std::string& name) {
    if (name == "voltage_dip") return ScenarioKind::voltage_dip;
    if (name == "reference_step") return ScenarioKind::reference_step;
    if (name == "over_voltage") return ScenarioKind::over_voltage;
    if (name == "custom") return ScenarioKind::custom;
    throw ValidationError("scenario.kind: unknown scenario '" + name + "'");
}

ScenarioSignals build_scenario(const ScenarioSpec& spec, const Limits& lim) {
    if (!(spec.duration > 0.0)) {
        throw ValidationError("scenario.duration must be positive");
    }
    ScenarioSignals sig;

    const double v_nom = lim.v_g_nom;
    const double w_base = spec.w_ref_fraction * lim.w_max;
    const double tau_base = spec.tau_l_fraction * lim.tau_max;

    auto from_profile = [](const Profile& p) {
        return [p](double t) { return p.at(t); };
    };

    switch (spec.kind) {
        case ScenarioKind::voltage_dip: {
            if (!(spec.dip_depth > 0.0 && spec.dip_depth < 1.0)) {
                throw ValidationError("scenario.dip_depth must lie in (0, 1)");
            }
            if (!(spec.dip_ramp > 0.0)) {
                throw ValidationError("scenario.dip_ramp must be positive");
            }
            Profile v;
            const double t0 = spec.dip_start;
            const double t1 = t0 + spec.dip_ramp;
            const double t2 = t1 + spec.dip_hold;
            const double t3 = t2 + spec.dip_ramp;
            const double sag = (1.0 - spec.dip_depth) * v_nom;
            v.points = {{0.0, v_nom}, {t0, v_nom}, {t1, sag},
                        {t2, sag},    {t3, v_nom}, {spec.duration, v_nom}};
            sig.v_amp = from_profile(v);
            sig.tau_l = [tau_base](double) { return tau_base; };
            sig.q_ref = [q = spec.q_ref](double) { return q; };
            sig.w_ref = [w_base](double) { return w_base; };
            break;
        }
        case ScenarioKind::reference_step: {
            Profile q;
            const double t0 = spec.step_start;
            const double t1 = t0 + spec.step_dwell;
            q.points = {{0.0, spec.step_q_high}, {t0, spec.step_q_high},
                        {t0, spec.step_q_low},   {t1, spec.step_q_low},
                        {t1, spec.step_q_high},  {spec.duration, spec.step_q_high}};
            sig.v_amp = [v_nom](double) { return v_nom; };
            sig.tau_l = [tau_base](double) { return tau_base; };
            sig.q_ref = from_profile(q);
            sig.w_ref = [w_base](double) { return w_base; };
            break;
        }
        case ScenarioKind::over_voltage: {
            // Regenerative braking corner: the drive exports 0.8 tau_max of
            // shaft power while the grid amplitude rises, so the converter
            // needs every volt of modulation headroom exactly when it has the
            // least. Zero reactive reference leaves no built-in relief.
            Profile v;
            const double t0 = spec.ov_start;
            const double t1 = t0 + spec.ov_duration;
            const double hi = spec.ov_factor * v_nom;
            v.points = {{0.0, v_nom}, {t0, v_nom}, {t0, hi},
                        {t1, hi},     {t1, v_nom}, {spec.duration, v_nom}};
            sig.v_amp = from_profile(v);
            sig.tau_l = [tau_regen = -0.8 * lim.tau_max](double) { return tau_regen; };
            sig.q_ref = [](double) { return 0.0; };
            sig.w_ref = [w_base](double) { return w_base; };
            break;
        }
        case ScenarioKind::custom: {
            sig.v_amp = spec.v_amp_profile.empty()
                            ? std::function<double(double)>([v_nom](double) { return v_nom; })
                            : from_profile(spec.v_amp_profile);
            sig.tau_l = spec.tau_l_profile.empty()
                            ? std::function<double(double)>([tau_base](double) { return tau_base; })
                            : from_profile(spec.tau_l_profile);
            sig.q_ref = spec.q_ref_profile.empty()
                            ? std::function<double(double)>([q = spec.q_ref](double) { return q; })
                            : from_profile(spec.q_ref_profile);
            sig.w_ref = spec.w_ref_profile.empty()
                            ? std::function<double(double)>([w_base](double) { return w_base; })
                            : from_profile(spec.w_ref_profile);
            break;
        }
    }
    return sig;
}

} // namespace qadapt
