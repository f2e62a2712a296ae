#pragma once

#include "qadapt/inner_control.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace qadapt {

// Piecewise-linear signal profile. Duplicate time stamps produce steps (the
// later point wins from that instant on); the ends extend as constants.
struct Profile {
    std::vector<std::pair<double, double>> points;

    bool empty() const { return points.empty(); }
    double at(double t) const;
};

enum class ScenarioKind { voltage_dip, reference_step, over_voltage, custom };

std::string to_string(ScenarioKind k);
ScenarioKind scenario_kind_from_string(const std::string& name);

struct ScenarioSpec {
    ScenarioKind kind = ScenarioKind::voltage_dip;
    double duration = 10.0;
    bool hold_exogenous = false;  // hold exogenous signals between optimizer triggers

    // Baselines in fractions of the corresponding limit.
    double w_ref_fraction = 1.0;
    double tau_l_fraction = 0.9;
    double q_ref = 3e6;

    // voltage_dip
    double dip_depth = 0.4;
    double dip_start = 3.0;
    double dip_ramp = 0.1;
    double dip_hold = 1.0;

    // reference_step
    double step_q_high = 3e6;
    double step_q_low = -3e6;
    double step_start = 2.5;
    double step_dwell = 5.0;

    // over_voltage
    double ov_factor = 1.12;
    double ov_start = 2.5;
    double ov_duration = 5.0;

    // custom profiles; where empty, the baseline constants apply
    Profile v_amp_profile;   // grid voltage magnitude, V
    Profile tau_l_profile;   // load torque, N m
    Profile q_ref_profile;   // reactive set-point, var
    Profile w_ref_profile;   // speed set-point, rad/s
};

// Time functions driving one run.
struct ScenarioSignals {
    std::function<double(double)> v_amp;
    std::function<double(double)> tau_l;
    std::function<double(double)> q_ref;
    std::function<double(double)> w_ref;
};

ScenarioSignals build_scenario(const ScenarioSpec& spec, const Limits& lim);

} // namespace qadapt
