#include "qadapt/config.hpp"

#include "qadapt/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <tuple>

namespace qadapt {

namespace {

constexpr double k_pi = std::numbers::pi;

using nlohmann::json;

void expect_object(const json& j, const std::string& path) {
    if (!j.is_object())
        throw ValidationError(path + " must be a JSON object");
}

void expect_keys(const json& j, const std::string& path,
                 std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) { known = true; break; }
        if (!known)
            throw ValidationError("unknown config key: " + path + "." + it.key());
    }
}

double get_num(const json& j, const std::string& path, const char* key, double fallback) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_number())
        throw ValidationError(path + "." + key + " must be a number");
    return it->get<double>();
}

bool get_bool(const json& j, const std::string& path, const char* key, bool fallback) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_boolean())
        throw ValidationError(path + "." + key + " must be a boolean");
    return it->get<bool>();
}

int get_int(const json& j, const std::string& path, const char* key, int fallback) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_number_integer())
        throw ValidationError(path + "." + key + " must be an integer");
    return it->get<int>();
}

std::string get_str(const json& j, const std::string& path, const char* key,
                    const std::string& fallback) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_string())
        throw ValidationError(path + "." + key + " must be a string");
    return it->get<std::string>();
}

Profile get_profile(const json& j, const std::string& path, const char* key) {
    Profile out;
    auto it = j.find(key);
    if (it == j.end()) return out;
    if (!it->is_array())
        throw ValidationError(path + "." + key + " must be an array of [t, value] pairs");
    double prev_t = -std::numeric_limits<double>::infinity();
    for (const auto& pt : *it) {
        if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number())
            throw ValidationError(path + "." + key + " entries must be [t, value] number pairs");
        double t = pt[0].get<double>();
        if (t < prev_t)
            throw ValidationError(path + "." + key + " time stamps must be non-decreasing");
        prev_t = t;
        out.points.emplace_back(t, pt[1].get<double>());
    }
    return out;
}

} // namespace

std::string to_string(OuterMode m) {
    switch (m) {
        case OuterMode::none: return "none";
        case OuterMode::af: return "af";
        case OuterMode::ofo: return "ofo";
    }
    return "none";
}

OuterMode outer_mode_from_string(const std::string& name) {
    if (name == "none") return OuterMode::none;
    if (name == "af") return OuterMode::af;
    if (name == "ofo") return OuterMode::ofo;
    throw ValidationError("outer_mode: unknown mode '" + name + "' (none|af|ofo)");
}

int Timing::plant_steps_per_tick() const {
    if (!(dt_plant > 0.0) || !(t_control > 0.0))
        throw ValidationError("timing.dt_plant and timing.t_control must be positive");
    double ratio = t_control / dt_plant;
    int n = static_cast<int>(std::llround(ratio));
    if (n < 1 || std::abs(ratio - n) > 1e-9 * ratio)
        throw ValidationError("timing.t_control must be an integer multiple of timing.dt_plant");
    return n;
}

SimConfig default_config() {
    SimConfig cfg;

    // 7 MVA, 3150 V (dq magnitude, power-invariant frame) grid connection.
    const double s_base = 7e6;
    const double v_g_nom = 3150.0;
    const double omega0 = 2.0 * k_pi * 50.0;
    const double z_base = v_g_nom * v_g_nom / s_base;

    cfg.plant.omega0 = omega0;
    cfg.plant.grid_resistance = 0.005 * z_base;
    cfg.plant.grid_inductance = 0.20 * z_base / omega0;
    // 30 ms of rated energy on the DC link, 0.1% shunt loss.
    cfg.v_dc_ref = 5000.0;
    cfg.plant.dc_capacitance = 2.0 * 0.030 * s_base / (cfg.v_dc_ref * cfg.v_dc_ref);
    cfg.plant.dc_conductance = 0.001 * s_base / (cfg.v_dc_ref * cfg.v_dc_ref);

    // 6 MW drive, 1200 rpm ceiling, 1 s mechanical time constant, 0.5% friction.
    const double w_max = 125.66;
    const double rated_mech_power = 6e6;
    cfg.plant.inertia = rated_mech_power * 1.0 / (w_max * w_max);
    cfg.plant.damping = 0.005 * rated_mech_power / (w_max * w_max);

    cfg.limits.tau_max = 46691.0;  // continuous converter-side torque rating
    cfg.limits.w_max = w_max;
    cfg.limits.alpha_q = 1.2;
    cfg.limits.alpha_v = 1.1;
    cfg.limits.v_g_nom = v_g_nom;
    cfg.limits.m_lim = 0.93 / std::numbers::sqrt2;
    cfg.v_g_floor_fraction = 0.01;

    cfg.tuning.omega_speed = 2.0 * k_pi * 2.0;
    cfg.tuning.omega_dc = 2.0 * k_pi * 20.0;
    cfg.tuning.omega_current = 2.0 * k_pi * 200.0;

    cfg.af.omega_q = 2.0 * k_pi * 5.0;
    cfg.af.kappa1 = 0.1;
    cfg.af.kappa2 = 250.0;
    cfg.af.thr2 = 0.97 / std::numbers::sqrt2;
    cfg.af.sharpness = 0.0;

    cfg.ofo.k_mu = 80.0;
    cfg.ofo.k_gamma = 4.0;
    cfg.ofo.t_ofo = 1e-3;
    cfg.ofo.t_control = cfg.timing.t_control;

    validate_config(cfg);  // fills the derived limit members
    return cfg;
}

std::vector<std::string> validate_config(SimConfig& cfg) {
    std::vector<std::string> warnings;

    if (!(cfg.plant.inertia > 0.0)) throw ValidationError("plant.inertia must be positive");
    if (!(cfg.plant.dc_capacitance > 0.0))
        throw ValidationError("plant.dc_capacitance must be positive");
    if (!(cfg.plant.grid_inductance > 0.0))
        throw ValidationError("plant.grid_inductance must be positive");
    if (!(cfg.plant.omega0 > 0.0)) throw ValidationError("plant.omega0 must be positive");
    if (cfg.plant.damping < 0.0) throw ValidationError("plant.damping must be non-negative");
    if (cfg.plant.dc_conductance < 0.0)
        throw ValidationError("plant.dc_conductance must be non-negative");
    if (cfg.plant.grid_resistance < 0.0)
        throw ValidationError("plant.grid_resistance must be non-negative");
    if (!(cfg.v_dc_ref > 0.0)) throw ValidationError("v_dc_ref must be positive");

    cfg.limits = make_limits(cfg.limits.tau_max, cfg.limits.w_max, cfg.limits.alpha_q,
                             cfg.limits.alpha_v, cfg.limits.v_g_nom, cfg.limits.m_lim,
                             cfg.v_g_floor_fraction);

    const int substeps = cfg.timing.plant_steps_per_tick();
    (void)substeps;

    // Forward-Euler stability of the grid branch: eigenvalues -R/L +- j omega0.
    {
        const double a = cfg.plant.grid_resistance / cfg.plant.grid_inductance;
        const double b = cfg.plant.omega0;
        if (!(cfg.timing.dt_plant * (a * a + b * b) < 2.0 * a))
            throw ValidationError(
                "timing.dt_plant too large for the grid branch (forward-Euler unstable)");
    }

    for (const auto& [name, omega, zeta] :
         {std::tuple<const char*, double, double>{"tuning.omega_speed", cfg.tuning.omega_speed,
                                                  cfg.tuning.zeta_speed},
          {"tuning.omega_dc", cfg.tuning.omega_dc, cfg.tuning.zeta_dc},
          {"tuning.omega_current", cfg.tuning.omega_current, cfg.tuning.zeta_current}}) {
        if (!(omega > 0.0)) throw ValidationError(std::string(name) + " must be positive");
        if (!(zeta > 0.0))
            throw ValidationError(std::string(name) + ": damping ratio must be positive");
        if (omega * cfg.timing.t_control > 1.0)
            warnings.push_back(std::string(name) +
                               ": bandwidth marginal for the control tick (omega*Tc > 1)");
    }

    if (!(cfg.af.omega_q > 0.0)) throw ValidationError("af.omega_q must be positive");
    if (cfg.af.kappa1 < 0.0) throw ValidationError("af.kappa1 must be non-negative");
    if (cfg.af.kappa2 < 0.0) throw ValidationError("af.kappa2 must be non-negative");
    if (cfg.af.sharpness < 0.0) throw ValidationError("af.sharpness must be non-negative");
    cfg.af.thr1 = cfg.af_gamma1_threshold.value_or(cfg.limits.i_g_max);
    if (!(cfg.af.thr1 > 0.0)) throw ValidationError("af.gamma1_threshold must be positive");
    if (!(cfg.af.thr2 > 0.0)) throw ValidationError("af.gamma2_threshold must be positive");
    {
        // Euler contraction budget for the set-point law at a representative
        // worst case (one i_g_max of current excess, full modulation hinge).
        double budget = cfg.timing.t_control *
                        (cfg.af.omega_q + cfg.af.kappa1 * cfg.limits.i_g_max +
                         cfg.af.kappa2 * std::max(0.0, 1.0 - cfg.af.thr2));
        if (!(budget < 2.0))
            throw ValidationError("af gains too aggressive for the control tick");
        if (budget > 0.5)
            warnings.push_back("af gains leave little margin on the control tick");
    }

    if (!(cfg.ofo.k_mu > 0.0)) throw ValidationError("ofo.k_mu must be positive");
    if (cfg.ofo.k_gamma < 0.0) throw ValidationError("ofo.k_gamma must be non-negative");
    if (!(cfg.ofo.t_ofo > 0.0)) throw ValidationError("ofo.t_ofo must be positive");
    cfg.ofo.t_control = cfg.timing.t_control;
    (void)cfg.ofo.trigger_divisor();
    {
        double c = cfg.ofo.k_mu * cfg.ofo.t_ofo * (1.0 + cfg.ofo.k_gamma * cfg.ofo.t_ofo);
        if (!(c < 2.0))
            throw ValidationError("ofo step violates the descent bound k_mu*T*(1+k_gamma*T) < 2");
        if (c >= 1.0)
            warnings.push_back("ofo step is over-damped past deadbeat; set-point may ring");
    }

    if (!(cfg.scenario.duration > 0.0))
        throw ValidationError("scenario.duration must be positive");
    {
        double ratio = cfg.scenario.duration / cfg.timing.t_control;
        double n = std::llround(ratio);
        if (std::abs(ratio - n) > 1e-6)
            throw ValidationError(
                "scenario.duration must be an integer multiple of timing.t_control");
    }

    if (cfg.output.trace_stride < 1)
        throw ValidationError("output.trace_stride must be >= 1");

    return warnings;
}

SimConfig parse_config(const std::string& json_text, std::vector<std::string>* warnings) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    expect_object(j, "config");
    expect_keys(j, "config",
                {"plant", "limits", "v_dc_ref", "tuning", "outer_mode", "af", "ofo", "timing",
                 "scenario", "output", "seed"});

    SimConfig cfg = default_config();

    if (auto it = j.find("plant"); it != j.end()) {
        expect_object(*it, "plant");
        expect_keys(*it, "plant",
                    {"inertia", "damping", "dc_capacitance", "dc_conductance", "grid_inductance",
                     "grid_resistance", "omega0"});
        cfg.plant.inertia = get_num(*it, "plant", "inertia", cfg.plant.inertia);
        cfg.plant.damping = get_num(*it, "plant", "damping", cfg.plant.damping);
        cfg.plant.dc_capacitance =
            get_num(*it, "plant", "dc_capacitance", cfg.plant.dc_capacitance);
        cfg.plant.dc_conductance =
            get_num(*it, "plant", "dc_conductance", cfg.plant.dc_conductance);
        cfg.plant.grid_inductance =
            get_num(*it, "plant", "grid_inductance", cfg.plant.grid_inductance);
        cfg.plant.grid_resistance =
            get_num(*it, "plant", "grid_resistance", cfg.plant.grid_resistance);
        cfg.plant.omega0 = get_num(*it, "plant", "omega0", cfg.plant.omega0);
    }

    if (auto it = j.find("limits"); it != j.end()) {
        expect_object(*it, "limits");
        expect_keys(*it, "limits",
                    {"tau_max", "w_max", "alpha_q", "alpha_v", "v_g_nom", "modulation_limit",
                     "v_g_floor_fraction"});
        cfg.limits.tau_max = get_num(*it, "limits", "tau_max", cfg.limits.tau_max);
        cfg.limits.w_max = get_num(*it, "limits", "w_max", cfg.limits.w_max);
        cfg.limits.alpha_q = get_num(*it, "limits", "alpha_q", cfg.limits.alpha_q);
        cfg.limits.alpha_v = get_num(*it, "limits", "alpha_v", cfg.limits.alpha_v);
        cfg.limits.v_g_nom = get_num(*it, "limits", "v_g_nom", cfg.limits.v_g_nom);
        cfg.limits.m_lim = get_num(*it, "limits", "modulation_limit", cfg.limits.m_lim);
        cfg.v_g_floor_fraction =
            get_num(*it, "limits", "v_g_floor_fraction", cfg.v_g_floor_fraction);
    }

    cfg.v_dc_ref = get_num(j, "config", "v_dc_ref", cfg.v_dc_ref);

    if (auto it = j.find("tuning"); it != j.end()) {
        expect_object(*it, "tuning");
        expect_keys(*it, "tuning",
                    {"zeta_speed", "omega_speed", "zeta_dc", "omega_dc", "zeta_current",
                     "omega_current"});
        cfg.tuning.zeta_speed = get_num(*it, "tuning", "zeta_speed", cfg.tuning.zeta_speed);
        cfg.tuning.omega_speed = get_num(*it, "tuning", "omega_speed", cfg.tuning.omega_speed);
        cfg.tuning.zeta_dc = get_num(*it, "tuning", "zeta_dc", cfg.tuning.zeta_dc);
        cfg.tuning.omega_dc = get_num(*it, "tuning", "omega_dc", cfg.tuning.omega_dc);
        cfg.tuning.zeta_current = get_num(*it, "tuning", "zeta_current", cfg.tuning.zeta_current);
        cfg.tuning.omega_current =
            get_num(*it, "tuning", "omega_current", cfg.tuning.omega_current);
    }

    cfg.outer_mode = outer_mode_from_string(get_str(j, "config", "outer_mode", "none"));

    if (auto it = j.find("af"); it != j.end()) {
        expect_object(*it, "af");
        expect_keys(*it, "af",
                    {"omega_q", "kappa1", "kappa2", "gamma1_threshold", "gamma2_threshold",
                     "sharpness"});
        cfg.af.omega_q = get_num(*it, "af", "omega_q", cfg.af.omega_q);
        cfg.af.kappa1 = get_num(*it, "af", "kappa1", cfg.af.kappa1);
        cfg.af.kappa2 = get_num(*it, "af", "kappa2", cfg.af.kappa2);
        if (it->contains("gamma1_threshold"))
            cfg.af_gamma1_threshold = get_num(*it, "af", "gamma1_threshold", 0.0);
        cfg.af.thr2 = get_num(*it, "af", "gamma2_threshold", cfg.af.thr2);
        cfg.af.sharpness = get_num(*it, "af", "sharpness", cfg.af.sharpness);
    }

    if (auto it = j.find("ofo"); it != j.end()) {
        expect_object(*it, "ofo");
        expect_keys(*it, "ofo", {"k_mu", "k_gamma", "t_ofo"});
        cfg.ofo.k_mu = get_num(*it, "ofo", "k_mu", cfg.ofo.k_mu);
        cfg.ofo.k_gamma = get_num(*it, "ofo", "k_gamma", cfg.ofo.k_gamma);
        cfg.ofo.t_ofo = get_num(*it, "ofo", "t_ofo", cfg.ofo.t_ofo);
    }

    if (auto it = j.find("timing"); it != j.end()) {
        expect_object(*it, "timing");
        expect_keys(*it, "timing", {"dt_plant", "t_control"});
        cfg.timing.dt_plant = get_num(*it, "timing", "dt_plant", cfg.timing.dt_plant);
        cfg.timing.t_control = get_num(*it, "timing", "t_control", cfg.timing.t_control);
    }

    if (auto it = j.find("scenario"); it != j.end()) {
        expect_object(*it, "scenario");
        expect_keys(*it, "scenario",
                    {"kind", "duration", "hold_exogenous", "w_ref_fraction", "tau_l_fraction",
                     "q_ref", "dip_depth", "dip_start", "dip_ramp", "dip_hold", "step_q_high",
                     "step_q_low", "step_start", "step_dwell", "ov_factor", "ov_start",
                     "ov_duration", "v_amp_profile", "tau_l_profile", "q_ref_profile",
                     "w_ref_profile"});
        ScenarioSpec& s = cfg.scenario;
        s.kind = scenario_kind_from_string(get_str(*it, "scenario", "kind", to_string(s.kind)));
        s.duration = get_num(*it, "scenario", "duration", s.duration);
        s.hold_exogenous = get_bool(*it, "scenario", "hold_exogenous", s.hold_exogenous);
        s.w_ref_fraction = get_num(*it, "scenario", "w_ref_fraction", s.w_ref_fraction);
        s.tau_l_fraction = get_num(*it, "scenario", "tau_l_fraction", s.tau_l_fraction);
        s.q_ref = get_num(*it, "scenario", "q_ref", s.q_ref);
        s.dip_depth = get_num(*it, "scenario", "dip_depth", s.dip_depth);
        s.dip_start = get_num(*it, "scenario", "dip_start", s.dip_start);
        s.dip_ramp = get_num(*it, "scenario", "dip_ramp", s.dip_ramp);
        s.dip_hold = get_num(*it, "scenario", "dip_hold", s.dip_hold);
        s.step_q_high = get_num(*it, "scenario", "step_q_high", s.step_q_high);
        s.step_q_low = get_num(*it, "scenario", "step_q_low", s.step_q_low);
        s.step_start = get_num(*it, "scenario", "step_start", s.step_start);
        s.step_dwell = get_num(*it, "scenario", "step_dwell", s.step_dwell);
        s.ov_factor = get_num(*it, "scenario", "ov_factor", s.ov_factor);
        s.ov_start = get_num(*it, "scenario", "ov_start", s.ov_start);
        s.ov_duration = get_num(*it, "scenario", "ov_duration", s.ov_duration);
        s.v_amp_profile = get_profile(*it, "scenario", "v_amp_profile");
        s.tau_l_profile = get_profile(*it, "scenario", "tau_l_profile");
        s.q_ref_profile = get_profile(*it, "scenario", "q_ref_profile");
        s.w_ref_profile = get_profile(*it, "scenario", "w_ref_profile");
    }

    if (auto it = j.find("output"); it != j.end()) {
        expect_object(*it, "output");
        expect_keys(*it, "output", {"dir", "plot", "trace_stride", "hard_stop_on_trip"});
        cfg.output.dir = get_str(*it, "output", "dir", cfg.output.dir);
        cfg.output.plot = get_bool(*it, "output", "plot", cfg.output.plot);
        cfg.output.trace_stride = get_int(*it, "output", "trace_stride", cfg.output.trace_stride);
        cfg.output.hard_stop_on_trip =
            get_bool(*it, "output", "hard_stop_on_trip", cfg.output.hard_stop_on_trip);
    }

    if (auto it = j.find("seed"); it != j.end()) {
        if (!it->is_number_unsigned())
            throw ValidationError("seed must be a non-negative integer");
        cfg.seed = it->get<std::uint64_t>();
    }

    auto w = validate_config(cfg);
    if (warnings) *warnings = std::move(w);
    return cfg;
}

SimConfig load_config(const std::string& path, std::vector<std::string>* warnings) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), warnings);
}

std::string schema_reference() {
    return R"(Configuration file reference (JSON). Every key is optional; defaults in
parentheses. Units are SI throughout; dq quantities use the power-invariant
transform, so ||v_g|| = sqrt(3) * phase RMS.

plant:
  inertia            (379.98)      rotor inertia, kg m^2
  damping            (1.8999)      viscous friction, N m s
  dc_capacitance     (0.0168)      DC-link capacitance, F
  dc_conductance     (2.8e-4)      DC-link shunt conductance, S
  grid_inductance    (9.0241e-4)   filter inductance, H (0.20 pu on 7 MVA / 3150 V)
  grid_resistance    (7.0875e-3)   filter resistance, ohm (0.005 pu)
  omega0             (314.159)     grid angular frequency, rad/s

limits:
  tau_max            (46691)       torque command limit, N m
  w_max              (125.66)      speed ceiling, rad/s
  alpha_q            (1.2)         apparent-power factor; q_g_max = p_g_max*sqrt(alpha_q^2-1),
                                   i_g_max = alpha_q*p_g_max/v_g_nom, p_g_max = tau_max*w_max
  alpha_v            (1.1)         DC-voltage utilization factor
  v_g_nom            (3150)        nominal grid voltage dq magnitude, V
  modulation_limit   (0.6576)      applied ||m_g|| ceiling, <= 1/sqrt(2) = 0.7071
  v_g_floor_fraction (0.01)        grid-lost threshold as a fraction of v_g_nom

v_dc_ref             (5000)        DC-link set-point, V

tuning: per-loop bandwidth omega_* (rad/s) and damping zeta_*
  speed (12.566, 1.0)   dc (125.66, 1.0)   current (1256.6, 1.0)

outer_mode           ("none")      none | af | ofo

af:                                set-point governor (mode "af")
  omega_q            (31.416)      tracking rate, 1/s
  kappa1             (0.1)         current-hinge gain
  kappa2             (250)         modulation-hinge gain
  gamma1_threshold   (i_g_max)     current activation threshold, A
  gamma2_threshold   (0.6859)      modulation activation threshold (0.97/sqrt(2))
  sharpness          (0)           0 = hard hinge; >0 = softplus knee width control

ofo:                               projected-gradient optimizer (mode "ofo")
  k_mu               (80)          step-size scale, 1/s
  k_gamma            (4)           tracking-weight scale, 1/s
  t_ofo              (1e-3)        optimizer period, s (integer multiple of t_control)

timing:
  dt_plant           (25e-6)       plant integration step, s
  t_control          (250e-6)      control tick, s (integer multiple of dt_plant)

scenario:
  kind               ("voltage_dip")  voltage_dip | reference_step | over_voltage | custom
  duration           (10)          run length, s (integer multiple of t_control)
  hold_exogenous        (false)       hold exogenous signals constant between optimizer triggers
  w_ref_fraction     (1.0)         speed reference as a fraction of w_max
  tau_l_fraction     (0.9)         load torque as a fraction of tau_max
  q_ref              (3e6)         reactive reference, var
  dip_depth (0.4) dip_start (3.0) dip_ramp (0.1) dip_hold (1.0)
  step_q_high (3e6) step_q_low (-3e6) step_start (2.5) step_dwell (5.0)
  ov_factor (1.12) ov_start (2.5) ov_duration (5.0)
  v_amp_profile / tau_l_profile / q_ref_profile / w_ref_profile
                     ([])          custom piecewise-linear [[t, value], ...];
                                   duplicated t makes a step; ends extend as constants

output:
  dir                ("out")       output directory
  plot               (false)       also write plot.svg
  trace_stride       (1)           record every Nth control tick
  hard_stop_on_trip  (false)       end the run at the first protection trip

seed                 (0)           reserved for randomized harnesses
)";
}

} // namespace qadapt
