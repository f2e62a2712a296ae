#pragma once

#include "qadapt/inner_control.hpp"
#include "qadapt/outer_af.hpp"
#include "qadapt/outer_ofo.hpp"
#include "qadapt/plant.hpp"
#include "qadapt/scenario.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qadapt {

enum class OuterMode { none, af, ofo };

std::string to_string(OuterMode m);
OuterMode outer_mode_from_string(const std::string& name);

struct Tuning {
    double zeta_speed = 1.0;
    double omega_speed = 0.0;
    double zeta_dc = 1.0;
    double omega_dc = 0.0;
    double zeta_current = 1.0;
    double omega_current = 0.0;
};

struct Timing {
    double dt_plant = 25e-6;
    double t_control = 250e-6;

    int plant_steps_per_tick() const;
};

struct OutputConfig {
    std::string dir = "out";
    bool plot = false;
    int trace_stride = 1;
    bool hard_stop_on_trip = false;
};

struct SimConfig {
    PlantParams plant;
    Limits limits;
    double v_g_floor_fraction = 0.01;
    double v_dc_ref = 0.0;
    Tuning tuning;
    OuterMode outer_mode = OuterMode::none;
    AfConfig af;
    std::optional<double> af_gamma1_threshold;  // defaults to i_g_max
    OfoConfig ofo;
    Timing timing;
    ScenarioSpec scenario;
    OutputConfig output;
    std::uint64_t seed = 0;
};

// Rated 7 MVA / 3150 V grid connection feeding a 6 MW drive; see the schema
// reference for the derivations.
SimConfig default_config();

// Checks every invariant, fills derived fields (limits, hinge thresholds),
// and returns non-fatal warnings. Throws ValidationError naming the key.
std::vector<std::string> validate_config(SimConfig& cfg);

// Parses a JSON config file; unknown keys are rejected. The result has been
// validated.
SimConfig load_config(const std::string& path, std::vector<std::string>* warnings = nullptr);
SimConfig parse_config(const std::string& json_text, std::vector<std::string>* warnings = nullptr);

// Human-readable schema reference with defaults and units.
std::string schema_reference();

} // namespace qadapt
