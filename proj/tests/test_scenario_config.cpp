#include "qadapt/config.hpp"

#include "qadapt/errors.hpp"
#include "qadapt/scenario.hpp"

#include <doctest.h>

#include <cmath>
#include <string>

using namespace qadapt;

TEST_CASE("profile interpolation and step semantics") {
    Profile p;
    p.points = {{0.0, 1.0}, {1.0, 2.0}, {1.0, 5.0}, {2.0, 5.0}};
    CHECK(p.at(-1.0) == doctest::Approx(1.0));
    CHECK(p.at(0.5) == doctest::Approx(1.5));
    CHECK(p.at(0.999999) == doctest::Approx(2.0).epsilon(1e-5));
    // duplicated stamp: the later point wins from that instant on
    CHECK(p.at(1.0) == doctest::Approx(5.0));
    CHECK(p.at(1.5) == doctest::Approx(5.0));
    CHECK(p.at(3.0) == doctest::Approx(5.0));
    Profile empty;
    CHECK_THROWS_AS(empty.at(0.0), ValidationError);
}

TEST_CASE("stock scenarios produce the advertised signal shapes") {
    const SimConfig cfg = default_config();
    const Limits& lim = cfg.limits;
    SUBCASE("voltage dip") {
        ScenarioSpec spec;
        spec.kind = ScenarioKind::voltage_dip;
        const ScenarioSignals sig = build_scenario(spec, lim);
        CHECK(sig.v_amp(0.0) == doctest::Approx(lim.v_g_nom));
        CHECK(sig.v_amp(spec.dip_start + spec.dip_ramp) ==
              doctest::Approx((1.0 - spec.dip_depth) * lim.v_g_nom));
        CHECK(sig.v_amp(spec.dip_start + spec.dip_ramp + spec.dip_hold) ==
              doctest::Approx((1.0 - spec.dip_depth) * lim.v_g_nom));
        CHECK(sig.v_amp(9.9) == doctest::Approx(lim.v_g_nom));
        CHECK(sig.q_ref(0.0) == doctest::Approx(spec.q_ref));
        CHECK(sig.w_ref(5.0) == doctest::Approx(lim.w_max));
        CHECK(sig.tau_l(5.0) == doctest::Approx(0.9 * lim.tau_max));
    }
    SUBCASE("reference step") {
        ScenarioSpec spec;
        spec.kind = ScenarioKind::reference_step;
        const ScenarioSignals sig = build_scenario(spec, lim);
        CHECK(sig.q_ref(spec.step_start - 0.01) == doctest::Approx(spec.step_q_high));
        CHECK(sig.q_ref(spec.step_start + 0.01) == doctest::Approx(spec.step_q_low));
        CHECK(sig.q_ref(spec.step_start + spec.step_dwell + 0.01) ==
              doctest::Approx(spec.step_q_high));
        CHECK(sig.v_amp(4.0) == doctest::Approx(lim.v_g_nom));
    }
    SUBCASE("over voltage") {
        ScenarioSpec spec;
        spec.kind = ScenarioKind::over_voltage;
        const ScenarioSignals sig = build_scenario(spec, lim);
        CHECK(sig.v_amp(spec.ov_start - 0.01) == doctest::Approx(lim.v_g_nom));
        CHECK(sig.v_amp(spec.ov_start + 0.01) ==
              doctest::Approx(spec.ov_factor * lim.v_g_nom));
        CHECK(sig.v_amp(spec.ov_start + spec.ov_duration + 0.01) ==
              doctest::Approx(lim.v_g_nom));
    }
    SUBCASE("custom with partial profiles falls back to baselines") {
        ScenarioSpec spec;
        spec.kind = ScenarioKind::custom;
        spec.q_ref_profile.points = {{0.0, 1e6}, {1.0, 2e6}};
        const ScenarioSignals sig = build_scenario(spec, lim);
        CHECK(sig.q_ref(0.5) == doctest::Approx(1.5e6));
        CHECK(sig.v_amp(0.5) == doctest::Approx(lim.v_g_nom));
        CHECK(sig.tau_l(0.5) == doctest::Approx(spec.tau_l_fraction * lim.tau_max));
    }
    SUBCASE("invalid dip depth rejected") {
        ScenarioSpec spec;
        spec.kind = ScenarioKind::voltage_dip;
        spec.dip_depth = 1.5;
        CHECK_THROWS_AS(build_scenario(spec, lim), ValidationError);
    }
}

TEST_CASE("default configuration is self-consistent") {
    SimConfig cfg = default_config();
    CHECK(cfg.limits.p_g_max == doctest::Approx(cfg.limits.tau_max * cfg.limits.w_max));
    CHECK(cfg.limits.i_g_max ==
          doctest::Approx(cfg.limits.alpha_q * cfg.limits.p_g_max / cfg.limits.v_g_nom));
    CHECK(cfg.timing.plant_steps_per_tick() == 10);
    CHECK(cfg.ofo.trigger_divisor() == 4);
    CHECK(cfg.af.thr1 == doctest::Approx(cfg.limits.i_g_max));
    CHECK(cfg.af.thr2 == doctest::Approx(0.97 / std::sqrt(2.0)));
    CHECK(cfg.limits.m_lim == doctest::Approx(0.93 / std::sqrt(2.0)));
    const auto warnings = validate_config(cfg);
    CHECK(warnings.empty());
}

TEST_CASE("validation catches broken configurations") {
    SUBCASE("negative inertia") {
        SimConfig cfg = default_config();
        cfg.plant.inertia = -1.0;
        CHECK_THROWS_AS(validate_config(cfg), ValidationError);
    }
    SUBCASE("plant step not dividing the control tick") {
        SimConfig cfg = default_config();
        cfg.timing.dt_plant = 26e-6;
        CHECK_THROWS_AS(validate_config(cfg), ValidationError);
    }
    SUBCASE("grid branch unstable under forward Euler") {
        SimConfig cfg = default_config();
        cfg.timing.dt_plant = cfg.timing.t_control;  // still divides, far too big
        cfg.plant.omega0 = 2.0 * 3.14159265358979 * 5000.0;
        CHECK_THROWS_AS(validate_config(cfg), ValidationError);
    }
    SUBCASE("ofo descent condition") {
        SimConfig cfg = default_config();
        cfg.ofo.k_mu = 2500.0;
        CHECK_THROWS_AS(validate_config(cfg), ValidationError);
    }
    SUBCASE("duration not on the control grid") {
        SimConfig cfg = default_config();
        cfg.scenario.duration = 1.0001234;
        CHECK_THROWS_AS(validate_config(cfg), ValidationError);
    }
    SUBCASE("warning for an aggressive current loop") {
        SimConfig cfg = default_config();
        cfg.tuning.omega_current = 2.0 * 3.14159265358979 * 800.0;
        const auto warnings = validate_config(cfg);
        CHECK(!warnings.empty());
    }
}

TEST_CASE("json round trip") {
    const std::string text = R"({
        "outer_mode": "ofo",
        "v_dc_ref": 5200.0,
        "scenario": {"kind": "reference_step", "duration": 4.0, "step_q_low": -2.5e6},
        "output": {"dir": "elsewhere", "trace_stride": 4},
        "seed": 99
    })";
    const SimConfig cfg = parse_config(text);
    CHECK(cfg.outer_mode == OuterMode::ofo);
    CHECK(cfg.v_dc_ref == doctest::Approx(5200.0));
    CHECK(cfg.scenario.kind == ScenarioKind::reference_step);
    CHECK(cfg.scenario.duration == doctest::Approx(4.0));
    CHECK(cfg.scenario.step_q_low == doctest::Approx(-2.5e6));
    CHECK(cfg.output.dir == "elsewhere");
    CHECK(cfg.output.trace_stride == 4);
    CHECK(cfg.seed == 99);
    // untouched keys keep their defaults
    CHECK(cfg.limits.tau_max == doctest::Approx(default_config().limits.tau_max));
}

TEST_CASE("json rejects unknown keys and bad values") {
    CHECK_THROWS_WITH_AS(parse_config(R"({"outre_mode": "ofo"})"),
                         doctest::Contains("unknown config key"), ValidationError);
    CHECK_THROWS_WITH_AS(parse_config(R"({"scenario": {"knid": "custom"}})"),
                         doctest::Contains("unknown config key"), ValidationError);
    CHECK_THROWS_AS(parse_config(R"({"outer_mode": "both"})"), ValidationError);
    CHECK_THROWS_AS(parse_config("{nonsense"), ValidationError);
    CHECK_THROWS_AS(parse_config(R"({"v_dc_ref": "high"})"), ValidationError);
    // profile stamps must be non-decreasing
    CHECK_THROWS_AS(
        parse_config(
            R"({"scenario": {"kind": "custom", "q_ref_profile": [[1.0, 5.0], [0.5, 6.0]]}})"),
        ValidationError);
}

TEST_CASE("custom profile parsing") {
    const std::string text = R"({
        "scenario": {
            "kind": "custom",
            "duration": 1.0,
            "q_ref_profile": [[0.0, 1e6], [0.5, 1e6], [0.5, -2e6]]
        }
    })";
    const SimConfig cfg = parse_config(text);
    const ScenarioSignals sig = build_scenario(cfg.scenario, cfg.limits);
    CHECK(sig.q_ref(0.25) == doctest::Approx(1e6));
    CHECK(sig.q_ref(0.75) == doctest::Approx(-2e6));
}

TEST_CASE("schema reference mentions every top-level key") {
    const std::string s = schema_reference();
    for (const char* key : {"plant", "limits", "tuning", "outer_mode", "af", "ofo",
                            "timing", "scenario", "output", "seed", "v_dc_ref"}) {
        CHECK(s.find(key) != std::string::npos);
    }
}
