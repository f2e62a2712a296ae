#include "qadapt/plant.hpp"

#include "qadapt/config.hpp"
#include "qadapt/errors.hpp"

#include <doctest.h>

#include <cmath>

using namespace qadapt;

namespace {

PlantParams default_plant() { return default_config().plant; }

// Classical RK4 over the same vector field, used as the integration oracle.
PlantState rk4_step(const PlantState& s, const PlantInputs& u, const PlantParams& p,
                    double dt) {
    auto add = [](const PlantState& a, const PlantDerivatives& d, double h) {
        PlantState r;
        r.w = a.w + h * d.dw;
        r.v_dc = a.v_dc + h * d.dv_dc;
        r.i_g = a.i_g + h * d.di_g;
        return r;
    };
    const PlantDerivatives k1 = plant_derivatives(s, u, p);
    const PlantDerivatives k2 = plant_derivatives(add(s, k1, 0.5 * dt), u, p);
    const PlantDerivatives k3 = plant_derivatives(add(s, k2, 0.5 * dt), u, p);
    const PlantDerivatives k4 = plant_derivatives(add(s, k3, dt), u, p);
    PlantState r;
    r.w = s.w + dt / 6.0 * (k1.dw + 2.0 * k2.dw + 2.0 * k3.dw + k4.dw);
    r.v_dc = s.v_dc + dt / 6.0 * (k1.dv_dc + 2.0 * k2.dv_dc + 2.0 * k3.dv_dc + k4.dv_dc);
    r.i_g = s.i_g + (dt / 6.0) * (k1.di_g + 2.0 * k2.di_g + 2.0 * k3.di_g + k4.di_g);
    return r;
}

double state_error(const PlantState& a, const PlantState& b, const PlantState& scale) {
    const double ew = std::abs(a.w - b.w) / std::max(std::abs(scale.w), 1.0);
    const double ev = std::abs(a.v_dc - b.v_dc) / std::max(std::abs(scale.v_dc), 1.0);
    const double ei = norm(a.i_g - b.i_g) / std::max(norm(scale.i_g), 1.0);
    return std::max({ew, ev, ei});
}

} // namespace

TEST_CASE("derivatives match the three balance equations") {
    const PlantParams p = default_plant();
    PlantState s;
    s.w = 100.0;
    s.v_dc = 5000.0;
    s.i_g = {800.0, -200.0};
    PlantInputs u;
    u.tau_m = 30000.0;
    u.tau_l = 25000.0;
    u.m_g = {0.6, 0.05};
    u.v_g = {3150.0, 0.0};

    const PlantDerivatives d = plant_derivatives(s, u, p);
    CHECK(d.dw ==
          doctest::Approx((-p.damping * s.w + u.tau_m - u.tau_l) / p.inertia));
    const double i_dc = dot(u.m_g, s.i_g);
    CHECK(d.dv_dc == doctest::Approx((-p.dc_conductance * s.v_dc -
                                      s.w / s.v_dc * u.tau_m + i_dc) /
                                     p.dc_capacitance));
    const DqVector expected_di =
        (u.v_g - apply_grid_impedance(s.i_g, p) - s.v_dc * u.m_g) / p.grid_inductance;
    CHECK(d.di_g.d == doctest::Approx(expected_di.d));
    CHECK(d.di_g.q == doctest::Approx(expected_di.q));
}

TEST_CASE("grid impedance applies R + X J") {
    PlantParams p;
    p.grid_resistance = 2.0;
    p.grid_inductance = 3.0;
    p.omega0 = 1.0;
    const DqVector z = apply_grid_impedance(DqVector{1.0, 0.0}, p);
    CHECK(z.d == doctest::Approx(2.0));
    CHECK(z.q == doctest::Approx(3.0));
    CHECK(p.impedance_norm_squared() == doctest::Approx(13.0));
}

TEST_CASE("steady-state active power covers friction, leakage and load") {
    const PlantParams p = default_plant();
    const double w = 120.0, v = 5000.0, tau_l = 40000.0;
    CHECK(steady_state_active_power(w, v, tau_l, p) ==
          doctest::Approx(p.damping * w * w + p.dc_conductance * v * v + w * tau_l));
}

TEST_CASE("forward Euler stays close to an RK4 oracle at the stock step") {
    // The grid branch pole sits near R/L +- j omega0, so at dt = 25 us the
    // first-order local error dominates. The tolerance below is the measured
    // envelope times a small margin, not a theoretical bound.
    const PlantParams p = default_plant();
    const SimConfig cfg = default_config();
    PlantState se;
    se.w = 0.8 * cfg.limits.w_max;
    se.v_dc = cfg.v_dc_ref;
    se.i_g = {500.0, -100.0};
    PlantState sr = se;
    PlantInputs u;
    u.tau_m = 20000.0;
    u.tau_l = 21000.0;
    u.m_g = {0.62, 0.04};
    u.v_g = {cfg.limits.v_g_nom, 0.0};

    const double dt = cfg.timing.dt_plant;
    const int n = static_cast<int>(0.05 / dt);
    double worst = 0.0;
    for (int k = 0; k < n; ++k) {
        se = plant_step(se, u, p, dt);
        sr = rk4_step(sr, u, p, dt);
        worst = std::max(worst, state_error(se, sr, sr));
    }
    // relative gap measured at 0.025 for the 25 us step: forward Euler grows
    // the grid branch's lightly damped 50 Hz mode by (omega0 dt)^2/2 per step
    CHECK(worst < 0.05);
}

TEST_CASE("Euler global error scales linearly with the step") {
    const PlantParams p = default_plant();
    const SimConfig cfg = default_config();
    PlantInputs u;
    u.tau_m = 20000.0;
    u.tau_l = 21000.0;
    u.m_g = {0.62, 0.04};
    u.v_g = {cfg.limits.v_g_nom, 0.0};
    PlantState s0;
    s0.w = 0.8 * cfg.limits.w_max;
    s0.v_dc = cfg.v_dc_ref;
    s0.i_g = {500.0, -100.0};

    auto run = [&](double dt, double horizon) {
        PlantState se = s0, sr = s0;
        const int n = static_cast<int>(horizon / dt);
        for (int k = 0; k < n; ++k) {
            se = plant_step(se, u, p, dt);
            sr = rk4_step(sr, u, p, dt);
        }
        return state_error(se, sr, sr);
    };

    const double e1 = run(25e-6, 0.02);
    const double e2 = run(12.5e-6, 0.02);
    CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("a collapsing DC link raises the divergence error") {
    const PlantParams p = default_plant();
    PlantState s;
    s.w = 0.0;
    s.v_dc = 1.0;  // nearly collapsed already
    s.i_g = {0.0, 0.0};
    PlantInputs u;
    u.tau_m = 0.0;
    u.tau_l = 0.0;
    u.m_g = {0.7, 0.0};
    u.v_g = {3150.0, 0.0};
    // m.i = 0 but the grid branch discharges nothing; force collapse via w tau
    s.w = 100.0;
    u.tau_m = 1000.0;
    CHECK_THROWS_AS(plant_step(s, u, p, 25e-6), SimulationDivergedError);

    PlantState bad = s;
    bad.v_dc = -5.0;
    CHECK_THROWS_AS(plant_derivatives(bad, u, p), SimulationDivergedError);
}
