#include "qadapt/outer_af.hpp"

#include "qadapt/config.hpp"
#include "qadapt/inner_control.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace qadapt;

namespace {
double uniform(std::mt19937_64& rng, double lo, double hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}
} // namespace

TEST_CASE("hard hinge") {
    CHECK(gamma1(1.2, 1.0, 0.0) == doctest::Approx(0.2));
    CHECK(gamma1(0.8, 1.0, 0.0) == doctest::Approx(0.0));
    const double thr2 = 0.97 / std::sqrt(2.0);
    CHECK(gamma2(0.75, thr2, 0.0) == doctest::Approx(0.0641).epsilon(1e-2));
    CHECK(gamma2(0.75, thr2, 0.0) == doctest::Approx(0.75 - thr2));
    CHECK(gamma2(0.6, thr2, 0.0) == doctest::Approx(0.0));
}

TEST_CASE("softplus hinge") {
    const double thr = 2.0;
    const double sharpness = 40.0;
    const double beta = sharpness / thr;
    SUBCASE("value ln(2)/beta at the threshold") {
        CHECK(hinge(thr, thr, sharpness) == doctest::Approx(std::log(2.0) / beta));
    }
    SUBCASE("upper-bounds the hard hinge and converges to it") {
        std::mt19937_64 rng(3);
        for (int k = 0; k < 300; ++k) {
            const double v = uniform(rng, 0.0, 5.0);
            const double hard = hinge(v, thr, 0.0);
            const double soft = hinge(v, thr, sharpness);
            // log1p rounding can land one ulp under the hard value far above
            // the knee, where the soft correction term underflows
            CHECK(soft >= hard - 1e-12 * std::max(1.0, hard));
            CHECK(hinge(v, thr, 4000.0) == doctest::Approx(hard).epsilon(1e-3).scale(1.0));
        }
    }
    SUBCASE("monotone") {
        std::mt19937_64 rng(4);
        for (int k = 0; k < 1000; ++k) {
            double a = uniform(rng, 0.0, 2.0);
            double b = uniform(rng, 0.0, 2.0);
            if (a > b) std::swap(a, b);
            CHECK(gamma2(a, 0.6859, 0.0) <= gamma2(b, 0.6859, 0.0));
            CHECK(gamma2(a, 0.6859, 10.0) <= gamma2(b, 0.6859, 10.0));
        }
    }
    SUBCASE("no overflow far above the threshold") {
        const double far = hinge(1e4, thr, sharpness);
        CHECK(std::isfinite(far));
        CHECK(far == doctest::Approx(1e4 - thr).epsilon(1e-12));
    }
}

TEST_CASE("modulation-minimizing reactive power") {
    SUBCASE("hand values") {
        PlantParams p;
        p.grid_resistance = 1.0;
        p.grid_inductance = 1.0;
        p.omega0 = 1.0;
        const DqVector v{std::sqrt(2.0), 0.0};
        CHECK(q_min_modulation(v, p) == doctest::Approx(1.0));
    }
    SUBCASE("zero resistance reduces to v^2 / X") {
        PlantParams p;
        p.grid_resistance = 0.0;
        p.grid_inductance = 0.002;
        p.omega0 = 100.0;
        const DqVector v{300.0, 0.0};
        CHECK(q_min_modulation(v, p) == doctest::Approx(300.0 * 300.0 / 0.2));
    }
    SUBCASE("zero impedance rejected") {
        PlantParams p;
        CHECK_THROWS_AS(q_min_modulation(DqVector{100.0, 0.0}, p), std::invalid_argument);
    }
    SUBCASE("grid scan confirms the minimizer") {
        const SimConfig cfg = default_config();
        const DqVector v{cfg.limits.v_g_nom, 0.0};
        const double q_mm = q_min_modulation(v, cfg.plant);
        double best_q = 0.0, best = 1e300;
        for (int k = 0; k <= 4000; ++k) {
            const double q = -2.0 * q_mm + 4.0 * q_mm * k / 4000.0;
            const double m2 = modulation_norm_squared(1e6, q, v, cfg.plant, cfg.v_dc_ref);
            if (m2 < best) {
                best = m2;
                best_q = q;
            }
        }
        CHECK(q_mm == doctest::Approx(best_q).epsilon(1e-3));
    }
}

TEST_CASE("governor dynamics") {
    AfConfig cfg;
    cfg.omega_q = 1.0;
    cfg.kappa1 = 0.0;
    cfg.kappa2 = 0.0;
    cfg.thr1 = 1e12;
    cfg.thr2 = 1e12;
    cfg.sharpness = 0.0;
    SUBCASE("reference is a fixed point with inactive hinges") {
        AfState st{5.0};
        st = af_step(st, 5.0, 0.0, 0.0, 0.0, 0.25, cfg);
        CHECK(st.q_star == doctest::Approx(5.0));
    }
    SUBCASE("single Euler step of the first-order lag") {
        AfState st{0.0};
        st = af_step(st, 1.0, 0.0, 0.0, 0.0, 0.5, cfg);
        CHECK(st.q_star == doctest::Approx(0.5));
    }
    SUBCASE("63 percent rise at one time constant") {
        AfState st{0.0};
        const double dt = 1e-4;
        const int n = static_cast<int>(1.0 / dt);
        for (int k = 0; k < n; ++k) st = af_step(st, 1.0, 0.0, 0.0, 0.0, dt, cfg);
        CHECK(st.q_star == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(0.02));
    }
    SUBCASE("constant modulation hinge settles at the weighted average") {
        AfConfig c = cfg;
        c.kappa2 = 250.0;
        c.thr2 = 0.5;
        const double m_raw = 0.6;  // gamma2 = 0.1 held constant
        const double g2 = 0.1;
        const double q_ref = 2.0, q_mm = 10.0;
        const double q_eq = (c.omega_q * q_ref + c.kappa2 * g2 * q_mm) /
                            (c.omega_q + c.kappa2 * g2);
        AfState st{0.0};
        for (int k = 0; k < 400000; ++k) st = af_step(st, q_ref, 0.0, m_raw, q_mm, 1e-4, c);
        CHECK(st.q_star == doctest::Approx(q_eq).epsilon(1e-9));
        // hinge dominance bound: equilibrium offset from q_mm is the lag share
        CHECK(std::abs(q_eq - q_mm) ==
              doctest::Approx(c.omega_q * std::abs(q_ref - q_mm) /
                              (c.omega_q + c.kappa2 * g2)));
    }
    SUBCASE("current hinge pulls toward zero") {
        AfConfig c = cfg;
        c.kappa1 = 0.5;
        c.thr1 = 1.0;
        const double i_norm = 3.0;  // gamma1 = 2, so decay rate omega_q + 1
        const double q_ref = 4.0;
        const double q_eq = c.omega_q * q_ref / (c.omega_q + c.kappa1 * 2.0);
        AfState st{q_ref};
        for (int k = 0; k < 400000; ++k) st = af_step(st, q_ref, i_norm, 0.0, 0.0, 1e-4, c);
        CHECK(st.q_star == doctest::Approx(q_eq).epsilon(1e-9));
    }
}
