#include "qadapt/dq.hpp"

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

TEST_CASE("rotate90 is the quarter-turn J") {
    const DqVector x{3.0, -2.0};
    const DqVector y = rotate90(x);
    CHECK(y.d == doctest::Approx(2.0));
    CHECK(y.q == doctest::Approx(3.0));
    CHECK(dot(x, y) == doctest::Approx(0.0));
    CHECK(norm(y) == doctest::Approx(norm(x)));
    const DqVector twice = rotate90(rotate90(x));
    CHECK(twice.d == doctest::Approx(-x.d));
    CHECK(twice.q == doctest::Approx(-x.q));
}

TEST_CASE("instantaneous power sign conventions") {
    const DqVector v{100.0, 0.0};
    SUBCASE("aligned current carries active power only") {
        const auto pw = instantaneous_power(v, DqVector{2.0, 0.0});
        CHECK(pw.active_w == doctest::Approx(200.0));
        CHECK(pw.reactive_var == doctest::Approx(0.0));
    }
    SUBCASE("negative q-axis current gives positive reactive power") {
        const auto pw = instantaneous_power(v, DqVector{0.0, -2.0});
        CHECK(pw.active_w == doctest::Approx(0.0));
        CHECK(pw.reactive_var == doctest::Approx(200.0));
    }
}

TEST_CASE("scalar saturation") {
    CHECK(sat_scalar(5.0, 2.0) == doctest::Approx(2.0));
    CHECK(sat_scalar(-5.0, 2.0) == doctest::Approx(-2.0));
    CHECK(sat_scalar(1.5, 2.0) == doctest::Approx(1.5));
    CHECK_THROWS_AS(sat_scalar(1.0, -1.0), std::invalid_argument);
}

TEST_CASE("circular saturation preserves direction") {
    const DqVector x{3.0, 4.0};
    const DqVector y = sat_circular(x, 1.0);
    CHECK(norm(y) == doctest::Approx(1.0));
    CHECK(y.d * x.q == doctest::Approx(y.q * x.d));
    const DqVector inside = sat_circular(DqVector{0.3, 0.4}, 1.0);
    CHECK(inside.d == doctest::Approx(0.3));
    CHECK(inside.q == doctest::Approx(0.4));
    CHECK_THROWS_AS(sat_circular(x, -0.1), std::invalid_argument);
}

TEST_CASE("park transform round trip and power invariance") {
    std::mt19937_64 rng(42);
    for (int k = 0; k < 200; ++k) {
        const Abc v_abc{uniform(rng, -1.0, 1.0) * 400.0, uniform(rng, -1.0, 1.0) * 400.0,
                        uniform(rng, -1.0, 1.0) * 400.0};
        const Abc i_abc{uniform(rng, -1.0, 1.0) * 50.0, uniform(rng, -1.0, 1.0) * 50.0,
                        uniform(rng, -1.0, 1.0) * 50.0};
        const double theta = uniform(rng, 0.0, 6.283185307);

        const Abc v_dq0 = park_transform(v_abc, theta);
        const Abc back = inverse_park_transform(v_dq0, theta);
        for (int j = 0; j < 3; ++j) CHECK(back[j] == doctest::Approx(v_abc[j]).epsilon(1e-12));

        // power-invariant scaling: sum of abc products equals the dq0 dot product
        const Abc i_dq0 = park_transform(i_abc, theta);
        const double p_abc = v_abc[0] * i_abc[0] + v_abc[1] * i_abc[1] + v_abc[2] * i_abc[2];
        const double p_dq0 = v_dq0[0] * i_dq0[0] + v_dq0[1] * i_dq0[1] + v_dq0[2] * i_dq0[2];
        CHECK(p_dq0 == doctest::Approx(p_abc).epsilon(1e-12));
    }
}

TEST_CASE("balanced sinusoidal set maps to a constant dq vector") {
    const double amp = 100.0;
    const double omega = 2.0 * 3.14159265358979 * 50.0;
    for (double t : {0.0, 1e-3, 7e-3, 13e-3}) {
        const double th = omega * t;
        const Abc abc{amp * std::cos(th), amp * std::cos(th - 2.0943951023931953),
                      amp * std::cos(th + 2.0943951023931953)};
        const Abc dq0 = park_transform(abc, th);
        CHECK(dq0[0] == doctest::Approx(amp * std::sqrt(1.5)).epsilon(1e-12));
        CHECK(dq0[1] == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(std::abs(dq0[2]) < 1e-9);
    }
}
