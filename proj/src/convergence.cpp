#include "qadapt/convergence.hpp"

#include "qadapt/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace qadapt {

namespace {

double objective(double q, const DisturbanceSample& d, double q_ref, double gamma) {
    const double i2 = norm_squared(steady_state_current(d.p_star, q, d.v_g));
    const double dq = q - q_ref;
    return 0.5 * (i2 + gamma * dq * dq);
}

} // namespace

double optimal_q_analytic(const DisturbanceSample& d, double q_ref, double gamma,
                          const FeasibleInterval& interval) {
    if (!interval.usable()) {
        throw InfeasibleError("optimal_q_analytic: empty feasible interval");
    }
    const double v2 = norm_squared(d.v_g);
    const double q_u = gamma * q_ref / (gamma + 1.0 / v2);
    return std::clamp(q_u, interval.lo, interval.hi);
}

double optimal_q_bruteforce(const DisturbanceSample& d, double q_ref, double gamma,
                            const FeasibleInterval& interval, int n_grid) {
    if (!interval.usable()) {
        throw InfeasibleError("optimal_q_bruteforce: empty feasible interval");
    }
    if (n_grid < 2) throw ValidationError("optimal_q_bruteforce: n_grid must be >= 2");
    const double lo = interval.lo;
    const double hi = interval.hi;
    if (hi <= lo) return lo;

    const double width = hi - lo;
    int best = 0;
    double best_val = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_grid; ++i) {
        const double q = lo + width * i / (n_grid - 1);
        const double val = objective(q, d, q_ref, gamma);
        if (val < best_val) {
            best_val = val;
            best = i;
        }
    }

    // Golden-section refinement inside the bracketing cells.
    double a = lo + width * std::max(0, best - 1) / (n_grid - 1);
    double b = lo + width * std::min(n_grid - 1, best + 1) / (n_grid - 1);
    constexpr double invphi = 0.61803398874989485;
    double c = b - invphi * (b - a);
    double e = a + invphi * (b - a);
    double fc = objective(c, d, q_ref, gamma);
    double fe = objective(e, d, q_ref, gamma);
    for (int it = 0; it < 200 && (b - a) > 1e-13 * std::max(1.0, width); ++it) {
        if (fc < fe) {
            b = e;
            e = c;
            fe = fc;
            c = b - invphi * (b - a);
            fc = objective(c, d, q_ref, gamma);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + invphi * (b - a);
            fe = objective(e, d, q_ref, gamma);
        }
    }
    return 0.5 * (a + b);
}

InnerLoopConstants estimate_inner_loop_constants(std::span<const double> residual_norms) {
    if (residual_norms.empty() || !(residual_norms[0] > 0.0)) {
        throw ValidationError(
            "estimate_inner_loop_constants: first residual sample must be positive");
    }
    const double floor = residual_norms[0] * 1e-12;
    std::vector<double> ks, logs;
    for (std::size_t k = 0; k < residual_norms.size(); ++k) {
        const double r = residual_norms[k];
        if (std::isfinite(r) && r > floor) {
            ks.push_back(static_cast<double>(k));
            logs.push_back(std::log(r));
        }
    }
    if (ks.size() < 20) {
        throw ValidationError(
            "estimate_inner_loop_constants: need at least 20 samples above the "
            "numerical floor, got " + std::to_string(ks.size()));
    }

    const double n = static_cast<double>(ks.size());
    double sk = 0, sl = 0, skk = 0, skl = 0;
    for (std::size_t i = 0; i < ks.size(); ++i) {
        sk += ks[i];
        sl += logs[i];
        skk += ks[i] * ks[i];
        skl += ks[i] * logs[i];
    }
    const double denom = n * skk - sk * sk;
    const double slope = (n * skl - sk * sl) / denom;
    const double intercept = (sl - slope * sk) / n;

    InnerLoopConstants c;
    c.c2 = -slope;
    // A flat residual sequence fits a slope of +-1e-16 from log rounding
    // alone, so demand a decay rate meaningfully above that noise floor.
    if (!(c.c2 > 1e-9)) {
        throw AssumptionViolatedError(
            "estimate_inner_loop_constants: residual does not decay (c2 <= 0)");
    }
    c.c1 = std::exp(intercept) / residual_norms[0];
    double ss = 0;
    for (std::size_t i = 0; i < ks.size(); ++i) {
        const double r = logs[i] - (intercept + slope * ks[i]);
        ss += r * r;
    }
    c.fit_residual = std::sqrt(ss / n);
    return c;
}

double envelope_admissible_c1(std::span<const double> residual_norms, double c2) {
    if (residual_norms.empty() || !(residual_norms[0] > 0.0)) {
        throw ValidationError("envelope_admissible_c1: first sample must be positive");
    }
    const double floor = residual_norms[0] * 1e-12;
    double c1 = 1.0;
    for (std::size_t j = 0; j < residual_norms.size(); ++j) {
        if (!(residual_norms[j] > floor)) continue;
        for (std::size_t k = j; k < residual_norms.size(); ++k) {
            if (!(residual_norms[k] > floor)) continue;
            const double ratio = residual_norms[k] /
                                 (residual_norms[j] *
                                  std::exp(-c2 * static_cast<double>(k - j)));
            c1 = std::max(c1, ratio);
        }
    }
    return c1;
}

std::vector<ConvergenceRecord> build_convergence_records(
    std::span<const TriggerSample> triggers, const InnerLoopConstants& consts) {
    std::vector<ConvergenceRecord> out;
    out.reserve(triggers.size());
    std::vector<double> q_opt(triggers.size(), 0.0);
    std::vector<bool> usable(triggers.size(), false);
    for (std::size_t i = 0; i < triggers.size(); ++i) {
        const TriggerSample& tr = triggers[i];
        if (tr.interval.usable()) {
            q_opt[i] = optimal_q_analytic(tr.d, tr.q_ref, tr.gamma, tr.interval);
            usable[i] = true;
        }
    }
    for (std::size_t i = 0; i < triggers.size(); ++i) {
        const TriggerSample& tr = triggers[i];
        ConvergenceRecord rec;
        rec.k = tr.tick;
        rec.epsilon = tr.epsilon;
        rec.usable = usable[i];
        if (usable[i]) {
            rec.psi = psi_metric(tr.q_star_pre, q_opt[i]);
            if (i + 1 < triggers.size() && usable[i + 1]) {
                rec.delta_q_opt = std::abs(q_opt[i + 1] - q_opt[i]);
            }
            const DqVector i_ss =
                steady_state_current(tr.d.p_star, tr.q_star_pre, tr.d.v_g);
            rec.inner_residual = norm(tr.i_meas - i_ss);
            rec.bound_rhs = rec.epsilon * rec.psi + rec.delta_q_opt +
                            consts.c1 * consts.c3 * norm(tr.d.v_g) *
                                rec.inner_residual * std::exp(-consts.c2);
        }
        out.push_back(rec);
    }
    return out;
}

ContractionBoundReport contraction_bound_check(std::span<const ConvergenceRecord> records, int m) {
    ContractionBoundReport rep;
    rep.worst_margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < records.size(); ++i) {
        const ConvergenceRecord& a = records[i];
        const ConvergenceRecord& b = records[i + 1];
        if (!a.usable || !b.usable) continue;
        if (b.k - a.k != m) continue;
        ++rep.pairs;
        const double margin = a.bound_rhs - b.psi;
        rep.worst_margin = std::min(rep.worst_margin, margin);
        if (margin >= -1e-9) ++rep.satisfied;
    }
    if (rep.pairs == 0) rep.worst_margin = 0.0;
    rep.pass = rep.pairs > 0 && rep.satisfied == rep.pairs;
    return rep;
}

double tracking_error_asymptote(const InnerLoopConstants& consts, double eps_max,
                            double dq_max, const Limits& lim, int m) {
    if (!(eps_max < 1.0)) {
        throw ValidationError("tracking_error_asymptote: no contraction (eps_max >= 1)");
    }
    const double sep = consts.c1 * std::exp(-consts.c2 * m);
    if (!(sep < 1.0)) {
        throw ValidationError(
            "tracking_error_asymptote: insufficient timescale separation "
            "(c1 e^{-c2 m} >= 1)");
    }
    const double inner = 2.0 * consts.c1 * consts.c3 * lim.alpha_q * lim.p_g_max *
                         std::exp(-consts.c2) / (1.0 - sep);
    return (dq_max + inner) / (1.0 - eps_max);
}

} // namespace qadapt
