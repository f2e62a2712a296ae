#include "qadapt/trace_io.hpp"

#include "qadapt/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

namespace qadapt {

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string render_csv(const ScenarioTrace& tr) {
    std::string out;
    out.reserve(tr.size() * 220 + 256);
    out += "t,w,w_ref,v_dc,tau_m,tau_l,m_norm,m_raw_norm,m_limit,i_norm,i_star_norm,"
           "i_star_raw_norm,i_g_max,i_err_norm,p_star,p_meas,q_meas,q_ref,q_star,v_g_norm,"
           "current_feasible,modulation_feasible,degraded,ofo_trigger,tripped\n";
    const std::string m_limit = format_double(tr.m_limit);
    const std::string i_g_max = format_double(tr.i_g_max);
    for (std::size_t i = 0; i < tr.size(); ++i) {
        out += format_double(tr.t[i]);
        out += ',';
        out += format_double(tr.w[i]);
        out += ',';
        out += format_double(tr.w_ref[i]);
        out += ',';
        out += format_double(tr.v_dc[i]);
        out += ',';
        out += format_double(tr.tau_m[i]);
        out += ',';
        out += format_double(tr.tau_l[i]);
        out += ',';
        out += format_double(tr.m_norm[i]);
        out += ',';
        out += format_double(tr.m_raw_norm[i]);
        out += ',';
        out += m_limit;
        out += ',';
        out += format_double(tr.i_norm[i]);
        out += ',';
        out += format_double(tr.i_star_norm[i]);
        out += ',';
        out += format_double(tr.i_star_raw_norm[i]);
        out += ',';
        out += i_g_max;
        out += ',';
        out += format_double(tr.i_err_norm[i]);
        out += ',';
        out += format_double(tr.p_star[i]);
        out += ',';
        out += format_double(tr.p_meas[i]);
        out += ',';
        out += format_double(tr.q_meas[i]);
        out += ',';
        out += format_double(tr.q_ref[i]);
        out += ',';
        out += format_double(tr.q_star[i]);
        out += ',';
        out += format_double(tr.v_g_norm[i]);
        out += ',';
        out += char('0' + tr.current_feasible[i]);
        out += ',';
        out += char('0' + tr.modulation_feasible[i]);
        out += ',';
        out += char('0' + tr.degraded[i]);
        out += ',';
        out += char('0' + tr.ofo_trigger[i]);
        out += ',';
        out += char('0' + tr.tripped[i]);
        out += '\n';
    }
    return out;
}

std::string render_metrics_json(const MetricsReport& met, const ConvergenceSummary* conv) {
    nlohmann::json j;
    j["outcome"] = to_string(met.outcome);
    j["termination_reason"] = met.termination_reason;
    j["end_time_s"] = met.end_time;
    j["rows"] = met.rows;

    j["counters"]["control_ticks"] = met.counters.control_ticks;
    j["counters"]["plant_steps"] = met.counters.plant_steps;
    j["counters"]["af_steps"] = met.counters.af_steps;
    j["counters"]["ofo_tick_calls"] = met.counters.ofo_tick_calls;
    j["counters"]["ofo_triggers"] = met.counters.ofo_triggers;
    j["counters"]["degraded_triggers"] = met.counters.degraded_triggers;

    j["extrema"]["max_i_norm"] = met.max_i_norm;
    j["extrema"]["max_m_norm"] = met.max_m_norm;
    j["extrema"]["max_m_raw_norm"] = met.max_m_raw_norm;
    j["extrema"]["max_abs_w"] = met.max_abs_w;
    j["extrema"]["min_v_dc"] = met.min_v_dc;
    j["extrema"]["max_v_dc"] = met.max_v_dc;
    j["extrema"]["overspeed"] = met.overspeed;
    j["extrema"]["overcurrent"] = met.overcurrent;

    j["exposure_s"]["m_saturated"] = met.time_m_saturated;
    j["exposure_s"]["current_infeasible"] = met.time_current_infeasible;
    j["exposure_s"]["modulation_infeasible"] = met.time_modulation_infeasible;
    j["exposure_s"]["disjoint"] = met.time_disjoint;
    j["exposure_s"]["degraded"] = met.time_degraded;

    j["tracking"]["q_ref_rms_err_tail"] = met.q_ref_rms_err_tail;
    j["tracking"]["q_star_rms_err_tail"] = met.q_star_rms_err_tail;

    j["final"]["w"] = met.final_w;
    j["final"]["v_dc"] = met.final_v_dc;
    j["final"]["q_star"] = met.final_q_star;
    j["final"]["q_meas"] = met.final_q_meas;
    j["final"]["p_meas"] = met.final_p_meas;

    j["trips"] = nlohmann::json::array();
    for (const auto& tr : met.trips)
        j["trips"].push_back({{"t", tr.t}, {"v_dc", tr.v_dc}, {"kind", tr.kind}});

    if (conv) {
        nlohmann::json c;
        c["c1"] = conv->constants.c1;
        c["c2"] = conv->constants.c2;
        c["c3"] = conv->constants.c3;
        c["fit_residual"] = conv->constants.fit_residual;
        c["ticks_per_trigger"] = conv->m;
        c["epsilon"] = conv->epsilon;
        c["n_triggers"] = conv->n_triggers;
        c["n_usable"] = conv->n_usable;
        c["pairs_checked"] = conv->bound_check.pairs;
        c["pairs_satisfied"] = conv->bound_check.satisfied;
        c["worst_margin"] = conv->bound_check.worst_margin;
        c["contraction_certified"] = conv->bound_check.pass;
        c["max_psi_ratio"] = conv->max_psi_ratio;
        c["dq_max"] = conv->dq_max;
        c["asymptote"] = conv->asymptote;
        c["tail_sup_psi"] = conv->tail_sup_psi;
        c["asymptote_holds"] = conv->asymptote_holds;
        j["convergence"] = std::move(c);
    }
    return j.dump(2) + "\n";
}

namespace {

struct Series {
    const char* label;
    const std::vector<double>* y;
    const char* color;
};

void svg_num(std::string& out, double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    out += buf;
}

void svg_label_num(std::string& out, double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.5g", v);
    out += buf;
}

void append_panel(std::string& svg, const std::vector<double>& t,
                  const std::vector<Series>& series,
                  const std::vector<std::pair<double, const char*>>& hlines,
                  const char* title, double x0, double y0, double width, double height,
                  bool with_time_axis) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& s : series)
        for (double v : *s.y) {
            if (!std::isfinite(v)) continue;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    for (const auto& hl : hlines) {
        lo = std::min(lo, hl.first);
        hi = std::max(hi, hl.first);
    }
    if (!(hi > lo)) {
        hi = lo + 1.0;
        lo -= 1.0;
    }
    const double pad = 0.06 * (hi - lo);
    lo -= pad;
    hi += pad;
    const double t0 = t.empty() ? 0.0 : t.front();
    const double t1 = t.empty() || t.back() <= t0 ? t0 + 1.0 : t.back();

    auto px = [&](double tv) { return x0 + (tv - t0) / (t1 - t0) * width; };
    auto py = [&](double yv) { return y0 + height - (yv - lo) / (hi - lo) * height; };

    svg += "<rect x=\"";
    svg_num(svg, x0);
    svg += "\" y=\"";
    svg_num(svg, y0);
    svg += "\" width=\"";
    svg_num(svg, width);
    svg += "\" height=\"";
    svg_num(svg, height);
    svg += "\" fill=\"#fcfcfc\" stroke=\"#999\" stroke-width=\"1\"/>\n";

    for (const auto& [v, color] : hlines) {
        svg += "<line x1=\"";
        svg_num(svg, x0);
        svg += "\" y1=\"";
        svg_num(svg, py(v));
        svg += "\" x2=\"";
        svg_num(svg, x0 + width);
        svg += "\" y2=\"";
        svg_num(svg, py(v));
        svg += "\" stroke=\"";
        svg += color;
        svg += "\" stroke-width=\"1\" stroke-dasharray=\"5,4\"/>\n";
    }

    const std::size_t n = t.size();
    const std::size_t stride = std::max<std::size_t>(1, n / 1600);
    for (const auto& s : series) {
        svg += "<polyline fill=\"none\" stroke=\"";
        svg += s.color;
        svg += "\" stroke-width=\"1.2\" points=\"";
        for (std::size_t i = 0; i < n; i += stride) {
            svg_num(svg, px(t[i]));
            svg += ',';
            svg_num(svg, py((*s.y)[i]));
            svg += ' ';
        }
        if (n > 0 && (n - 1) % stride != 0) {
            svg_num(svg, px(t[n - 1]));
            svg += ',';
            svg_num(svg, py((*s.y)[n - 1]));
        }
        svg += "\"/>\n";
    }

    svg += "<text x=\"";
    svg_num(svg, x0 + 6.0);
    svg += "\" y=\"";
    svg_num(svg, y0 + 14.0);
    svg += "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#222\">";
    svg += title;
    svg += "</text>\n";

    // y-range labels
    svg += "<text x=\"";
    svg_num(svg, x0 - 6.0);
    svg += "\" y=\"";
    svg_num(svg, y0 + 11.0);
    svg += "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#555\" text-anchor=\"end\">";
    svg_label_num(svg, hi);
    svg += "</text>\n<text x=\"";
    svg_num(svg, x0 - 6.0);
    svg += "\" y=\"";
    svg_num(svg, y0 + height - 2.0);
    svg += "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#555\" text-anchor=\"end\">";
    svg_label_num(svg, lo);
    svg += "</text>\n";

    // legend
    double lx = x0 + width - 10.0;
    for (auto it = series.rbegin(); it != series.rend(); ++it) {
        const double tw = 7.0 * static_cast<double>(std::string_view(it->label).size()) + 22.0;
        lx -= tw;
        svg += "<line x1=\"";
        svg_num(svg, lx);
        svg += "\" y1=\"";
        svg_num(svg, y0 + 10.0);
        svg += "\" x2=\"";
        svg_num(svg, lx + 14.0);
        svg += "\" y2=\"";
        svg_num(svg, y0 + 10.0);
        svg += "\" stroke=\"";
        svg += it->color;
        svg += "\" stroke-width=\"2\"/>\n<text x=\"";
        svg_num(svg, lx + 18.0);
        svg += "\" y=\"";
        svg_num(svg, y0 + 14.0);
        svg += "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">";
        svg += it->label;
        svg += "</text>\n";
    }

    if (with_time_axis) {
        svg += "<text x=\"";
        svg_num(svg, x0);
        svg += "\" y=\"";
        svg_num(svg, y0 + height + 16.0);
        svg += "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">t = ";
        svg_label_num(svg, t0);
        svg += " s</text>\n<text x=\"";
        svg_num(svg, x0 + width);
        svg += "\" y=\"";
        svg_num(svg, y0 + height + 16.0);
        svg += "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\" "
               "text-anchor=\"end\">t = ";
        svg_label_num(svg, t1);
        svg += " s</text>\n";
    }
}

} // namespace

std::string render_plot_svg(const ScenarioTrace& tr) {
    const double panel_w = 880.0, panel_h = 132.0, gap = 26.0;
    const double x0 = 84.0, y_start = 16.0;
    const int n_panels = 6;
    const double total_h = y_start + n_panels * (panel_h + gap) + 10.0;

    std::string svg;
    svg.reserve(1 << 20);
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"980\" height=\"";
    svg_num(svg, total_h);
    svg += "\" viewBox=\"0 0 980 ";
    svg_num(svg, total_h);
    svg += "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    double y = y_start;
    append_panel(svg, tr.t, {{"w", &tr.w, "#1f77b4"}, {"w_ref", &tr.w_ref, "#aaaaaa"}}, {},
                 "shaft speed [rad/s]", x0, y, panel_w, panel_h, false);
    y += panel_h + gap;
    append_panel(svg, tr.t, {{"v_dc", &tr.v_dc, "#d62728"}}, {},
                 "DC-link voltage [V]", x0, y, panel_w, panel_h, false);
    y += panel_h + gap;
    append_panel(svg, tr.t,
                 {{"p_star", &tr.p_star, "#9467bd"}, {"p_meas", &tr.p_meas, "#2ca02c"}}, {},
                 "active power [W]", x0, y, panel_w, panel_h, false);
    y += panel_h + gap;
    append_panel(svg, tr.t,
                 {{"q_star", &tr.q_star, "#ff7f0e"},
                  {"q_ref", &tr.q_ref, "#aaaaaa"},
                  {"q_meas", &tr.q_meas, "#2ca02c"}},
                 {}, "reactive power [var]", x0, y, panel_w, panel_h, false);
    y += panel_h + gap;
    append_panel(svg, tr.t,
                 {{"i", &tr.i_norm, "#1f77b4"}, {"i_star", &tr.i_star_norm, "#ff7f0e"}},
                 {{tr.i_g_max, "#d62728"}}, "current magnitude [A]", x0, y, panel_w, panel_h,
                 false);
    y += panel_h + gap;
    append_panel(svg, tr.t,
                 {{"m", &tr.m_norm, "#1f77b4"}, {"m_raw", &tr.m_raw_norm, "#ff7f0e"}},
                 {{tr.m_limit, "#d62728"}}, "modulation magnitude", x0, y, panel_w, panel_h,
                 true);

    svg += "</svg>\n";
    return svg;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot open output file: " + path);
    out << content;
    if (!out) throw ValidationError("failed writing output file: " + path);
}

OutputPaths write_outputs(const SimResult& res, const OutputConfig& out,
                          const ConvergenceSummary* conv) {
    std::filesystem::create_directories(out.dir);
    OutputPaths paths;
    paths.trace_csv = (std::filesystem::path(out.dir) / "trace.csv").string();
    paths.metrics_json = (std::filesystem::path(out.dir) / "metrics.json").string();
    write_text_file(paths.trace_csv, render_csv(res.trace));
    write_text_file(paths.metrics_json, render_metrics_json(res.metrics, conv));
    if (out.plot) {
        paths.plot_svg = (std::filesystem::path(out.dir) / "plot.svg").string();
        write_text_file(paths.plot_svg, render_plot_svg(res.trace));
    }
    return paths;
}

} // namespace qadapt
