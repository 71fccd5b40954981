#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "yieldcast/core/csv.hpp"
#include "yieldcast/core/error.hpp"
#include "yieldcast/core/text.hpp"
#include "yieldcast/dataset/synth.hpp"
#include "yieldcast/pipeline/manifest.hpp"

namespace yieldcast::pipeline {

struct PlotPoint {
    double x = 0.0;
    double y = 0.0;
    std::optional<double> color; ///< in [0, 1]; empty draws the default color
    std::string label;           ///< emitted as data-label when non-empty
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool identity_line = false;
    bool zero_line = false;
    std::vector<std::string> y_ticks; ///< categorical labels for y = 0, 1, ...; empty = numeric axis
};

namespace plot_detail {

inline constexpr double width = 640, height = 480, left = 70, right = 20, top = 40, bottom = 60;

inline std::string esc(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out.push_back(c);
        }
    }
    return out;
}

inline std::string num(double v) { return format_fixed(v, 2); }

/// Blue (0) to red (1).
inline std::string color_of(std::optional<double> c) {
    if (!c) return "#1f77b4";
    const double t = std::clamp(*c, 0.0, 1.0);
    const int r = static_cast<int>(std::lround(30 + 200 * t)), g = 60, b = static_cast<int>(std::lround(230 - 200 * t));
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

struct Range {
    double lo = 0.0, hi = 1.0;
    void pad() {
        if (lo == hi) {
            lo -= 0.5;
            hi += 0.5;
        }
        const double p = 0.05 * (hi - lo);
        lo -= p;
        hi += p;
    }
};

inline void header(std::ostringstream& s, const PlotSpec& spec) {
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\" viewBox=\"0 0 "
      << width << ' ' << height << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << esc(spec.title) << "</text>\n";
    s << "<text x=\"" << width / 2 << "\" y=\"" << height - 15 << "\" text-anchor=\"middle\" font-size=\"12\">"
      << esc(spec.x_label) << "</text>\n";
    s << "<text x=\"16\" y=\"" << height / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
      << height / 2 << ")\">" << esc(spec.y_label) << "</text>\n";
}

} // namespace plot_detail

/// Scatter plot. Each point becomes a <circle class="point"> with data-x and
/// data-y holding the exact plotted values.
inline std::string svg_scatter(const PlotSpec& spec, const std::vector<PlotPoint>& pts) {
    using namespace plot_detail;
    Range rx, ry;
    if (!pts.empty()) {
        rx.lo = rx.hi = pts.front().x;
        ry.lo = ry.hi = pts.front().y;
    }
    for (const auto& p : pts) {
        rx.lo = std::min(rx.lo, p.x);
        rx.hi = std::max(rx.hi, p.x);
        ry.lo = std::min(ry.lo, p.y);
        ry.hi = std::max(ry.hi, p.y);
    }
    if (spec.identity_line) {
        rx.lo = ry.lo = std::min(rx.lo, ry.lo);
        rx.hi = ry.hi = std::max(rx.hi, ry.hi);
    }
    if (spec.zero_line) {
        ry.lo = std::min(ry.lo, 0.0);
        ry.hi = std::max(ry.hi, 0.0);
    }
    rx.pad();
    ry.pad();
    const double pw = width - left - right, ph = height - top - bottom;
    auto sx = [&](double x) { return left + (x - rx.lo) / (rx.hi - rx.lo) * pw; };
    auto sy = [&](double y) { return top + ph - (y - ry.lo) / (ry.hi - ry.lo) * ph; };

    std::ostringstream s;
    header(s, spec);
    s << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = rx.lo + (rx.hi - rx.lo) * i / 4.0;
        s << "<text class=\"tick\" x=\"" << num(sx(xv)) << "\" y=\"" << num(top + ph + 16)
          << "\" text-anchor=\"middle\" font-size=\"10\">" << esc(format_fixed(xv, 3)) << "</text>\n";
        if (spec.y_ticks.empty()) {
            const double yv = ry.lo + (ry.hi - ry.lo) * i / 4.0;
            s << "<text class=\"tick\" x=\"" << num(left - 6) << "\" y=\"" << num(sy(yv) + 3)
              << "\" text-anchor=\"end\" font-size=\"10\">" << esc(format_fixed(yv, 3)) << "</text>\n";
        }
    }
    for (std::size_t i = 0; i < spec.y_ticks.size(); ++i)
        s << "<text class=\"tick\" x=\"" << num(left - 6) << "\" y=\"" << num(sy(static_cast<double>(i)) + 3)
          << "\" text-anchor=\"end\" font-size=\"9\">" << esc(spec.y_ticks[i]) << "</text>\n";
    if (spec.identity_line)
        s << "<line class=\"identity\" x1=\"" << num(sx(rx.lo)) << "\" y1=\"" << num(sy(rx.lo)) << "\" x2=\"" << num(sx(rx.hi))
          << "\" y2=\"" << num(sy(rx.hi)) << "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
    if (spec.zero_line)
        s << "<line class=\"zero\" x1=\"" << num(left) << "\" y1=\"" << num(sy(0.0)) << "\" x2=\"" << num(left + pw)
          << "\" y2=\"" << num(sy(0.0)) << "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
    for (const auto& p : pts) {
        s << "<circle class=\"point\" cx=\"" << num(sx(p.x)) << "\" cy=\"" << num(sy(p.y)) << "\" r=\"2.5\" fill=\""
          << color_of(p.color) << "\" fill-opacity=\"0.7\" data-x=\"" << format_double(p.x) << "\" data-y=\""
          << format_double(p.y) << "\"";
        if (!p.label.empty()) s << " data-label=\"" << esc(p.label) << "\"";
        s << "/>\n";
    }
    s << "</svg>\n";
    return s.str();
}

struct HistogramBar {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
};

/// Histogram. Each bar is a <rect class="bar"> with data-lo, data-hi and data-count.
inline std::string svg_histogram(const PlotSpec& spec, const std::vector<HistogramBar>& bars) {
    using namespace plot_detail;
    std::ostringstream s;
    header(s, spec);
    const double pw = width - left - right, ph = height - top - bottom;
    s << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
    std::size_t max_count = 1;
    for (const auto& b : bars) max_count = std::max(max_count, b.count);
    const double bw = bars.empty() ? 0.0 : pw / static_cast<double>(bars.size());
    for (std::size_t i = 0; i < bars.size(); ++i) {
        const double h = ph * static_cast<double>(bars[i].count) / static_cast<double>(max_count);
        s << "<rect class=\"bar\" x=\"" << num(left + bw * static_cast<double>(i)) << "\" y=\"" << num(top + ph - h)
          << "\" width=\"" << num(bw) << "\" height=\"" << num(h) << "\" fill=\"#1f77b4\" stroke=\"white\" data-lo=\""
          << format_double(bars[i].lo) << "\" data-hi=\"" << format_double(bars[i].hi) << "\" data-count=\"" << bars[i].count
          << "\"/>\n";
    }
    if (!bars.empty()) {
        s << "<text class=\"tick\" x=\"" << num(left) << "\" y=\"" << num(top + ph + 16)
          << "\" text-anchor=\"middle\" font-size=\"10\">" << esc(format_fixed(bars.front().lo, 3)) << "</text>\n";
        s << "<text class=\"tick\" x=\"" << num(left + pw) << "\" y=\"" << num(top + ph + 16)
          << "\" text-anchor=\"middle\" font-size=\"10\">" << esc(format_fixed(bars.back().hi, 3)) << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

namespace plot_detail {

struct Table {
    csv::Header header;
    std::vector<csv::Row> rows;

    double number(const csv::Row& r, std::size_t col) const {
        const auto v = col < r.fields.size() ? parse_double(r.fields[col]) : std::nullopt;
        if (!v) throw ParseError("expected a number", r.line);
        return *v;
    }
};

inline Table load_table(const fs::path& p) {
    if (!fs::is_regular_file(p)) throw Error("missing artifact " + p.generic_string());
    auto rows = csv::parse(read_file(p));
    if (rows.empty()) throw ParseError(p.generic_string() + ": empty file");
    csv::Header h(rows.front());
    rows.erase(rows.begin());
    return {std::move(h), std::move(rows)};
}

} // namespace plot_detail

/// Renders the static figures of a finished run into `plots_dir` and returns
/// the files written (relative to `plots_dir`):
///
///   <experiment>_prediction_error.svg    predicted vs actual, identity line
///   <experiment>_residuals.svg           residual vs predicted, zero line
///   <experiment>_residual_histogram.svg  bins from residual_histogram.csv
///   shap_summary.svg                     phi per feature (top 20), colored by feature value
///   shap_dependence.svg                  phi vs feature value, colored by the color feature
///
/// Throws Error when no experiment artifacts or SHAP exports are found.
inline std::vector<std::string> cmd_plot(const fs::path& run_dir, const fs::path& plots_dir) {
    using plot_detail::load_table;
    std::vector<std::string> written;
    auto put = [&](const std::string& name, const std::string& svg) {
        data::write_text_file(plots_dir / name, svg);
        written.push_back(name);
    };
    std::size_t experiments = 0;
    for (const char* ex : {"all_features", "eo_only"}) {
        const fs::path dir = run_dir / ex;
        if (!fs::is_directory(dir)) continue;
        ++experiments;
        const auto res = load_table(dir / "residuals.csv");
        const auto ia = res.header.require("actual"), ip = res.header.require("predicted"),
                   ir = res.header.require("residual");
        std::vector<PlotPoint> pe, rs;
        for (const auto& r : res.rows) {
            pe.push_back({res.number(r, ia), res.number(r, ip), std::nullopt, ""});
            rs.push_back({res.number(r, ip), res.number(r, ir), std::nullopt, ""});
        }
        put(std::string(ex) + "_prediction_error.svg",
            svg_scatter({std::string("Prediction error (") + ex + ")", "actual yield (t/ha)", "predicted yield (t/ha)", true,
                         false, {}},
                        pe));
        put(std::string(ex) + "_residuals.svg",
            svg_scatter({std::string("Residuals (") + ex + ")", "predicted yield (t/ha)", "residual (t/ha)", false, true, {}},
                        rs));
        const auto hist = load_table(dir / "residual_histogram.csv");
        const auto hl = hist.header.require("lo"), hh = hist.header.require("hi"), hc = hist.header.require("count");
        std::vector<HistogramBar> bars;
        for (const auto& r : hist.rows)
            bars.push_back({hist.number(r, hl), hist.number(r, hh), static_cast<std::size_t>(hist.number(r, hc))});
        put(std::string(ex) + "_residual_histogram.svg",
            svg_histogram({std::string("Residual distribution (") + ex + ")", "residual (t/ha)", "count", false, false, {}},
                          bars));
    }
    if (experiments == 0) throw Error("missing artifact: no experiment directories under " + run_dir.generic_string());

    const auto pts = load_table(run_dir / "explain" / "shap_points.csv");
    {
        const auto ifeat = pts.header.require("feature"), iv = pts.header.require("feature_value"),
                   ip = pts.header.require("phi");
        std::vector<std::string> order;
        std::map<std::string, std::pair<double, double>> range;
        for (const auto& r : pts.rows) {
            const auto& f = r.fields.at(ifeat);
            if (std::find(order.begin(), order.end(), f) == order.end()) order.push_back(f);
            const double v = pts.number(r, iv);
            auto [it, fresh] = range.emplace(f, std::pair{v, v});
            if (!fresh) {
                it->second.first = std::min(it->second.first, v);
                it->second.second = std::max(it->second.second, v);
            }
        }
        const std::size_t shown = std::min<std::size_t>(order.size(), 20);
        std::vector<std::string> ticks(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(shown));
        std::reverse(ticks.begin(), ticks.end());
        std::vector<PlotPoint> sp;
        for (const auto& r : pts.rows) {
            const auto& f = r.fields.at(ifeat);
            const auto pos = static_cast<std::size_t>(std::find(order.begin(), order.end(), f) - order.begin());
            if (pos >= shown) continue;
            const auto [lo, hi] = range.at(f);
            const double v = pts.number(r, iv);
            sp.push_back({pts.number(r, ip), static_cast<double>(shown - 1 - pos),
                          hi > lo ? std::optional<double>((v - lo) / (hi - lo)) : std::nullopt, f});
        }
        put("shap_summary.svg", svg_scatter({"SHAP values by feature", "SHAP value (t/ha)", "", false, false, ticks}, sp));
    }
    {
        const auto dep = load_table(run_dir / "explain" / "shap_dependence.csv");
        const auto iv = dep.header.require("feature_value"), ip = dep.header.require("phi"),
                   ic = dep.header.require("color_value");
        std::string feature = "feature", color = "color";
        {
            const std::string text = read_file(run_dir / "explain" / "shap_dependence.csv");
            const auto f = text.find("feature="), c = text.find(" color=");
            if (text.rfind("# ", 0) == 0 && f != std::string::npos && c != std::string::npos) {
                feature = text.substr(f + 8, c - f - 8);
                color = text.substr(c + 7, text.find('\n') - c - 7);
            }
        }
        double lo = 0, hi = 0;
        for (std::size_t i = 0; i < dep.rows.size(); ++i) {
            const double c = dep.number(dep.rows[i], ic);
            lo = i ? std::min(lo, c) : c;
            hi = i ? std::max(hi, c) : c;
        }
        std::vector<PlotPoint> dp;
        for (const auto& r : dep.rows) {
            const double c = dep.number(r, ic);
            dp.push_back({dep.number(r, iv), dep.number(r, ip), hi > lo ? std::optional<double>((c - lo) / (hi - lo)) : std::nullopt, ""});
        }
        put("shap_dependence.svg",
            svg_scatter({"SHAP dependence: " + feature + " (color: " + color + ")", feature, "SHAP value for " + feature, false,
                         true, {}},
                        dp));
    }
    return written;
}

} // namespace yieldcast::pipeline
