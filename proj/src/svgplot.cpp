#include "fluxtrace/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fluxtrace/errors.hpp"

namespace fluxtrace::plot {

namespace {

constexpr double kWidth = 640.0, kHeight = 420.0;
constexpr double kMarginL = 70.0, kMarginR = 20.0, kMarginT = 36.0, kMarginB = 52.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

// Round tick spacing to 1/2/5 decades.
std::vector<double> nice_ticks(double lo, double hi, int target) {
    std::vector<double> ticks;
    if (!(hi > lo)) {
        ticks.push_back(lo);
        return ticks;
    }
    double raw = (hi - lo) / target;
    double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double norm = raw / mag;
    double step = (norm < 1.5) ? 1.0 : (norm < 3.5) ? 2.0 : (norm < 7.5) ? 5.0 : 10.0;
    step *= mag;
    double first = std::ceil(lo / step) * step;
    for (double t = first; t <= hi + 0.5 * step; t += step) {
        double v = (std::abs(t) < 1e-12 * step) ? 0.0 : t;
        ticks.push_back(v);
    }
    return ticks;
}

struct Defaults {
    const char* title;
    const char* x;
    const char* y;
};

Defaults kind_defaults(PlotKind kind) {
    switch (kind) {
        case PlotKind::Calibration:
            return {"Flux-to-phase calibration", "flux (Phi0)", "reflection angle (deg)"};
        case PlotKind::Gain:
            return {"Transducer gain", "flux (Phi0)", "gain (deg/Phi0)"};
        case PlotKind::Sensitivity:
            return {"Flux sensitivity", "flux (Phi0)", "sensitivity (Phi0)"};
        case PlotKind::Step:
            return {"Step response", "time (ns)", "normalized response"};
        case PlotKind::ThetaScan:
            return {"Reflection spread scan", "time after edge (ns)", "spread (deg)"};
    }
    return {"", "", ""};
}

} // namespace

PlotKind plot_kind_from_string(const std::string& name) {
    if (name == "calibration") return PlotKind::Calibration;
    if (name == "gain") return PlotKind::Gain;
    if (name == "sensitivity") return PlotKind::Sensitivity;
    if (name == "step") return PlotKind::Step;
    if (name == "theta_scan" || name == "theta-scan") return PlotKind::ThetaScan;
    throw ConfigError("unknown plot kind '" + name + "'");
}

void emit_plot(const std::vector<Series>& series, PlotKind kind,
               const std::string& path, PlotOptions options) {
    if (series.empty()) throw DataError("plot needs at least one series");
    std::size_t max_series = (kind == PlotKind::ThetaScan) ? 64 : 8;
    if (series.size() > max_series)
        throw DataError("too many series for this plot kind");
    for (const auto& s : series) {
        if (s.x.empty() || s.x.size() != s.y.size())
            throw DataError("plot series '" + s.label + "' is empty or ragged");
        for (double v : s.x)
            if (!std::isfinite(v)) throw DataError("plot series has non-finite x");
    }

    Defaults d = kind_defaults(kind);
    if (options.title.empty()) options.title = d.title;
    if (options.x_label.empty()) options.x_label = d.x;
    if (options.y_label.empty()) options.y_label = d.y;

    double xmin = series[0].x[0], xmax = xmin;
    double ymin = 0.0, ymax = 0.0;
    bool first_y = true;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            double y = s.y[i];
            if (options.log_y && !(y > 0.0)) continue;
            double yv = options.log_y ? std::log10(y) : y;
            if (!std::isfinite(yv)) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            if (first_y) {
                ymin = ymax = yv;
                first_y = false;
            } else {
                ymin = std::min(ymin, yv);
                ymax = std::max(ymax, yv);
            }
        }
    }
    if (first_y) throw DataError("plot has no drawable points");
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) ymax = ymin + 1.0;
    double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    double pw = kWidth - kMarginL - kMarginR;
    double ph = kHeight - kMarginT - kMarginB;
    auto map_x = [&](double v) { return kMarginL + (v - xmin) / (xmax - xmin) * pw; };
    auto map_y = [&](double v) {
        double t = options.log_y ? std::log10(v) : v;
        return kMarginT + (1.0 - (t - ymin) / (ymax - ymin)) * ph;
    };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
        << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
        << kHeight << "\">\n";
    svg << "<rect width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" fill=\"white\"/>\n";
    svg << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"15\">" << xml_escape(options.title)
        << "</text>\n";

    // Frame and ticks
    svg << "<g stroke=\"#cccccc\" stroke-width=\"1\">\n";
    auto xticks = nice_ticks(xmin, xmax, 6);
    for (double t : xticks) {
        double sx = map_x(t);
        svg << "<line x1=\"" << fmt(sx) << "\" y1=\"" << fmt(kMarginT) << "\" x2=\""
            << fmt(sx) << "\" y2=\"" << fmt(kMarginT + ph) << "\"/>\n";
    }
    auto yticks = nice_ticks(ymin, ymax, 6);
    for (double t : yticks) {
        double sy = kMarginT + (1.0 - (t - ymin) / (ymax - ymin)) * ph;
        svg << "<line x1=\"" << fmt(kMarginL) << "\" y1=\"" << fmt(sy) << "\" x2=\""
            << fmt(kMarginL + pw) << "\" y2=\"" << fmt(sy) << "\"/>\n";
    }
    svg << "</g>\n";
    svg << "<rect x=\"" << kMarginL << "\" y=\"" << kMarginT << "\" width=\"" << pw
        << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"black\"/>\n";

    svg << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"black\">\n";
    for (double t : xticks) {
        svg << "<text x=\"" << fmt(map_x(t)) << "\" y=\"" << fmt(kMarginT + ph + 16)
            << "\" text-anchor=\"middle\">" << fmt(t) << "</text>\n";
    }
    for (double t : yticks) {
        double sy = kMarginT + (1.0 - (t - ymin) / (ymax - ymin)) * ph;
        std::string lbl = options.log_y ? ("1e" + fmt(t)) : fmt(t);
        svg << "<text x=\"" << fmt(kMarginL - 6) << "\" y=\"" << fmt(sy + 4)
            << "\" text-anchor=\"end\">" << lbl << "</text>\n";
    }
    svg << "</g>\n";
    svg << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
        << xml_escape(options.x_label) << "</text>\n";
    svg << "<text x=\"18\" y=\"" << kMarginT + ph / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
        << "transform=\"rotate(-90 18 " << kMarginT + ph / 2 << ")\">"
        << xml_escape(options.y_label) << "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kPalette[si % (sizeof kPalette / sizeof kPalette[0])];
        svg << "<polyline fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"1.5\" points=\"";
        bool started = false;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            double y = s.y[i];
            if (options.log_y && !(y > 0.0)) continue;
            if (!std::isfinite(y)) continue;
            if (started) svg << " ";
            svg << fmt(map_x(s.x[i])) << "," << fmt(map_y(y));
            started = true;
        }
        svg << "\"/>\n";
    }

    // Legend: only labeled series, top-right corner of the frame.
    double ly = kMarginT + 16;
    for (std::size_t si = 0; si < series.size(); ++si) {
        if (series[si].label.empty()) continue;
        const char* color = kPalette[si % (sizeof kPalette / sizeof kPalette[0])];
        double lx = kMarginL + pw - 150;
        svg << "<line x1=\"" << fmt(lx) << "\" y1=\"" << fmt(ly - 4) << "\" x2=\""
            << fmt(lx + 22) << "\" y2=\"" << fmt(ly - 4) << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << fmt(lx + 28) << "\" y=\"" << fmt(ly)
            << "\" font-family=\"sans-serif\" font-size=\"11\">"
            << xml_escape(series[si].label) << "</text>\n";
        ly += 16;
    }
    svg << "</svg>\n";

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << svg.str();
    if (!out) throw DataError("write failed for " + path);
}

} // namespace fluxtrace::plot
