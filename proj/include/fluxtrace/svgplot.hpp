#pragma once

#include <string>
#include <vector>

namespace fluxtrace::plot {

enum class PlotKind { Calibration, Gain, Sensitivity, Step, ThetaScan };

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotOptions {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_y = false;
};

/// Render line series to an SVG file. Output is a pure function of the
/// input (fixed size, stable element order, no timestamps), so identical
/// data produces byte-identical files. Axis labels default to the units
/// conventional for the plot kind. Throws DataError when the data shape
/// does not match the kind (wrong series count, empty or ragged series).
void emit_plot(const std::vector<Series>& series, PlotKind kind,
               const std::string& path, PlotOptions options = {});

PlotKind plot_kind_from_string(const std::string& name);

} // namespace fluxtrace::plot
