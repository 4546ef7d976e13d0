#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fluxtrace/signalchain.hpp"
#include "fluxtrace/waveforms.hpp"

namespace fluxtrace::io {

/// In-memory form of a trace file: a units-bearing header and uniformly
/// timed numeric columns. The first column is always time_ns. Values
/// round-trip bit-exactly through the decimal text (17 significant
/// digits). Files ending in .gz are read and written gzip-compressed.
struct TraceTable {
    double sample_rate = 0.0; ///< declared samples/s, checked against timestamps
    double t0_ns = 0.0;
    std::optional<double> probe_freq;   ///< carried for RF traces
    std::optional<uint64_t> seed;
    std::string scenario;               ///< optional scenario id
    std::vector<std::string> columns;   ///< names with units, excluding time_ns
    std::vector<std::vector<double>> data; ///< one vector per named column

    [[nodiscard]] std::size_t rows() const {
        return data.empty() ? 0 : data.front().size();
    }
    [[nodiscard]] int column_index(const std::string& name) const;
};

/// Parse a trace file. Throws DataError (with a line number where it
/// applies) for malformed headers, ragged rows, non-monotone time, NaN
/// values, or timestamps inconsistent with the declared rate.
TraceTable load_trace(const std::string& path);

void save_trace(const TraceTable& table, const std::string& path);

/// Typed wrappers over the generic table.
waveforms::FluxWaveform to_flux_waveform(const TraceTable& table);
signalchain::PhaseTrace to_phase_trace(const TraceTable& table);
signalchain::RFTrace to_rf_trace(const TraceTable& table);

TraceTable from_flux_waveform(const waveforms::FluxWaveform& wf);
TraceTable from_phase_trace(const signalchain::PhaseTrace& trace);
TraceTable from_rf_trace(const signalchain::RFTrace& trace);

} // namespace fluxtrace::io
