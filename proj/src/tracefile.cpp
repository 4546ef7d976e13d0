#include "fluxtrace/tracefile.hpp"

#include <zlib.h>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fluxtrace/errors.hpp"

namespace fluxtrace::io {

namespace {

constexpr const char* kMagic = "# fluxtrace trace v1";

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string read_whole_file(const std::string& path) {
    if (ends_with(path, ".gz")) {
        gzFile gz = gzopen(path.c_str(), "rb");
        if (!gz) throw DataError("cannot open " + path);
        std::string out;
        char buf[1 << 16];
        int got;
        while ((got = gzread(gz, buf, sizeof buf)) > 0) out.append(buf, got);
        bool bad = got < 0;
        gzclose(gz);
        if (bad) throw DataError("gzip decompression failed for " + path);
        return out;
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_whole_file(const std::string& path, const std::string& content) {
    if (ends_with(path, ".gz")) {
        gzFile gz = gzopen(path.c_str(), "wb9");
        if (!gz) throw DataError("cannot open " + path + " for writing");
        int wrote = gzwrite(gz, content.data(), static_cast<unsigned>(content.size()));
        gzclose(gz);
        if (wrote != static_cast<int>(content.size()))
            throw DataError("gzip write failed for " + path);
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << content;
    if (!out) throw DataError("write failed for " + path);
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& s, std::size_t line_no) {
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || (end && *end != '\0'))
        throw DataError("line " + std::to_string(line_no) + ": bad number '" + s + "'");
    return v;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace

int TraceTable::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name) return static_cast<int>(i);
    return -1;
}

TraceTable load_trace(const std::string& path) {
    std::string content = read_whole_file(path);
    std::istringstream in(content);

    TraceTable t;
    bool have_rate = false, have_columns = false, have_magic = false;
    std::string line;
    std::size_t line_no = 0;
    std::size_t row = 0;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line == kMagic) {
                have_magic = true;
                continue;
            }
            auto colon = line.find(':');
            if (colon == std::string::npos) continue;
            std::string key = line.substr(1, colon - 1);
            std::string val = line.substr(colon + 1);
            auto strip = [](std::string& s) {
                while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
                    s.erase(s.begin());
                while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
                    s.pop_back();
            };
            strip(key);
            strip(val);
            if (key == "sample_rate_hz") {
                t.sample_rate = parse_double(val, line_no);
                have_rate = true;
            } else if (key == "t0_ns") {
                t.t0_ns = parse_double(val, line_no);
            } else if (key == "probe_freq_hz") {
                t.probe_freq = parse_double(val, line_no);
            } else if (key == "seed") {
                t.seed = static_cast<uint64_t>(std::strtoull(val.c_str(), nullptr, 10));
            } else if (key == "scenario") {
                t.scenario = val;
            } else if (key == "columns") {
                auto names = split_csv(val);
                if (names.empty() || names.front() != "time_ns")
                    throw DataError("line " + std::to_string(line_no) +
                                    ": first column must be time_ns");
                t.columns.assign(names.begin() + 1, names.end());
                if (t.columns.empty())
                    throw DataError("line " + std::to_string(line_no) +
                                    ": need at least one value column");
                t.data.assign(t.columns.size(), {});
                have_columns = true;
            }
            continue;
        }

        if (!have_magic) throw DataError("not a trace file (missing signature line)");
        if (!have_rate) throw DataError("header is missing sample_rate_hz");
        if (!have_columns) throw DataError("header is missing the columns line");

        auto fields = split_csv(line);
        if (fields.size() != t.columns.size() + 1)
            throw DataError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(t.columns.size() + 1) + " columns, found " +
                            std::to_string(fields.size()));
        double time_ns = parse_double(fields[0], line_no);
        if (!std::isfinite(time_ns))
            throw DataError("line " + std::to_string(line_no) + ": non-finite time");

        double dt = 1e9 / t.sample_rate;
        double expected = (row == 0) ? time_ns : t.t0_ns + row * dt;
        if (row == 0) {
            t.t0_ns = time_ns;
        } else {
            if (time_ns <= t.t0_ns + (row - 1) * dt - 0.5 * dt)
                throw DataError("line " + std::to_string(line_no) +
                                ": time is not strictly increasing");
            double tol = 1e-9 * std::max(std::abs(expected), dt);
            if (std::abs(time_ns - expected) > tol)
                throw DataError("line " + std::to_string(line_no) +
                                ": timestamp inconsistent with declared sample rate");
        }
        for (std::size_t c = 0; c < t.columns.size(); ++c) {
            double v = parse_double(fields[c + 1], line_no);
            if (std::isnan(v))
                throw DataError("line " + std::to_string(line_no) + ": NaN value");
            t.data[c].push_back(v);
        }
        ++row;
    }

    if (!have_magic) throw DataError("not a trace file (missing signature line)");
    if (!have_rate) throw DataError("header is missing sample_rate_hz");
    if (!have_columns) throw DataError("header is missing the columns line");
    if (t.rows() < 2) throw DataError("trace has fewer than 2 rows");
    return t;
}

void save_trace(const TraceTable& table, const std::string& path) {
    if (table.columns.empty() || table.columns.size() != table.data.size())
        throw DataError("table columns and data are inconsistent");
    if (!(table.sample_rate > 0.0)) throw ConfigError("sample_rate must be > 0");
    std::size_t rows = table.rows();
    for (const auto& col : table.data)
        if (col.size() != rows) throw DataError("ragged table data");

    std::ostringstream out;
    out << kMagic << "\n";
    out << "# sample_rate_hz: " << fmt17(table.sample_rate) << "\n";
    out << "# t0_ns: " << fmt17(table.t0_ns) << "\n";
    if (table.probe_freq) out << "# probe_freq_hz: " << fmt17(*table.probe_freq) << "\n";
    if (table.seed) out << "# seed: " << *table.seed << "\n";
    if (!table.scenario.empty()) out << "# scenario: " << table.scenario << "\n";
    out << "# columns: time_ns";
    for (const auto& c : table.columns) out << "," << c;
    out << "\n";

    double dt = 1e9 / table.sample_rate;
    for (std::size_t i = 0; i < rows; ++i) {
        out << fmt17(table.t0_ns + i * dt);
        for (const auto& col : table.data) out << "," << fmt17(col[i]);
        out << "\n";
    }
    write_whole_file(path, out.str());
}

waveforms::FluxWaveform to_flux_waveform(const TraceTable& table) {
    int idx = table.column_index("flux_phi0");
    if (idx < 0) throw DataError("trace has no flux_phi0 column");
    waveforms::FluxWaveform wf;
    wf.sample_rate = table.sample_rate;
    wf.t0_ns = table.t0_ns;
    wf.samples = table.data[idx];
    wf.validate();
    return wf;
}

signalchain::PhaseTrace to_phase_trace(const TraceTable& table) {
    int idx = table.column_index("phase_deg");
    if (idx < 0) throw DataError("trace has no phase_deg column");
    signalchain::PhaseTrace tr;
    tr.sample_rate = table.sample_rate;
    tr.t0_ns = table.t0_ns;
    tr.phase_deg = table.data[idx];
    int fidx = table.column_index("flux_phi0");
    if (fidx >= 0) tr.flux = table.data[fidx];
    tr.validate();
    return tr;
}

signalchain::RFTrace to_rf_trace(const TraceTable& table) {
    int si = table.column_index("signal_v");
    int ri = table.column_index("reference_v");
    if (si < 0 || ri < 0)
        throw DataError("trace needs signal_v and reference_v columns");
    signalchain::RFTrace tr;
    tr.sample_rate = table.sample_rate;
    tr.t0_ns = table.t0_ns;
    if (!table.probe_freq)
        throw DataError("RF trace header is missing probe_freq_hz");
    tr.probe_freq = *table.probe_freq;
    tr.signal = table.data[si];
    tr.reference = table.data[ri];
    tr.validate();
    return tr;
}

TraceTable from_flux_waveform(const waveforms::FluxWaveform& wf) {
    wf.validate();
    TraceTable t;
    t.sample_rate = wf.sample_rate;
    t.t0_ns = wf.t0_ns;
    t.columns = {"flux_phi0"};
    t.data = {wf.samples};
    return t;
}

TraceTable from_phase_trace(const signalchain::PhaseTrace& trace) {
    trace.validate();
    TraceTable t;
    t.sample_rate = trace.sample_rate;
    t.t0_ns = trace.t0_ns;
    t.columns = {"phase_deg"};
    t.data = {trace.phase_deg};
    if (trace.flux) {
        t.columns.push_back("flux_phi0");
        t.data.push_back(*trace.flux);
    }
    return t;
}

TraceTable from_rf_trace(const signalchain::RFTrace& trace) {
    trace.validate();
    TraceTable t;
    t.sample_rate = trace.sample_rate;
    t.t0_ns = trace.t0_ns;
    t.probe_freq = trace.probe_freq;
    t.columns = {"signal_v", "reference_v"};
    t.data = {trace.signal, trace.reference};
    return t;
}

} // namespace fluxtrace::io
