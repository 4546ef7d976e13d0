#include "fluxtrace/config.hpp"

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fluxtrace/errors.hpp"

namespace fluxtrace::config {

namespace {

std::string strip(std::string s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.erase(s.begin());
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.pop_back();
    return s;
}

double parse_double_or_throw(const std::string& key, const std::string& raw) {
    char* end = nullptr;
    double v = std::strtod(raw.c_str(), &end);
    if (end == raw.c_str() || (end && *end != '\0'))
        throw ConfigError("config key '" + key + "' has non-numeric value '" + raw + "'");
    return v;
}

} // namespace

Config Config::load(const std::string& path) {
    namespace fs = std::filesystem;
    fs::path p = path;
    if (!fs::exists(p)) {
        const char* dir = std::getenv("FLUXTRACE_CONFIG_DIR");
        if (dir) {
            fs::path alt = fs::path(dir) / path;
            if (fs::exists(alt)) p = alt;
        }
    }
    std::ifstream in(p);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

Config Config::parse(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = strip(line);
        if (line.empty()) continue;
        auto sep = line.find('=');
        if (sep == std::string::npos) sep = line.find(':');
        if (sep == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) +
                              " is not 'key = value'");
        std::string key = strip(line.substr(0, sep));
        std::string val = strip(line.substr(sep + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(line_no) + " has no key");
        cfg.values_[key] = val;
    }
    return cfg;
}

double Config::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return parse_double_or_throw(key, it->second);
}

long Config::get_int(const std::string& key, long fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    double v = parse_double_or_throw(key, it->second);
    return static_cast<long>(v);
}

std::string Config::get_string(const std::string& key,
                               const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

circuit::CircuitParams circuit_from(const Config& cfg) {
    circuit::CircuitParams p;
    if (cfg.has("circuit.ic_per_junction_ua") && cfg.has("circuit.ic_total_ua"))
        throw ConfigError("give circuit.ic_total_ua or circuit.ic_per_junction_ua, not both");
    if (cfg.has("circuit.ic_per_junction_ua"))
        p.ic_total = 2.0 * cfg.get_double("circuit.ic_per_junction_ua", 2.0) * 1e-6;
    else
        p.ic_total = cfg.get_double("circuit.ic_total_ua", 4.0) * 1e-6;
    p.c_shunt = cfg.get_double("circuit.c_shunt_pf", 4.0) * 1e-12;
    p.z0 = cfg.get_double("circuit.z0_ohm", 15.0);
    p.probe_freq = cfg.get_double("circuit.probe_ghz", 6.4) * 1e9;
    p.flux_clamp = cfg.get_double("circuit.flux_clamp", 0.38);
    p.validate();
    return p;
}

waveforms::WaveformConfig waveform_from(const Config& cfg) {
    waveforms::WaveformConfig w;
    w.awg_rate = cfg.get_double("awg.rate_gsps", 1.0) * 1e9;
    w.lpf_cutoff = cfg.get_double("awg.lpf_mhz", 220.0) * 1e6;
    w.mutual_inductance = cfg.get_double("awg.mutual_ph", 0.0) * 1e-12;
    w.full_scale_flux = cfg.get_double("awg.full_scale_flux", 1.75);
    w.validate();
    return w;
}

signalchain::NoiseConfig noise_from(const Config& cfg) {
    signalchain::NoiseConfig n;
    n.jitter_pkpk = cfg.get_double("noise.jitter_ps", 20.0) * 1e-12;
    n.additive_noise_rms = cfg.get_double("noise.additive_rms", 0.0);
    n.extra_phase_noise_deg = cfg.get_double("noise.extra_phase_deg", 0.0);
    n.n_averages = static_cast<std::size_t>(cfg.get_int("noise.n_averages", 1));
    n.master_seed = static_cast<uint64_t>(cfg.get_int("noise.seed", 1));
    n.validate();
    return n;
}

std::optional<signalchain::ReflectionScenario> reflection_from(const Config& cfg) {
    if (!cfg.has("reflection.amp_db")) return std::nullopt;
    signalchain::ReflectionScenario r;
    r.amplitude_db = cfg.get_double("reflection.amp_db", -30.0);
    r.one_way_delay_ns = cfg.get_double("reflection.delay_ns", 1.5);
    r.reflection_phase_deg = cfg.get_double("reflection.phase_deg", 47.0);
    r.chain_delay_ns = cfg.get_double("reflection.chain_ns", 10.0);
    r.validate();
    return r;
}

signalchain::ScopeModel scope_from(const Config& cfg) {
    signalchain::ScopeModel s;
    s.dc_settle_amp = cfg.get_double("scope.dc_settle_amp", 2e-3);
    s.dc_settle_tau_ns = cfg.get_double("scope.dc_settle_tau_us", 30.0) * 1e3;
    s.output_rate = cfg.get_double("scope.rate_msps", 1000.0) * 1e6;
    return s;
}

} // namespace fluxtrace::config
