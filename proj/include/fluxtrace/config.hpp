#pragma once

#include <map>
#include <optional>
#include <string>

#include "fluxtrace/circuit.hpp"
#include "fluxtrace/signalchain.hpp"
#include "fluxtrace/waveforms.hpp"

namespace fluxtrace::config {

/// Flat `key = value` configuration (# starts a comment). Keys are
/// dotted, e.g. circuit.probe_ghz. CLI flags overwrite entries before
/// the typed structures are built, so flags take precedence over the
/// file.
class Config {
public:
    Config() = default;

    /// Parse from a file. If `path` names no file, it is resolved
    /// against the directory in the FLUXTRACE_CONFIG_DIR environment
    /// variable. Throws ConfigError when nothing resolves.
    static Config load(const std::string& path);

    static Config parse(const std::string& text);

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) > 0; }

    [[nodiscard]] double get_double(const std::string& key, double fallback) const;
    [[nodiscard]] long get_int(const std::string& key, long fallback) const;
    [[nodiscard]] std::string get_string(const std::string& key,
                                         const std::string& fallback) const;

private:
    std::map<std::string, std::string> values_;
};

/// Build the domain structures from a config, validating every field and
/// naming the offending key on failure.
circuit::CircuitParams circuit_from(const Config& cfg);
waveforms::WaveformConfig waveform_from(const Config& cfg);
signalchain::NoiseConfig noise_from(const Config& cfg);
std::optional<signalchain::ReflectionScenario> reflection_from(const Config& cfg);
signalchain::ScopeModel scope_from(const Config& cfg);

} // namespace fluxtrace::config
