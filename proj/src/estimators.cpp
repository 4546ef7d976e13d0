#include "fluxtrace/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fluxtrace/errors.hpp"
#include "fluxtrace/levmar.hpp"

namespace fluxtrace::estimators {

namespace {

// Scale factors that put the circuit parameters at O(1)-O(10) for the
// optimizer: amps in uA, farads in pF.
constexpr double kMicro = 1e-6;
constexpr double kPico = 1e-12;

std::size_t detect_edge_index(const std::vector<double>& v) {
    std::size_t imax = 0;
    double dmax = -1.0;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
        double d = std::abs(v[i + 1] - v[i]);
        if (d > dmax) {
            dmax = d;
            imax = i;
        }
    }
    return imax + 1; // first sample on the new level
}

// Linear least squares for the settling amplitudes given fixed taus.
std::vector<double> amplitudes_by_lls(const std::vector<double>& t,
                                      const std::vector<double>& a,
                                      const std::vector<double>& taus) {
    std::size_t n = taus.size();
    std::vector<double> ata(n * n, 0.0), atb(n, 0.0);
    for (std::size_t k = 0; k < t.size(); ++k) {
        double rhs = 1.0 - a[k];
        for (std::size_t i = 0; i < n; ++i) {
            double bi = std::exp(-t[k] / taus[i]);
            atb[i] += bi * rhs;
            for (std::size_t j = 0; j <= i; ++j)
                ata[i * n + j] += bi * std::exp(-t[k] / taus[j]);
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) ata[i * n + j] = ata[j * n + i];
    // Tiny ridge keeps near-collinear exponentials solvable.
    for (std::size_t i = 0; i < n; ++i) ata[i * n + i] += 1e-12;

    // Gaussian elimination with partial pivoting (n <= 3).
    std::vector<double> x = atb;
    std::vector<double> m = ata;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(m[r * n + col]) > std::abs(m[piv * n + col])) piv = r;
        for (std::size_t c = 0; c < n; ++c) std::swap(m[col * n + c], m[piv * n + c]);
        std::swap(x[col], x[piv]);
        double d = m[col * n + col];
        if (std::abs(d) < 1e-300) continue;
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            double f = m[r * n + col] / d;
            for (std::size_t c = col; c < n; ++c) m[r * n + c] -= f * m[col * n + c];
            x[r] -= f * x[col];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        double d = m[i * n + i];
        x[i] = (std::abs(d) > 1e-300) ? x[i] / d : 0.0;
        x[i] = std::clamp(x[i], -0.9, 0.9);
    }
    return x;
}

} // namespace

CalibrationFit fit_calibration(const std::vector<double>& flux_pts,
                               const std::vector<double>& phase_pts_deg,
                               double probe_freq,
                               const circuit::CircuitParams& init,
                               const CalibrationFitOptions& opts) {
    if (flux_pts.size() != phase_pts_deg.size())
        throw DataError("flux and phase arrays must have equal length");
    init.validate();

    std::vector<double> flux, phase;
    std::size_t excluded = 0;
    for (std::size_t i = 0; i < flux_pts.size(); ++i) {
        if (std::abs(flux_pts[i]) > opts.exclude_above) {
            ++excluded;
            continue;
        }
        flux.push_back(flux_pts[i]);
        phase.push_back(phase_pts_deg[i]);
    }
    if (flux.size() < 8)
        throw DataError("calibration fit needs at least 8 points inside the exclusion window");
    auto [mn, mx] = std::minmax_element(flux.begin(), flux.end());
    if (*mx - *mn < 0.25)
        throw DataError("calibration data must span at least 0.25 Phi0");

    circuit::CircuitParams base = init;
    base.probe_freq = probe_freq;

    const bool with_z0 = opts.fit_z0;
    auto unpack = [&](const std::vector<double>& p) {
        circuit::CircuitParams c = base;
        c.ic_total = p[0] * kMicro;
        c.c_shunt = p[1] * kPico;
        if (with_z0) c.z0 = p[2];
        return c;
    };
    std::size_t offset_idx = with_z0 ? 3 : 2;

    auto residuals = [&](const std::vector<double>& p, std::vector<double>& out) {
        circuit::CircuitParams c = unpack(p);
        double off = p[offset_idx];
        for (std::size_t i = 0; i < flux.size(); ++i) {
            double model = circuit::reflection_angle(flux[i], c) + off;
            out[i] = wrap_deg(model - phase[i]);
        }
    };

    std::vector<double> p0 = {init.ic_total / kMicro, init.c_shunt / kPico};
    std::vector<double> lo = {0.2 * p0[0], 0.2 * p0[1]};
    std::vector<double> hi = {5.0 * p0[0], 5.0 * p0[1]};
    if (with_z0) {
        p0.push_back(init.z0);
        lo.push_back(0.2 * init.z0);
        hi.push_back(5.0 * init.z0);
    }
    p0.push_back(0.0);
    lo.push_back(-360.0);
    hi.push_back(360.0);

    levmar::Options lmo;
    lmo.max_iterations = opts.max_iterations;
    auto res = levmar::fit(residuals, flux.size(), p0, lo, hi, lmo);
    if (!res.converged)
        throw ConvergenceError("calibration fit did not converge within " +
                               std::to_string(opts.max_iterations) + " iterations");

    CalibrationFit fit;
    fit.params = unpack(res.params);
    fit.params.validate();
    fit.offset_deg = res.params[offset_idx];
    fit.residual_rms_deg = std::sqrt(2.0 * res.cost / static_cast<double>(flux.size()));
    fit.exclude_above = opts.exclude_above;
    fit.n_used = flux.size();
    fit.n_excluded = excluded;
    return fit;
}

double invert_calibration(double phase_deg, const CalibrationFit& fit) {
    return circuit::invert_reflection_angle(phase_deg - fit.offset_deg, fit.params);
}

SettlingFit fit_settling(const std::vector<double>& samples, double sample_rate,
                         double t0_ns, double edge_time_ns, int n_terms) {
    if (n_terms < 1 || n_terms > 3)
        throw ConfigError("settling fit supports 1 to 3 terms");
    if (!(sample_rate > 0.0)) throw ConfigError("sample_rate must be > 0");
    if (samples.size() < 24) throw DataError("settling fit needs a longer record");

    double dt = 1e9 / sample_rate;

    // Normalization: pre-edge mean vs the mean of the last tenth.
    double baseline = 0.0;
    std::size_t n_pre = 0;
    std::vector<double> t_fit, a_fit;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double t = t0_ns + i * dt;
        if (t < edge_time_ns) {
            baseline += samples[i];
            ++n_pre;
        }
    }
    if (n_pre == 0) throw DataError("no samples before the edge to set a baseline");
    baseline /= static_cast<double>(n_pre);

    std::size_t tail = std::max<std::size_t>(samples.size() / 10, 4);
    double final_level = 0.0;
    for (std::size_t i = samples.size() - tail; i < samples.size(); ++i)
        final_level += samples[i];
    final_level /= static_cast<double>(tail);

    double step = final_level - baseline;
    if (std::abs(step) < 1e-12)
        throw DataError("normalized step amplitude is zero");

    for (std::size_t i = 0; i < samples.size(); ++i) {
        double t = t0_ns + i * dt;
        if (t < edge_time_ns) continue;
        t_fit.push_back(t - edge_time_ns);
        a_fit.push_back((samples[i] - baseline) / step);
    }
    if (t_fit.size() < 16) throw DataError("too few post-edge samples to fit");

    double record_ns = t_fit.back();
    double tau_lo = 0.3, tau_hi = std::max(record_ns / 3.0, 1.0);

    std::vector<double> taus(n_terms);
    for (int i = 0; i < n_terms; ++i) {
        double f = (n_terms == 1) ? 0.5
                                  : static_cast<double>(i) / (n_terms - 1);
        taus[i] = tau_lo * std::pow(tau_hi / tau_lo, f);
    }
    std::vector<double> alphas = amplitudes_by_lls(t_fit, a_fit, taus);

    // Parameters: log-tau keeps the constants positive and conditions the
    // search across decades.
    std::vector<double> p0, lo, hi;
    for (int i = 0; i < n_terms; ++i) {
        p0.push_back(std::log(taus[i]));
        lo.push_back(std::log(0.01));
        hi.push_back(std::log(10.0 * record_ns));
    }
    for (int i = 0; i < n_terms; ++i) {
        p0.push_back(alphas[i]);
        lo.push_back(-0.95);
        hi.push_back(0.95);
    }

    auto residuals = [&](const std::vector<double>& p, std::vector<double>& out) {
        for (std::size_t k = 0; k < t_fit.size(); ++k) {
            double model = 1.0;
            for (int i = 0; i < n_terms; ++i)
                model -= p[n_terms + i] * std::exp(-t_fit[k] / std::exp(p[i]));
            out[k] = model - a_fit[k];
        }
    };

    levmar::Options lmo;
    lmo.max_iterations = 400;
    // Near-zero amplitudes leave the matching tau unidentifiable, so the
    // stop criterion is the cost plateau rather than a parameter one.
    lmo.cost_tol = 1e-9;
    lmo.step_tol = 1e-9;
    auto res = levmar::fit(residuals, t_fit.size(), p0, lo, hi, lmo);
    if (!res.converged)
        throw ConvergenceError("settling fit did not converge");

    std::vector<waveforms::SettlingTerm> terms(n_terms);
    for (int i = 0; i < n_terms; ++i)
        terms[i] = {res.params[n_terms + i], std::exp(res.params[i])};

    SettlingFit fit;
    fit.model = waveforms::ExpSettlingModel(std::move(terms));
    fit.step_amplitude = step;
    fit.residual_rms = std::sqrt(2.0 * res.cost / static_cast<double>(t_fit.size()));
    fit.n_terms = n_terms;
    for (std::size_t i = 1; i < fit.model.terms.size(); ++i) {
        double ratio = fit.model.terms[i].tau_ns / fit.model.terms[i - 1].tau_ns;
        if (ratio < 1.5) fit.degenerate = true;
    }
    return fit;
}

SettlingFit fit_settling(const waveforms::FluxWaveform& wf, double edge_time_ns,
                         int n_terms) {
    wf.validate();
    return fit_settling(wf.samples, wf.sample_rate, wf.t0_ns, edge_time_ns, n_terms);
}

SettlingFit fit_settling(const signalchain::PhaseTrace& trace, double edge_time_ns,
                         int n_terms) {
    trace.validate();
    return fit_settling(trace.phase_deg, trace.sample_rate, trace.t0_ns,
                        edge_time_ns, n_terms);
}

SettlingFit select_model_order(const std::vector<double>& samples,
                               double sample_rate, double t0_ns,
                               double edge_time_ns) {
    SettlingFit fits[3] = {
        fit_settling(samples, sample_rate, t0_ns, edge_time_ns, 1),
        fit_settling(samples, sample_rate, t0_ns, edge_time_ns, 2),
        fit_settling(samples, sample_rate, t0_ns, edge_time_ns, 3),
    };
    double ref = fits[2].residual_rms;
    for (const auto& f : fits)
        if (!f.degenerate && f.residual_rms <= 1.1 * ref) return f;
    // All candidates within tolerance are degenerate: fall back to the
    // best-fitting model with separated time constants.
    const SettlingFit* best = nullptr;
    for (const auto& f : fits)
        if (!f.degenerate && (!best || f.residual_rms < best->residual_rms)) best = &f;
    if (!best)
        throw ConvergenceError("no non-degenerate settling model order found");
    return *best;
}

SettlingFit select_model_order(const signalchain::PhaseTrace& trace,
                               double edge_time_ns) {
    trace.validate();
    return select_model_order(trace.phase_deg, trace.sample_rate, trace.t0_ns,
                              edge_time_ns);
}

PackageReport classify_package(const signalchain::PhaseTrace& trace,
                               const ClassifyOptions& opts) {
    trace.validate();
    const auto& v = trace.phase_deg;
    if (v.size() < 32) throw DataError("record too short to classify");

    double dt_us = trace.dt_ns() * 1e-3;
    std::size_t edge = detect_edge_index(v);
    double post_us = (static_cast<double>(v.size() - edge) - 1.0) * dt_us;
    if (post_us < opts.horizon_us)
        throw DataError("record spans " + std::to_string(post_us) +
                        " us after the edge; " + std::to_string(opts.horizon_us) +
                        " us required");

    double baseline = 0.0;
    for (std::size_t i = 0; i < edge; ++i) baseline += v[i];
    baseline /= static_cast<double>(std::max<std::size_t>(edge, 1));

    std::size_t tail = std::max<std::size_t>(v.size() / 10, 4);
    double final_level = 0.0;
    for (std::size_t i = v.size() - tail; i < v.size(); ++i) final_level += v[i];
    final_level /= static_cast<double>(tail);

    double step = final_level - baseline;
    if (std::abs(step) < 1e-12) throw DataError("no step found to classify");

    // Value "at 1 us": mean over [0.9, 1.1] us past the edge, which keeps
    // per-sample noise out of the class decision.
    double lo_us = 0.9, hi_us = 1.1;
    double acc = 0.0;
    std::size_t cnt = 0;
    for (std::size_t i = edge; i < v.size(); ++i) {
        double t_us = (static_cast<double>(i - edge)) * dt_us;
        if (t_us < lo_us) continue;
        if (t_us > hi_us) break;
        acc += v[i];
        ++cnt;
    }
    if (cnt == 0) throw DataError("no samples near 1 us after the edge");
    double a_at_1us = (acc / static_cast<double>(cnt) - baseline) / step;

    PackageReport rep;
    rep.late_settling = std::abs(1.0 - a_at_1us);
    if (rep.late_settling < opts.good_below)
        rep.cls = PackageClass::Good;
    else if (rep.late_settling < opts.bad_below)
        rep.cls = PackageClass::Bad;
    else
        rep.cls = PackageClass::VeryBad;
    return rep;
}

const char* to_string(PackageClass cls) {
    switch (cls) {
        case PackageClass::Good: return "good";
        case PackageClass::Bad: return "bad";
        case PackageClass::VeryBad: return "very_bad";
    }
    return "unknown";
}

} // namespace fluxtrace::estimators
