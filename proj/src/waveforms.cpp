#include "fluxtrace/waveforms.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include "fluxtrace/errors.hpp"

namespace fluxtrace::waveforms {

namespace {

// Discrete magnitude response of a sampled Gaussian kernel of width
// sigma (in samples) at normalized frequency nu (cycles/sample).
double gaussian_kernel_response(double sigma, double nu) {
    int half = static_cast<int>(std::ceil(5.0 * sigma)) + 1;
    double dc = 1.0, acc = 1.0;
    for (int k = 1; k <= half; ++k) {
        double w = std::exp(-0.5 * k * k / (sigma * sigma));
        dc += 2.0 * w;
        acc += 2.0 * w * std::cos(kTwoPi * nu * k);
    }
    return acc / dc;
}

// Width (in samples) whose discrete response is exactly -3 dB at nu.
// The continuous-time value sqrt(ln 2)/(2*pi*fc) is only approximate
// once the kernel is sampled, so calibrate by bisection.
double calibrate_sigma(double nu) {
    double sigma0 = std::sqrt(std::log(2.0)) / (kTwoPi * nu);
    double lo = 0.2 * sigma0, hi = 5.0 * sigma0;
    const double target = 1.0 / std::sqrt(2.0);
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (gaussian_kernel_response(mid, nu) > target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

// Roots of a low-degree polynomial c0 + c1 x + ... + cn x^n by
// Durand-Kerner iteration. Degree <= 3 in practice.
std::vector<std::complex<double>> poly_roots(const std::vector<double>& coeffs) {
    int n = static_cast<int>(coeffs.size()) - 1;
    while (n > 0 && coeffs[n] == 0.0) --n;
    std::vector<std::complex<double>> roots;
    if (n < 1) return roots;
    std::vector<std::complex<double>> c(coeffs.begin(), coeffs.begin() + n + 1);
    for (auto& v : c) v /= c[n];
    roots.resize(n);
    std::complex<double> seed(0.4, 0.9);
    std::complex<double> p(1.0, 0.0);
    for (int i = 0; i < n; ++i) {
        p *= seed;
        roots[i] = p;
    }
    for (int iter = 0; iter < 200; ++iter) {
        double move = 0.0;
        for (int i = 0; i < n; ++i) {
            std::complex<double> val(0.0, 0.0);
            for (int k = n; k >= 0; --k) val = val * roots[i] + c[k];
            std::complex<double> denom(1.0, 0.0);
            for (int j = 0; j < n; ++j)
                if (j != i) denom *= roots[i] - roots[j];
            std::complex<double> delta = val / denom;
            roots[i] -= delta;
            move = std::max(move, std::abs(delta));
        }
        if (move < 1e-14) break;
    }
    return roots;
}

} // namespace

void FluxWaveform::validate() const {
    if (!(sample_rate > 0.0)) throw ConfigError("sample_rate must be > 0");
    if (samples.size() < 2) throw DataError("waveform needs at least 2 samples");
    for (double v : samples)
        if (!std::isfinite(v)) throw DataError("waveform contains a non-finite sample");
}

ExpSettlingModel::ExpSettlingModel(std::vector<SettlingTerm> t) : terms(std::move(t)) {
    std::sort(terms.begin(), terms.end(),
              [](const SettlingTerm& a, const SettlingTerm& b) { return a.tau_ns < b.tau_ns; });
    validate();
}

double ExpSettlingModel::step_response(double t_ns) const {
    if (t_ns < 0.0) return 0.0;
    double a = 1.0;
    for (const auto& term : terms) a -= term.alpha * std::exp(-t_ns / term.tau_ns);
    return a;
}

double ExpSettlingModel::total_amplitude() const {
    double s = 0.0;
    for (const auto& term : terms) s += std::abs(term.alpha);
    return s;
}

void ExpSettlingModel::validate() const {
    if (terms.size() > 3) throw ConfigError("settling model supports at most 3 terms");
    for (const auto& term : terms)
        if (!(term.tau_ns > 0.0)) throw ConfigError("settling tau must be > 0");
    if (total_amplitude() >= 1.0)
        throw ConfigError("settling amplitudes must satisfy sum|alpha| < 1");
    for (std::size_t i = 1; i < terms.size(); ++i)
        if (terms[i].tau_ns < terms[i - 1].tau_ns)
            throw ConfigError("settling terms must be sorted by ascending tau");
}

ExpSettlingModel ExpSettlingModel::baseline_apparatus() {
    return ExpSettlingModel({{0.48, 0.73}, {0.04, 7.9}, {0.01, 53.5}});
}

void WaveformConfig::validate() const {
    if (!(awg_rate > 0.0)) throw ConfigError("awg_rate must be > 0");
    if (!(lpf_cutoff > 0.0)) throw ConfigError("lpf_cutoff must be > 0");
}

FluxWaveform make_step(double flux_start, double flux_end, double t_edge_ns,
                       double duration_ns, const WaveformConfig& cfg) {
    cfg.validate();
    if (!(t_edge_ns >= 0.0) || !(duration_ns > t_edge_ns))
        throw ConfigError("step requires duration > t_edge >= 0");
    if (std::abs(flux_start) > 0.5 || std::abs(flux_end) > 0.5)
        throw ConfigError("step levels must be within +-0.5 Phi0");

    FluxWaveform wf;
    wf.sample_rate = cfg.awg_rate;
    auto n = static_cast<std::size_t>(std::llround(duration_ns * 1e-9 * cfg.awg_rate));
    n = std::max<std::size_t>(n, 2);
    wf.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        wf.samples[i] = (wf.time_ns(i) >= t_edge_ns) ? flux_end : flux_start;
    return wf;
}

double current_to_flux(double current_a, const WaveformConfig& cfg) {
    if (!(cfg.mutual_inductance > 0.0))
        throw ConfigError("mutual_inductance must be set to convert current to flux");
    return cfg.mutual_inductance * current_a / kFluxQuantum;
}

FluxWaveform gaussian_lowpass(const FluxWaveform& wf, double cutoff_hz) {
    wf.validate();
    if (!(cutoff_hz > 0.0) || cutoff_hz >= 0.5 * wf.sample_rate)
        throw ConfigError("lpf_cutoff must be below the Nyquist frequency");

    double nu = cutoff_hz / wf.sample_rate;
    double sigma = calibrate_sigma(nu);
    int half = static_cast<int>(std::ceil(5.0 * sigma)) + 1;

    std::vector<double> kernel(2 * half + 1);
    double sum = 0.0;
    for (int k = -half; k <= half; ++k) {
        double w = std::exp(-0.5 * k * k / (sigma * sigma));
        kernel[k + half] = w;
        sum += w;
    }
    for (double& w : kernel) w /= sum;

    auto n = static_cast<std::ptrdiff_t>(wf.samples.size());
    FluxWaveform out = wf;
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int k = -half; k <= half; ++k) {
            std::ptrdiff_t j = std::clamp<std::ptrdiff_t>(i + k, 0, n - 1);
            acc += kernel[k + half] * wf.samples[j];
        }
        out.samples[i] = acc;
    }
    return out;
}

namespace detail {

void apply_settling_series(const ExpSettlingModel& model, double sample_rate,
                           const double* in, double* out, std::size_t n,
                           bool primed_with_first) {
    model.validate();
    if (n == 0) return;
    const std::size_t m = model.terms.size();
    if (m == 0) {
        std::copy(in, in + n, out);
        return;
    }

    double dt_s = 1.0 / sample_rate;
    double pole[3], gain_dc = 1.0;
    for (std::size_t i = 0; i < m; ++i) {
        pole[i] = std::exp(-dt_s / (model.terms[i].tau_ns * 1e-9));
        gain_dc -= model.terms[i].alpha;
    }

    // y[k] = (1 - sum a_i) x[k] + sum a_i s_i[k], where s_i is the matched
    // one-pole low-pass s_i[k] = p_i s_i[k-1] + (1 - p_i) x[k-1].
    double state[3];
    double prev_x = primed_with_first ? in[0] : 0.0;
    for (std::size_t i = 0; i < m; ++i) state[i] = prev_x;

    for (std::size_t k = 0; k < n; ++k) {
        double y = gain_dc * in[k];
        for (std::size_t i = 0; i < m; ++i) {
            state[i] = pole[i] * state[i] + (1.0 - pole[i]) * prev_x;
            y += model.terms[i].alpha * state[i];
        }
        out[k] = y;
        prev_x = in[k];
    }
}

void settling_transfer(const ExpSettlingModel& model, double sample_rate,
                       std::vector<double>& num, std::vector<double>& den) {
    const std::size_t m = model.terms.size();
    double dt_s = 1.0 / sample_rate;

    // den(z^-1) = prod_i (1 - p_i z^-1)
    den.assign(1, 1.0);
    std::vector<double> poles(m);
    for (std::size_t i = 0; i < m; ++i) {
        poles[i] = std::exp(-dt_s / (model.terms[i].tau_ns * 1e-9));
        std::vector<double> next(den.size() + 1, 0.0);
        for (std::size_t k = 0; k < den.size(); ++k) {
            next[k] += den[k];
            next[k + 1] -= poles[i] * den[k];
        }
        den = std::move(next);
    }

    // num = (1 - sum a_i) den + sum_i a_i (1 - p_i) z^-1 prod_{j != i} (1 - p_j z^-1)
    double gain_dc = 1.0;
    for (const auto& t : model.terms) gain_dc -= t.alpha;
    num.assign(den.size(), 0.0);
    for (std::size_t k = 0; k < den.size(); ++k) num[k] = gain_dc * den[k];
    for (std::size_t i = 0; i < m; ++i) {
        std::vector<double> rest(1, 1.0);
        for (std::size_t j = 0; j < m; ++j) {
            if (j == i) continue;
            std::vector<double> next(rest.size() + 1, 0.0);
            for (std::size_t k = 0; k < rest.size(); ++k) {
                next[k] += rest[k];
                next[k + 1] -= poles[j] * rest[k];
            }
            rest = std::move(next);
        }
        double scale = model.terms[i].alpha * (1.0 - poles[i]);
        for (std::size_t k = 0; k < rest.size(); ++k) num[k + 1] += scale * rest[k];
    }
}

bool settling_invertible(const ExpSettlingModel& model, double sample_rate) {
    if (model.terms.empty()) return true;
    std::vector<double> num, den;
    settling_transfer(model, sample_rate, num, den);
    // Zeros of the forward filter: roots of num(z^-1) rewritten as a
    // polynomial in z (coefficients reversed).
    std::vector<double> z_poly(num.rbegin(), num.rend());
    for (const auto& root : poly_roots(z_poly))
        if (std::abs(root) >= 1.0 - 1e-9) return false;
    return true;
}

} // namespace detail

FluxWaveform apply_settling(const FluxWaveform& wf, const ExpSettlingModel& model) {
    wf.validate();
    FluxWaveform out = wf;
    detail::apply_settling_series(model, wf.sample_rate, wf.samples.data(),
                                  out.samples.data(), wf.samples.size(), true);
    return out;
}

FluxWaveform predistort(const FluxWaveform& wf, const ExpSettlingModel& model) {
    wf.validate();
    model.validate();
    if (model.empty()) return wf;
    if (!detail::settling_invertible(model, wf.sample_rate))
        throw ModelError("settling model has no stable inverse at this sample rate");

    std::vector<double> num, den;
    detail::settling_transfer(model, wf.sample_rate, num, den);

    // Inverse filter y = (den/num) x, run as a direct-form recursion and
    // primed in the DC steady state of the first sample (num(1) == den(1),
    // so the primed output level equals the input level).
    FluxWaveform out = wf;
    const std::size_t order = num.size() - 1;
    std::vector<double> xh(order, wf.samples[0]);
    std::vector<double> yh(order, wf.samples[0]);
    for (std::size_t k = 0; k < wf.samples.size(); ++k) {
        double acc = den[0] * wf.samples[k];
        for (std::size_t j = 1; j <= order; ++j) {
            acc += den[j] * (j <= k ? wf.samples[k - j] : xh[j - k - 1]);
            acc -= num[j] * (j <= k ? out.samples[k - j] : yh[j - k - 1]);
        }
        out.samples[k] = acc / num[0];
    }
    return out;
}

std::vector<FluxWaveform> angle_sweep_family(const circuit::CircuitParams& calib,
                                             std::size_t n, double final_flux,
                                             double span_deg,
                                             const WaveformConfig& cfg,
                                             double t_edge_ns, double duration_ns) {
    calib.validate();
    cfg.validate();
    if (n == 0) throw ConfigError("family size must be >= 1");
    if (!(span_deg >= 180.0)) throw ConfigError("angle span must be >= 180 degrees");

    double available = circuit::reachable_angle_span(calib);
    // Slight overshoot so the realized span meets the request despite the
    // finite inversion tolerance.
    double want = span_deg * (1.0 + 1e-9);
    if (want > available) {
        throw ModelError("requested angle span " + std::to_string(span_deg) +
                         " deg exceeds the " + std::to_string(available) +
                         " deg reachable within the flux clamp");
    }

    double top = circuit::reflection_angle(0.0, calib);
    std::vector<FluxWaveform> family;
    family.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        double target = (n == 1) ? top : top - want * static_cast<double>(k) /
                                                   static_cast<double>(n - 1);
        double flux0 = circuit::invert_reflection_angle(target, calib);
        family.push_back(make_step(flux0, final_flux, t_edge_ns, duration_ns, cfg));
    }
    return family;
}

} // namespace fluxtrace::waveforms
