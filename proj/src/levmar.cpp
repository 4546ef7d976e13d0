#include "fluxtrace/levmar.hpp"

#include <algorithm>
#include <cmath>

#include "fluxtrace/errors.hpp"

namespace fluxtrace::levmar {

namespace {

// Solve A x = b for a small symmetric positive-definite system by
// Cholesky factorization. Returns false if the factorization breaks down.
bool solve_spd(std::vector<double>& a, std::vector<double>& b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
            if (i == j) {
                if (s <= 0.0) return false;
                a[i * n + i] = std::sqrt(s);
            } else {
                a[i * n + j] = s / a[j * n + j];
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= a[i * n + k] * b[k];
        b[i] = s / a[i * n + i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= a[k * n + ii] * b[k];
        b[ii] = s / a[ii * n + ii];
    }
    return true;
}

double half_ssq(const std::vector<double>& r) {
    double s = 0.0;
    for (double v : r) s += v * v;
    return 0.5 * s;
}

} // namespace

Result fit(const ResidualFn& residuals, std::size_t n_residuals,
           std::vector<double> initial, const std::vector<double>& lower,
           const std::vector<double>& upper, const Options& opts) {
    const std::size_t np = initial.size();
    if (np == 0) throw ConfigError("fit needs at least one parameter");
    if (n_residuals < np) throw DataError("fit needs at least as many residuals as parameters");
    if (!lower.empty() && lower.size() != np)
        throw ConfigError("lower bound size mismatch");
    if (!upper.empty() && upper.size() != np)
        throw ConfigError("upper bound size mismatch");

    auto project = [&](std::vector<double>& p) {
        if (!lower.empty())
            for (std::size_t i = 0; i < np; ++i) p[i] = std::max(p[i], lower[i]);
        if (!upper.empty())
            for (std::size_t i = 0; i < np; ++i) p[i] = std::min(p[i], upper[i]);
    };

    Result res;
    res.params = std::move(initial);
    project(res.params);

    std::vector<double> r(n_residuals), r_trial(n_residuals);
    residuals(res.params, r);
    res.cost = half_ssq(r);

    std::vector<double> jac(n_residuals * np);
    std::vector<double> jtj(np * np), jtr(np), a(np * np), step(np);
    std::vector<double> trial(np), probe(np);

    double lambda = opts.lambda0;

    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        res.iterations = iter + 1;

        // Forward-difference Jacobian around the current point.
        for (std::size_t j = 0; j < np; ++j) {
            double h = opts.jacobian_step * std::max(1.0, std::abs(res.params[j]));
            probe = res.params;
            probe[j] += h;
            if (!upper.empty() && probe[j] > upper[j]) {
                probe[j] = res.params[j] - h; // one-sided away from the bound
                h = -h;
            }
            residuals(probe, r_trial);
            for (std::size_t i = 0; i < n_residuals; ++i)
                jac[i * np + j] = (r_trial[i] - r[i]) / h;
        }

        for (std::size_t i = 0; i < np; ++i) {
            jtr[i] = 0.0;
            for (std::size_t k = 0; k < n_residuals; ++k)
                jtr[i] += jac[k * np + i] * r[k];
            for (std::size_t j = 0; j <= i; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < n_residuals; ++k)
                    s += jac[k * np + i] * jac[k * np + j];
                jtj[i * np + j] = jtj[j * np + i] = s;
            }
        }

        bool accepted = false;
        for (int attempt = 0; attempt < 60 && !accepted; ++attempt) {
            a = jtj;
            for (std::size_t i = 0; i < np; ++i)
                a[i * np + i] += lambda * std::max(jtj[i * np + i], 1e-30);
            step = jtr;
            if (!solve_spd(a, step, np)) {
                lambda *= opts.lambda_up;
                continue;
            }
            trial = res.params;
            for (std::size_t i = 0; i < np; ++i) trial[i] -= step[i];
            project(trial);

            residuals(trial, r_trial);
            double cost_trial = half_ssq(r_trial);
            if (cost_trial <= res.cost) {
                double rel_drop = (res.cost - cost_trial) / std::max(res.cost, 1e-300);
                double rel_step = 0.0;
                for (std::size_t i = 0; i < np; ++i)
                    rel_step = std::max(rel_step, std::abs(trial[i] - res.params[i]) /
                                                      std::max(1.0, std::abs(trial[i])));
                res.params = trial;
                std::swap(r, r_trial);
                res.cost = cost_trial;
                lambda = std::max(lambda * opts.lambda_down, 1e-14);
                accepted = true;
                if (rel_drop < opts.cost_tol || rel_step < opts.step_tol) {
                    res.converged = true;
                    return res;
                }
            } else {
                lambda *= opts.lambda_up;
            }
        }
        if (!accepted) {
            // No downhill step found at any damping: local minimum.
            res.converged = true;
            return res;
        }
    }
    return res;
}

} // namespace fluxtrace::levmar
