/*
   Copyright 2026 The snls Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <cmath>
#include <cstdio>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "snls/errors.hpp"
#include "snls/grid.hpp"
#include "snls/noise.hpp"
#include "snls/philox.hpp"
#include "snls/spectral.hpp"

namespace snls {

enum class SolverKind { fixed_point, exact_linear };

struct StepConfig {
    double tau = 1.0 / 128.0;
    double fp_tol = 1e-12;
    int fp_max_iters = 200;
    SolverKind solver = SolverKind::fixed_point;

    /// Requires τ > 0 and ατ ≤ 1.
    void validate(double alpha) const {
        if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("tau must be positive");
        if (alpha * tau > 1.0)
            throw ConfigError("alpha*tau = " + std::to_string(alpha * tau) +
                              " violates the step restriction alpha*tau <= 1");
        if (!(fp_tol > 0.0)) throw ConfigError("fp_tol must be positive");
        if (fp_max_iters < 1) throw ConfigError("fp_max_iters must be at least 1");
    }

    friend bool operator==(const StepConfig&, const StepConfig&) = default;
};

struct StepReport {
    int iterations = 0;
    double residual = 0.0;
    /// ‖u^k - e^{-ατ} u^{k-1}‖_0
    double increment_norm = 0.0;
};

namespace detail {

inline double distance(const SpectralState& a, const SpectralState& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::norm(a[i] - b[i]);
    return std::sqrt(s);
}

inline std::string format_sci(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", x);
    return buf;
}

} // namespace detail

/**
 * One step of the modified implicit Euler scheme
 *
 *   (1 + iμ_m τ) u_m = e^{-ατ} prev_m + iλτ [π_N(((|u|² + |e^{-ατ}prev|²)/2) u)]_m + dw_m,
 *
 * solved by Picard iteration on the resolvent form starting from `start` (default:
 * the linear solve D⁻¹(e^{-ατ}prev + dw)). Stops when the 0-norm of successive
 * iterate differences is at most fp_tol·max(1, ‖u‖_0). Throws StepFailure otherwise.
 */
inline StepReport solve_scheme_step(const SpectralState& prev, const NoiseIncrement& dw,
                                    const ModelParams& params, const LinearSpectrum& spectrum,
                                    GridWorkspace& ws, const StepConfig& cfg, SpectralState& u,
                                    const SpectralState* start = nullptr,
                                    std::vector<double>* residual_history = nullptr) {
    const std::size_t n = prev.size();
    if (dw.size() != n || spectrum.size() < n)
        throw UsageError("step: state, noise and spectrum sizes disagree");
    const double tau = cfg.tau;
    const double decay = std::exp(-params.alpha * tau);

    SpectralState damped(n);
    SpectralState rhs(n);
    std::vector<cplx> resolvent(n);
    for (std::size_t m = 0; m < n; ++m) {
        damped[m] = decay * prev[m];
        rhs[m] = damped[m] + dw.dw[m];
        resolvent[m] = 1.0 / cplx(1.0, spectrum.mu[m] * tau);
    }

    StepReport rep;
    if (params.lambda == 0) {
        u = SpectralState(n);
        for (std::size_t m = 0; m < n; ++m) u[m] = resolvent[m] * rhs[m];
        rep.iterations = 1;
        rep.residual = 0.0;
        rep.increment_norm = detail::distance(u, damped);
        return rep;
    }

    require_grid(ws, 3 * n, "scheme step");
    std::vector<double> weight(ws.grid_size());
    {
        auto phys = ws.scratch_b();
        ws.synthesize(damped, phys);
        for (std::size_t j = 0; j < phys.size(); ++j) weight[j] = std::norm(phys[j]);
    }

    if (start) {
        if (start->size() != n) throw UsageError("initial iterate has the wrong length");
        u = *start;
    } else {
        u = SpectralState(n);
        for (std::size_t m = 0; m < n; ++m) u[m] = resolvent[m] * rhs[m];
    }

    const cplx coupling(0.0, static_cast<double>(params.lambda) * tau);
    SpectralState cubic(n);
    SpectralState next(n);
    double diff = 0.0;
    for (int it = 1; it <= cfg.fp_max_iters; ++it) {
        galerkin_cubic_mix(u, weight, ws, cubic);
        double d2 = 0.0, n2 = 0.0;
        for (std::size_t m = 0; m < n; ++m) {
            next[m] = resolvent[m] * (rhs[m] + coupling * cubic[m]);
            d2 += std::norm(next[m] - u[m]);
            n2 += std::norm(next[m]);
        }
        std::swap(u, next);
        diff = std::sqrt(d2);
        if (residual_history) residual_history->push_back(diff);
        if (!std::isfinite(diff)) break;
        if (diff <= cfg.fp_tol * std::max(1.0, std::sqrt(n2))) {
            rep.iterations = it;
            rep.residual = diff;
            rep.increment_norm = detail::distance(u, damped);
            return rep;
        }
    }
    throw StepFailure("fixed-point iteration did not converge in " +
                          std::to_string(cfg.fp_max_iters) + " iterations (residual " +
                          detail::format_sci(diff) + "); the time step is too large",
                      diff, cfg.fp_max_iters);
}

inline std::pair<SpectralState, StepReport>
step_scheme(const SpectralState& prev, const NoiseIncrement& dw, const ModelParams& params,
            const LinearSpectrum& spectrum, GridWorkspace& ws, const StepConfig& cfg) {
    SpectralState u;
    StepReport rep = solve_scheme_step(prev, dw, params, spectrum, ws, cfg, u);
    return {std::move(u), rep};
}

/**
 * Exact λ = 0 update over one step: u_m = e^{-(iμ_m+α)τ} prev_m + g_m with
 * E|g_m|² = η_m(1 - e^{-2ατ})/α. The Gaussian g is the stream's increment rescaled,
 * so it is equal in law (not pathwise) to the stochastic convolution.
 */
inline SpectralState step_exact_linear(const SpectralState& prev, const NoiseIncrement& dw,
                                       const ModelParams& params, const LinearSpectrum& spectrum,
                                       double tau) {
    if (params.lambda != 0) throw UsageError("step_exact_linear requires lambda = 0");
    if (!(tau > 0.0)) throw UsageError("step_exact_linear requires tau > 0");
    const double a = params.alpha;
    const double g_scale = std::sqrt(-std::expm1(-2.0 * a * tau) / (2.0 * a * tau));
    SpectralState u = apply_semigroup(prev, spectrum, tau);
    for (std::size_t m = 0; m < u.size(); ++m) u[m] += g_scale * dw.dw[m];
    return u;
}

/**
 * Empirical uniqueness witness for one scheme step: solves from the default iterate
 * and from n_starts random perturbations of it (relative size perturbation_scale) and
 * checks that all limits agree pairwise within 10·fp_tol·max(1, ‖u‖_0). Returns false
 * if a perturbed start diverges or two limits differ; a failing base solve propagates.
 */
inline bool solve_uniqueness_probe(const SpectralState& prev, const NoiseIncrement& dw,
                                   const ModelParams& params, const LinearSpectrum& spectrum,
                                   GridWorkspace& ws, const StepConfig& cfg,
                                   double perturbation_scale, int n_starts = 8,
                                   std::uint64_t seed = 0) {
    const std::size_t n = prev.size();
    std::vector<SpectralState> limits;
    limits.reserve(static_cast<std::size_t>(n_starts) + 1);
    SpectralState base;
    solve_scheme_step(prev, dw, params, spectrum, ws, cfg, base);
    limits.push_back(base);
    if (params.lambda == 0) return true;

    // The default initial iterate, recomputed here so perturbations are relative to it.
    const double decay = std::exp(-params.alpha * cfg.tau);
    SpectralState u0(n);
    for (std::size_t m = 0; m < n; ++m)
        u0[m] = (decay * prev[m] + dw.dw[m]) / cplx(1.0, spectrum.mu[m] * cfg.tau);
    const double radius = perturbation_scale * std::max(1.0, std::sqrt(mass(u0)));

    NoiseStream rng(seed, 0x5eedu, 1.0);
    for (int s = 0; s < n_starts; ++s) {
        SpectralState delta(n);
        for (std::size_t m = 0; m < n; ++m) {
            const auto [a, b] = rng.normals(static_cast<std::uint32_t>(m + 1), 0,
                                            static_cast<std::uint64_t>(s));
            delta[m] = cplx(a, b);
        }
        const double dn = std::sqrt(mass(delta));
        if (dn > 0.0) delta *= cplx(radius / dn, 0.0);
        SpectralState start = u0 + delta;
        SpectralState u;
        try {
            solve_scheme_step(prev, dw, params, spectrum, ws, cfg, u, &start);
        } catch (const StepFailure&) {
            return false;
        }
        limits.push_back(std::move(u));
    }
    const double tol = 10.0 * cfg.fp_tol * std::max(1.0, std::sqrt(mass(base)));
    for (std::size_t i = 0; i < limits.size(); ++i)
        for (std::size_t j = i + 1; j < limits.size(); ++j)
            if (detail::distance(limits[i], limits[j]) > tol) return false;
    return true;
}

struct TrajectorySummary {
    SpectralState final_state;
    std::size_t steps = 0;
    long long total_iterations = 0;
    int max_iterations = 0;
    double max_residual = 0.0;
};

struct NoHook {
    void operator()(std::size_t, const SpectralState&, const StepReport&) const noexcept {}
};

/**
 * Iterates the scheme n_steps times from init, drawing increments from `stream`.
 * hook(k, u^k, report_k) is invoked after every step k = 1..n_steps. Step failures are
 * rethrown carrying the step index.
 */
template <class Hook = NoHook>
TrajectorySummary run_trajectory(const SpectralState& init, std::size_t n_steps,
                                 NoiseStream& stream, const NoiseSpectrum& noise,
                                 const ModelParams& params, const LinearSpectrum& spectrum,
                                 GridWorkspace& ws, const StepConfig& cfg, Hook&& hook = {}) {
    if (init.size() != noise.size())
        throw UsageError("initial state and noise spectrum sizes disagree");
    if (cfg.solver == SolverKind::exact_linear && params.lambda != 0)
        throw UsageError("the exact linear solver requires lambda = 0");
    TrajectorySummary sum;
    SpectralState u = init;
    SpectralState next;
    NoiseIncrement dw(noise.size());
    StepReport rep;
    for (std::size_t k = 1; k <= n_steps; ++k) {
        sample_increment(stream, noise, cfg.tau, dw);
        if (cfg.solver == SolverKind::exact_linear) {
            next = step_exact_linear(u, dw, params, spectrum, cfg.tau);
            rep = StepReport{1, 0.0, 0.0};
            const double decay = std::exp(-params.alpha * cfg.tau);
            double s = 0.0;
            for (std::size_t m = 0; m < u.size(); ++m) s += std::norm(next[m] - decay * u[m]);
            rep.increment_norm = std::sqrt(s);
        } else {
            try {
                rep = solve_scheme_step(u, dw, params, spectrum, ws, cfg, next);
            } catch (const StepFailure& f) {
                throw f.at_step(k);
            }
        }
        std::swap(u, next);
        sum.total_iterations += rep.iterations;
        sum.max_iterations = std::max(sum.max_iterations, rep.iterations);
        sum.max_residual = std::max(sum.max_residual, rep.residual);
        hook(k, static_cast<const SpectralState&>(u), static_cast<const StepReport&>(rep));
    }
    sum.steps = n_steps;
    sum.final_state = std::move(u);
    return sum;
}

} // namespace snls
