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

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "snls/errors.hpp"
#include "snls/grid.hpp"
#include "snls/integrator.hpp"
#include "snls/noise.hpp"
#include "snls/observables.hpp"
#include "snls/spectral.hpp"

namespace snls {

// ---------------------------------------------------------------------------------------
// Parallel execution

/// Worker count from SNLS_THREADS, else the available hardware parallelism.
inline unsigned thread_count() {
    if (const char* env = std::getenv("SNLS_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/**
 * Runs f(i) for i in [0, n) on `threads` workers. Results must be written by index so
 * the outcome does not depend on scheduling. If tasks throw, the exception of the
 * lowest failing index is rethrown after all workers have joined.
 */
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f,
                         unsigned threads = thread_count()) {
    if (n == 0) return;
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                f(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t n_workers = std::min<std::size_t>(std::max(1u, threads), n);
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(n_workers);
        for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------------------
// Rate fitting

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double ci_low = 0.0;  ///< 95% confidence interval of the slope
    double ci_high = 0.0;
    std::vector<std::pair<double, double>> points; ///< (log h, log err) used in the fit
    std::vector<std::string> warnings;
};

/// Least-squares fit of log err = intercept + slope · log h. Points with err ≤ 0 or
/// non-finite values are dropped with a warning; fewer than 3 remaining is an error.
inline RateFit fit_rate(std::span<const double> h, std::span<const double> err) {
    if (h.size() != err.size()) throw UsageError("fit_rate: h and err differ in length");
    RateFit fit;
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (!(err[i] > 0.0) || !std::isfinite(err[i]) || !(h[i] > 0.0) || !std::isfinite(h[i])) {
            fit.warnings.push_back("point h=" + std::to_string(h[i]) + " err=" +
                                   std::to_string(err[i]) + " excluded (nonpositive)");
            continue;
        }
        fit.points.emplace_back(std::log(h[i]), std::log(err[i]));
    }
    const std::size_t n = fit.points.size();
    if (n < 3)
        throw ConfigError("fit_rate needs at least 3 positive points, got " + std::to_string(n));
    double mx = 0.0, my = 0.0;
    for (auto [x, y] : fit.points) {
        mx += x;
        my += y;
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (auto [x, y] : fit.points) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if (!(sxx > 0.0)) throw ConfigError("fit_rate: all resolutions coincide");
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ssr = 0.0;
    for (auto [x, y] : fit.points) {
        const double r = y - fit.intercept - fit.slope * x;
        ssr += r * r;
    }
    fit.r_squared = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
    const double dof = static_cast<double>(n - 2);
    const double se = std::sqrt(ssr / dof / sxx);
    const double t = boost::math::quantile(
        boost::math::complement(boost::math::students_t_distribution<double>(dof), 0.025));
    fit.ci_low = fit.slope - t * se;
    fit.ci_high = fit.slope + t * se;
    return fit;
}

// ---------------------------------------------------------------------------------------
// Study specification

enum class StudyKind {
    simulate,
    ergodicity,
    spatial_order,
    temporal_order,
    invariant_error_spatial,
    invariant_error_temporal,
    operator_check
};

inline constexpr std::array<std::pair<StudyKind, std::string_view>, 7> kStudyNames{{
    {StudyKind::simulate, "simulate"},
    {StudyKind::ergodicity, "ergodicity"},
    {StudyKind::spatial_order, "spatial_order"},
    {StudyKind::temporal_order, "temporal_order"},
    {StudyKind::invariant_error_spatial, "invariant_error_spatial"},
    {StudyKind::invariant_error_temporal, "invariant_error_temporal"},
    {StudyKind::operator_check, "operator_check"},
}};

inline std::string_view name(StudyKind k) {
    for (auto [kind, s] : kStudyNames)
        if (kind == k) return s;
    return "?";
}

inline StudyKind parse_study_kind(std::string_view s) {
    for (auto [kind, n] : kStudyNames)
        if (n == s) return kind;
    throw ConfigError("unknown study kind '" + std::string(s) + "'");
}

/// How to build the per-mode noise rates for any number of modes.
struct NoiseConfig {
    SpectrumKind kind = SpectrumKind::power;
    double p = 8.0;
    double scale = 1.0;
    std::vector<double> etas;

    NoiseSpectrum build(std::size_t n_modes) const {
        if (kind == SpectrumKind::power) return make_power_spectrum(n_modes, p, scale);
        if (etas.size() < n_modes)
            throw ConfigError("custom noise lists " + std::to_string(etas.size()) +
                              " rates but " + std::to_string(n_modes) + " modes are needed");
        return make_custom_spectrum({etas.begin(), etas.begin() + static_cast<long>(n_modes)});
    }

    void validate() const {
        if (kind == SpectrumKind::power) {
            make_power_spectrum(1, p, scale);
        } else {
            if (etas.empty()) throw ConfigError("custom noise needs at least one rate");
            make_custom_spectrum(etas);
        }
    }

    friend bool operator==(const NoiseConfig&, const NoiseConfig&) = default;
};

struct StudySpec {
    StudyKind kind = StudyKind::simulate;
    ModelParams model;
    NoiseConfig noise;
    StepConfig step;
    /// Mode counts (spatial kinds) or time steps (temporal kinds), coarse to fine.
    std::vector<double> resolutions;
    double reference = 0.0;
    std::size_t n_replicas = 32;
    double t_final = 1.0;       ///< horizon of fixed-time studies
    std::size_t n_steps = 1000; ///< averaged steps per trajectory (simulate, ergodicity)
    std::size_t burn_in = 0;    ///< discarded steps (ergodicity)
    double burn_in_time = 4.0;  ///< discarded time (invariant-measure studies)
    double t_average = 16.0;    ///< averaging time (invariant-measure studies)
    TestFunction test_function = TestFunction::exp_neg_mass;
    std::vector<std::vector<cplx>> initial_conditions{{cplx(2.0), cplx(1.0)}};
    std::size_t sample_every = 1;
    std::uint64_t seed = 0;

    /// Mode-N initial state of condition i (padded or truncated).
    SpectralState initial_state(std::size_t i, std::size_t n) const {
        SpectralState u(n);
        const auto& c = initial_conditions.at(i);
        for (std::size_t m = 0; m < std::min(n, c.size()); ++m) u[m] = c[m];
        return u;
    }

    void validate() const {
        model.validate();
        noise.validate();
        step.validate(model.alpha);
        if (initial_conditions.empty()) throw ConfigError("at least one initial condition is required");
        if (sample_every < 1) throw ConfigError("sample_every must be at least 1");
        const bool rate = kind == StudyKind::spatial_order || kind == StudyKind::temporal_order ||
                          kind == StudyKind::invariant_error_spatial ||
                          kind == StudyKind::invariant_error_temporal;
        const bool temporal = kind == StudyKind::temporal_order ||
                              kind == StudyKind::invariant_error_temporal;
        if (rate) {
            if (resolutions.empty()) throw ConfigError("resolutions must not be empty");
            for (double r : resolutions)
                if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("resolutions must be positive");
            for (std::size_t i = 1; i < resolutions.size(); ++i) {
                const bool ok = temporal ? resolutions[i] < resolutions[i - 1]
                                         : resolutions[i] > resolutions[i - 1];
                if (!ok) throw ConfigError("resolutions must be strictly monotone, coarse to fine");
            }
            const bool ref_ok = temporal ? reference < resolutions.back() && reference > 0.0
                                         : reference > resolutions.back();
            if (!ref_ok) throw ConfigError("the reference must be finer than every resolution");
            if (temporal && model.alpha * resolutions.front() > 1.0)
                throw ConfigError("alpha*tau = " + std::to_string(model.alpha * resolutions.front()) +
                                  " violates the step restriction alpha*tau <= 1");
        }
        if (kind == StudyKind::ergodicity && initial_conditions.size() < 2)
            throw ConfigError("ergodicity needs at least two initial conditions");
        if (kind != StudyKind::simulate && kind != StudyKind::operator_check && n_replicas < 2)
            throw ConfigError("Monte Carlo studies need at least two replicas");
        if (!(t_final > 0.0)) throw ConfigError("t_final must be positive");
        if (!(burn_in_time >= 0.0) || !(t_average > 0.0))
            throw ConfigError("burn_in_time must be >= 0 and t_average > 0");
    }

    friend bool operator==(const StudySpec&, const StudySpec&) = default;
};

namespace detail {

inline std::size_t steps_for(double horizon, double tau, const char* what) {
    const double k = horizon / tau;
    const double r = std::round(k);
    if (std::abs(k - r) > 1e-9 * std::max(1.0, k))
        throw ConfigError(std::string(what) + " is not a multiple of the time step");
    return static_cast<std::size_t>(r);
}

inline StepConfig with_tau(StepConfig cfg, double tau, double alpha) {
    cfg.tau = tau;
    cfg.validate(alpha);
    return cfg;
}

/// Dyadic level of tau below base, or an error if tau ≠ base·2^{-L}.
inline int dyadic_level(double base, double tau) {
    const double l = std::log2(base / tau);
    const double r = std::round(l);
    if (std::abs(l - r) > 1e-9 || r < 0 || r > 30)
        throw ConfigError("time steps must be dyadic refinements of the coarsest step");
    return static_cast<int>(r);
}

} // namespace detail

// ---------------------------------------------------------------------------------------
// Single trajectory

struct TrajectoryRow {
    std::size_t step = 0;
    double time = 0.0;
    ObservableRecord obs;
    std::array<double, 3> phi{};
};

/// One trajectory from initial condition 0, replica 0; emits every sample_every-th step
/// (and step 0) to `sink`.
inline TrajectorySummary simulate(const StudySpec& spec,
                                  const std::function<void(const TrajectoryRow&)>& sink) {
    const auto n = static_cast<std::size_t>(spec.model.n_modes);
    const auto lin = make_spectrum(spec.model);
    const auto noise = spec.noise.build(n);
    GridWorkspace ws(n);
    NoiseStream stream(spec.seed, 0, spec.step.tau);
    auto emit = [&](std::size_t k, const SpectralState& u) {
        TrajectoryRow row;
        row.step = k;
        row.time = static_cast<double>(k) * spec.step.tau;
        row.obs = record(u, lin, ws, spec.model);
        for (std::size_t i = 0; i < 3; ++i) row.phi[i] = evaluate(kAllTestFunctions[i], u);
        sink(row);
    };
    const SpectralState u0 = spec.initial_state(0, n);
    emit(0, u0);
    return run_trajectory(u0, spec.n_steps, stream, noise, spec.model, lin, ws, spec.step,
                          [&](std::size_t k, const SpectralState& u, const StepReport&) {
                              if (k % spec.sample_every == 0) emit(k, u);
                          });
}

// ---------------------------------------------------------------------------------------
// λ = 0 closed forms

/// Stationary E|a_m|² of the scheme with λ = 0.
inline double scheme_stationary_moment(double eta, double mu, double alpha, double tau) {
    return 2.0 * eta * tau / (1.0 + mu * mu * tau * tau - std::exp(-2.0 * alpha * tau));
}

struct ModeMomentCheck {
    std::size_t mode = 0;
    double empirical = 0.0;
    double stderr_ = 0.0;
    double exact = 0.0;
    double continuum = 0.0; ///< η_m / α
    bool pass = false;
};

/**
 * Time average of |a_m|² along one λ = 0 trajectory of n_steps steps after burn_in,
 * with a batch-means standard error from n_batches consecutive batches.
 */
inline std::vector<ModeMomentCheck>
linear_stationary_check(double alpha, const NoiseSpectrum& noise, double tau, std::size_t n_steps,
                        std::size_t burn_in, std::uint64_t seed, std::size_t n_check = 4,
                        std::size_t n_batches = 100) {
    const std::size_t n = noise.size();
    if (n_check > n) throw UsageError("more modes checked than simulated");
    if (n_batches < 2 || n_steps % n_batches != 0)
        throw UsageError("n_steps must split into at least two equal batches");
    ModelParams params{alpha, 0, static_cast<int>(n)};
    const auto lin = make_spectrum(params);
    GridWorkspace ws(n);
    StepConfig cfg;
    cfg.tau = tau;
    cfg.validate(alpha);
    NoiseStream stream(seed, 0, tau);
    const std::size_t batch = n_steps / n_batches;
    std::vector<std::vector<double>> means(n_check, std::vector<double>(n_batches));
    std::vector<CompensatedSum> acc(n_check);
    run_trajectory(SpectralState(n), burn_in + n_steps, stream, noise, params, lin, ws, cfg,
                   [&](std::size_t k, const SpectralState& u, const StepReport&) {
                       if (k <= burn_in) return;
                       const std::size_t j = k - burn_in - 1;
                       for (std::size_t m = 0; m < n_check; ++m) acc[m].add(std::norm(u[m]));
                       if ((j + 1) % batch == 0) {
                           for (std::size_t m = 0; m < n_check; ++m) {
                               means[m][j / batch] = acc[m].value() / static_cast<double>(batch);
                               acc[m] = CompensatedSum{};
                           }
                       }
                   });
    std::vector<ModeMomentCheck> out;
    for (std::size_t m = 0; m < n_check; ++m) {
        const auto st = ensemble_reduce(means[m]);
        ModeMomentCheck c;
        c.mode = m + 1;
        c.empirical = st.mean;
        c.stderr_ = st.stderr_;
        c.exact = scheme_stationary_moment(noise.eta[m], lin.mu[m], alpha, tau);
        c.continuum = noise.eta[m] / alpha;
        c.pass = std::abs(c.empirical - c.exact) <= 3.0 * c.stderr_;
        out.push_back(c);
    }
    return out;
}

/// Bias |E_τ|a|² - η/α| of the λ = 0 stationary second moment over `modes` modes.
inline double linear_moment_bias(double alpha, const NoiseSpectrum& noise, double tau) {
    const auto lin = make_spectrum(alpha, noise.size());
    double b = 0.0;
    for (std::size_t m = 0; m < noise.size(); ++m)
        b += scheme_stationary_moment(noise.eta[m], lin.mu[m], alpha, tau) - noise.eta[m] / alpha;
    return std::abs(b);
}

// ---------------------------------------------------------------------------------------
// Ergodicity

inline constexpr std::size_t kDriftBins = 20;

struct ErgodicityChannel {
    std::string name;
    std::vector<EnsembleStats> per_ic;
    double max_z = 0.0; ///< largest |difference| / combined stderr over IC pairs
    bool agree = false;
    bool in_verdict = true;
};

struct DriftCheck {
    std::string name;
    std::size_t ic = 0;
    double middle = 0.0; ///< ensemble mean over [0.45 T, 0.55 T]
    double last = 0.0;   ///< ensemble mean over [0.9 T, T]
    double rel_change = 0.0;
    bool pass = false;
};

struct ErgodicityReport {
    std::vector<ErgodicityChannel> channels;
    std::vector<DriftCheck> drift;
    /// Ensemble means of the drift channels per IC and per 5% time bin over [0, T].
    std::vector<std::vector<std::array<double, 3>>> bin_means;
    double total_time = 0.0;
    long long total_iterations = 0;
    int max_iterations = 0;
    /// λ = 0 only: closed-form stationary mass of the scheme and its agreement per IC.
    double linear_mass_target = std::numeric_limits<double>::quiet_NaN();
    bool linear_target_pass = true;
    bool ergodic_pass = false;
    bool drift_pass = false;
};

/**
 * Long trajectories from every configured initial condition, n_replicas each, with
 * burn_in discarded steps followed by n_steps averaged steps. Replica r of condition i
 * uses noise replica index i·n_replicas + r, so the ensembles are independent.
 */
inline ErgodicityReport ergodicity_study(const StudySpec& spec) {
    spec.validate();
    const auto n = static_cast<std::size_t>(spec.model.n_modes);
    const auto lin = make_spectrum(spec.model);
    const auto noise = spec.noise.build(n);
    const std::size_t n_ic = spec.initial_conditions.size();
    const std::size_t R = spec.n_replicas;
    const std::size_t total = spec.burn_in + spec.n_steps;
    if (spec.n_steps == 0) throw ConfigError("ergodicity needs n_steps > 0");
    if (total < kDriftBins) throw ConfigError("ergodicity runs need at least 20 steps");

    // averaged channels: mass, ham_disc, h2_sq, phi x 3; drift channels: mass, ham_disc, h2_sq
    constexpr std::size_t n_avg = 6;
    struct Result {
        std::array<double, n_avg> avg{};
        std::array<std::array<double, 3>, kDriftBins> bins{};
        long long iterations = 0;
        int max_iterations = 0;
    };
    std::vector<Result> results(n_ic * R);
    parallel_for(n_ic * R, [&](std::size_t task) {
        const std::size_t ic = task / R;
        GridWorkspace ws(n);
        NoiseStream stream(spec.seed, static_cast<std::uint32_t>(task), spec.step.tau);
        TimeAverage avg(n_avg, spec.burn_in + 1);
        std::array<std::array<CompensatedSum, 3>, kDriftBins> bin_sums{};
        std::array<std::size_t, kDriftBins> bin_count{};
        Result& res = results[task];
        auto sum = run_trajectory(
            spec.initial_state(ic, n), total, stream, noise, spec.model, lin, ws, spec.step,
            [&](std::size_t k, const SpectralState& u, const StepReport&) {
                const double ms = mass(u);
                const double g = grad_sq(u, lin);
                const double hd =
                    spec.model.lambda == 0 ? g : g - 0.5 * spec.model.lambda * l4_fourth(u, ws);
                double h2 = 0.0;
                for (std::size_t m = 0; m < n; ++m)
                    h2 += lin.abs_lambda[m] * lin.abs_lambda[m] * std::norm(u[m]);
                const std::array<double, n_avg> v{ms, hd, h2, std::exp(-ms), 1.0 / (1.0 + ms),
                                                  std::sin(u[0].real())};
                avg.accumulate(k, v);
                const std::size_t b = (k - 1) * kDriftBins / total;
                bin_sums[b][0].add(ms);
                bin_sums[b][1].add(hd);
                bin_sums[b][2].add(h2);
                ++bin_count[b];
            });
        for (std::size_t c = 0; c < n_avg; ++c) res.avg[c] = avg.mean(c);
        for (std::size_t b = 0; b < kDriftBins; ++b)
            for (std::size_t c = 0; c < 3; ++c)
                res.bins[b][c] = bin_sums[b][c].value() / static_cast<double>(bin_count[b]);
        res.iterations = sum.total_iterations;
        res.max_iterations = sum.max_iterations;
    });

    ErgodicityReport rep;
    rep.total_time = static_cast<double>(total) * spec.step.tau;
    for (const auto& r : results) {
        rep.total_iterations += r.iterations;
        rep.max_iterations = std::max(rep.max_iterations, r.max_iterations);
    }
    static constexpr std::array<const char*, n_avg> names{
        "mass", "ham_disc", "h2_sq", "phi_exp_neg_mass", "phi_inv_mass", "phi_sin_mode1"};
    rep.ergodic_pass = true;
    for (std::size_t c = 0; c < n_avg; ++c) {
        ErgodicityChannel ch;
        ch.name = names[c];
        ch.in_verdict = c != 2;
        for (std::size_t ic = 0; ic < n_ic; ++ic) {
            std::vector<double> v(R);
            for (std::size_t r = 0; r < R; ++r) v[r] = results[ic * R + r].avg[c];
            ch.per_ic.push_back(ensemble_reduce(v));
        }
        ch.agree = true;
        for (std::size_t a = 0; a < n_ic; ++a)
            for (std::size_t b = a + 1; b < n_ic; ++b) {
                const auto& x = ch.per_ic[a];
                const auto& y = ch.per_ic[b];
                const double se = std::hypot(x.stderr_, y.stderr_);
                const double d = std::abs(x.mean - y.mean);
                const double z = se > 0.0 ? d / se : (d == 0.0 ? 0.0 : INFINITY);
                ch.max_z = std::max(ch.max_z, z);
                if (!(d <= 3.0 * se + 1e-12)) ch.agree = false;
            }
        if (ch.in_verdict && !ch.agree) rep.ergodic_pass = false;
        rep.channels.push_back(std::move(ch));
    }
    if (spec.model.lambda == 0) {
        double target = 0.0;
        for (std::size_t m = 0; m < n; ++m)
            target += scheme_stationary_moment(noise.eta[m], lin.mu[m], spec.model.alpha, spec.step.tau);
        rep.linear_mass_target = target;
        for (const auto& st : rep.channels[0].per_ic)
            if (!(std::abs(st.mean - target) <= 3.0 * st.stderr_ + 1e-12)) rep.linear_target_pass = false;
    }

    static constexpr std::array<const char*, 3> drift_names{"mass", "ham_disc", "h2_sq"};
    rep.drift_pass = true;
    rep.bin_means.assign(n_ic, std::vector<std::array<double, 3>>(kDriftBins));
    for (std::size_t ic = 0; ic < n_ic; ++ic) {
        for (std::size_t b = 0; b < kDriftBins; ++b)
            for (std::size_t c = 0; c < 3; ++c) {
                CompensatedSum s;
                for (std::size_t r = 0; r < R; ++r) s.add(results[ic * R + r].bins[b][c]);
                rep.bin_means[ic][b][c] = s.value() / static_cast<double>(R);
            }
        for (std::size_t c = 0; c < 3; ++c) {
            DriftCheck d;
            d.name = drift_names[c];
            d.ic = ic;
            const auto& bm = rep.bin_means[ic];
            d.middle = 0.5 * (bm[9][c] + bm[10][c]);
            d.last = 0.5 * (bm[18][c] + bm[19][c]);
            d.rel_change = std::abs(d.last - d.middle) / std::abs(d.middle);
            d.pass = d.rel_change <= 0.10;
            if (!d.pass) rep.drift_pass = false;
            rep.drift.push_back(d);
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------------------
// Weak-order studies

struct RatePoint {
    double resolution = 0.0; ///< N or τ
    double error = 0.0;      ///< |mean paired difference|
    double stderr_ = 0.0;
    bool retained = false;   ///< error ≥ 3 stderr
};

struct RateStudyReport {
    StudyKind kind = StudyKind::spatial_order;
    std::vector<RatePoint> points;
    RateFit fit;
    bool fit_ok = false;
    std::string fit_error;
    bool streams_consistent = true;
    long long total_iterations = 0;
    std::vector<std::string> warnings;
};

namespace detail {

/// Reduces per-replica paired differences diffs[r][i] into points and a fit against
/// h = 1/N (spatial) or h = τ (temporal).
inline void finish_rate_study(RateStudyReport& rep, const std::vector<double>& res,
                              const std::vector<std::vector<double>>& diffs, bool temporal) {
    std::vector<double> h, e;
    for (std::size_t i = 0; i < res.size(); ++i) {
        std::vector<double> d(diffs.size());
        for (std::size_t r = 0; r < diffs.size(); ++r) d[r] = diffs[r][i];
        const auto st = ensemble_reduce(d);
        RatePoint p;
        p.resolution = res[i];
        p.error = std::abs(st.mean);
        p.stderr_ = st.stderr_;
        p.retained = p.error > 0.0 && p.error >= 3.0 * p.stderr_;
        if (!p.retained) {
            rep.warnings.push_back("resolution " + std::to_string(res[i]) +
                                   ": error below the Monte Carlo noise floor, excluded");
        } else {
            h.push_back(temporal ? res[i] : 1.0 / res[i]);
            e.push_back(p.error);
        }
        rep.points.push_back(p);
    }
    try {
        rep.fit = fit_rate(h, e);
        rep.fit_ok = true;
        for (auto& w : rep.fit.warnings) rep.warnings.push_back(w);
    } catch (const ConfigError& err) {
        rep.fit_ok = false;
        rep.fit_error = err.what();
    }
}

inline bool same_sums(const std::vector<cplx>& a, const std::vector<cplx>& b, double tol) {
    for (std::size_t m = 0; m < std::min(a.size(), b.size()); ++m)
        if (std::abs(a[m] - b[m]) > tol * (1.0 + std::abs(b[m]))) return false;
    return true;
}

inline std::vector<cplx> consumed(const NoiseStream& s, std::size_t n) {
    std::vector<cplx> v(n);
    for (std::size_t m = 0; m < n; ++m) v[m] = s.consumed_sum(m + 1);
    return v;
}

} // namespace detail

/**
 * Weak error in space at fixed T: paired differences φ(u_N(T)) - φ(u_ref(T)) over
 * n_replicas replicas, every resolution driven by the same per-mode Brownian paths.
 * With invariant = true the fixed-time value is replaced by the time average of φ over
 * [burn_in_time, burn_in_time + t_average].
 */
inline RateStudyReport spatial_order_study(const StudySpec& spec, bool invariant = false) {
    spec.validate();
    RateStudyReport rep;
    rep.kind = invariant ? StudyKind::invariant_error_spatial : StudyKind::spatial_order;
    std::vector<std::size_t> modes;
    for (double r : spec.resolutions) modes.push_back(static_cast<std::size_t>(std::llround(r)));
    const auto n_ref = static_cast<std::size_t>(std::llround(spec.reference));
    modes.push_back(n_ref);
    const double tau = spec.step.tau;
    const std::size_t burn = invariant ? detail::steps_for(spec.burn_in_time, tau, "burn_in_time") : 0;
    const std::size_t n_avg = invariant ? detail::steps_for(spec.t_average, tau, "t_average")
                                        : detail::steps_for(spec.t_final, tau, "t_final");
    const std::size_t R = spec.n_replicas;
    std::vector<std::vector<double>> diffs(R, std::vector<double>(modes.size() - 1));
    std::vector<char> consistent(R, 1);
    std::vector<long long> iters(R, 0);
    parallel_for(R, [&](std::size_t r) {
        std::vector<double> phi(modes.size());
        std::vector<std::vector<cplx>> sums(modes.size());
        for (std::size_t i = 0; i < modes.size(); ++i) {
            const std::size_t n = modes[i];
            ModelParams params = spec.model;
            params.n_modes = static_cast<int>(n);
            const auto lin = make_spectrum(params);
            const auto noise = spec.noise.build(n);
            GridWorkspace ws(n);
            NoiseStream stream(spec.seed, static_cast<std::uint32_t>(r), tau);
            CompensatedSum acc;
            auto sum = run_trajectory(spec.initial_state(0, n), burn + n_avg, stream, noise,
                                      params, lin, ws, spec.step,
                                      [&](std::size_t k, const SpectralState& u, const StepReport&) {
                                          if (invariant && k > burn)
                                              acc.add(evaluate(spec.test_function, u));
                                      });
            phi[i] = invariant ? acc.value() / static_cast<double>(n_avg)
                               : evaluate(spec.test_function, sum.final_state);
            sums[i] = detail::consumed(stream, n);
            iters[r] += sum.total_iterations;
        }
        for (std::size_t i = 0; i + 1 < modes.size(); ++i) {
            diffs[r][i] = phi[i] - phi.back();
            if (sums[i] != std::vector<cplx>(sums.back().begin(), sums.back().begin() +
                                                                  static_cast<long>(modes[i])))
                consistent[r] = 0;
        }
    });
    for (std::size_t r = 0; r < R; ++r) {
        rep.total_iterations += iters[r];
        if (!consistent[r]) rep.streams_consistent = false;
    }
    detail::finish_rate_study(rep, spec.resolutions, diffs, false);
    return rep;
}

/**
 * Weak error in time at fixed T = M(τ)τ: paired differences φ(u^{M(τ)}) - φ(u^{M(τ_ref)})
 * with all step sizes driven by Brownian-bridge refinements of the coarsest grid.
 * invariant = true uses time averages over [burn_in_time, burn_in_time + t_average].
 */
inline RateStudyReport temporal_order_study(const StudySpec& spec, bool invariant = false) {
    spec.validate();
    RateStudyReport rep;
    rep.kind = invariant ? StudyKind::invariant_error_temporal : StudyKind::temporal_order;
    std::vector<double> taus = spec.resolutions;
    taus.push_back(spec.reference);
    const double base = taus.front();
    std::vector<int> levels;
    std::vector<StepConfig> cfgs;
    std::vector<std::size_t> burns, avgs;
    for (double tau : taus) {
        levels.push_back(detail::dyadic_level(base, tau));
        cfgs.push_back(detail::with_tau(spec.step, tau, spec.model.alpha));
        burns.push_back(invariant ? detail::steps_for(spec.burn_in_time, tau, "burn_in_time") : 0);
        avgs.push_back(invariant ? detail::steps_for(spec.t_average, tau, "t_average")
                                 : detail::steps_for(spec.t_final, tau, "t_final"));
    }
    const auto n = static_cast<std::size_t>(spec.model.n_modes);
    const auto lin = make_spectrum(spec.model);
    const auto noise = spec.noise.build(n);
    const std::size_t R = spec.n_replicas;
    std::vector<std::vector<double>> diffs(R, std::vector<double>(spec.resolutions.size()));
    std::vector<char> consistent(R, 1);
    std::vector<long long> iters(R, 0);
    parallel_for(R, [&](std::size_t r) {
        GridWorkspace ws(n);
        std::vector<double> phi(taus.size());
        std::vector<std::vector<cplx>> sums(taus.size());
        for (std::size_t i = 0; i < taus.size(); ++i) {
            NoiseStream stream(spec.seed, static_cast<std::uint32_t>(r), base, levels[i]);
            CompensatedSum acc;
            const std::size_t burn = burns[i];
            auto sum = run_trajectory(spec.initial_state(0, n), burn + avgs[i], stream, noise,
                                      spec.model, lin, ws, cfgs[i],
                                      [&](std::size_t k, const SpectralState& u, const StepReport&) {
                                          if (invariant && k > burn)
                                              acc.add(evaluate(spec.test_function, u));
                                      });
            phi[i] = invariant ? acc.value() / static_cast<double>(avgs[i])
                               : evaluate(spec.test_function, sum.final_state);
            sums[i] = detail::consumed(stream, n);
            iters[r] += sum.total_iterations;
        }
        for (std::size_t i = 0; i + 1 < taus.size(); ++i) {
            diffs[r][i] = phi[i] - phi.back();
            if (!detail::same_sums(sums[i], sums.back(), 1e-9)) consistent[r] = 0;
        }
    });
    for (std::size_t r = 0; r < R; ++r) {
        rep.total_iterations += iters[r];
        if (!consistent[r]) rep.streams_consistent = false;
    }
    detail::finish_rate_study(rep, spec.resolutions, diffs, true);
    return rep;
}

struct IncrementScaling {
    std::vector<double> taus;
    std::vector<double> mean_sq; ///< time- and ensemble-averaged ‖u^k - e^{-ατ}u^{k-1}‖_0²
    std::vector<double> stderr_;
    RateFit fit;
};

/**
 * Mean squared increment E‖u^k - e^{-ατ}u^{k-1}‖_0² near stationarity for each τ in
 * spec.resolutions: trajectories from 0, burn_in_time discarded, then t_average averaged.
 */
inline IncrementScaling increment_scaling_study(const StudySpec& spec) {
    spec.validate();
    const auto n = static_cast<std::size_t>(spec.model.n_modes);
    const auto lin = make_spectrum(spec.model);
    const auto noise = spec.noise.build(n);
    const std::size_t R = spec.n_replicas;
    IncrementScaling out;
    out.taus = spec.resolutions;
    for (double tau : out.taus) {
        const StepConfig cfg = detail::with_tau(spec.step, tau, spec.model.alpha);
        const std::size_t burn = detail::steps_for(spec.burn_in_time, tau, "burn_in_time");
        const std::size_t avg = detail::steps_for(spec.t_average, tau, "t_average");
        std::vector<double> v(R);
        parallel_for(R, [&](std::size_t r) {
            GridWorkspace ws(n);
            NoiseStream stream(spec.seed, static_cast<std::uint32_t>(r), tau);
            CompensatedSum acc;
            run_trajectory(SpectralState(n), burn + avg, stream, noise, spec.model, lin, ws, cfg,
                           [&](std::size_t k, const SpectralState&, const StepReport& rep) {
                               if (k > burn) acc.add(rep.increment_norm * rep.increment_norm);
                           });
            v[r] = acc.value() / static_cast<double>(avg);
        });
        const auto st = ensemble_reduce(v);
        out.mean_sq.push_back(st.mean);
        out.stderr_.push_back(st.stderr_);
    }
    out.fit = fit_rate(out.taus, out.mean_sq);
    return out;
}

// ---------------------------------------------------------------------------------------
// Operator bounds (exact symbol computations)

struct OperatorRow {
    char part = 'a';    ///< a: truncation, b: S_τ^k vs S(t_k) in L(Ḣ², L²), c: in L(Ḣ¹, Ḣ¹)
    int s = 0;
    std::size_t n = 0;
    double t = 0.0;
    double tau = 0.0;
    long k = 0;
    double value = 0.0;     ///< exact operator norm (per-mode supremum)
    double reference = 0.0; ///< closed form (a) or bound shape (b, c)
    double ratio = 0.0;     ///< value / reference shape, i.e. the constant C at this point
};

struct OperatorReport {
    std::vector<OperatorRow> rows;
    double a_max_equality_error = 0.0; ///< relative, closed form vs brute-force supremum
    double a_constant = 0.0;
    double a_spread = 0.0;             ///< max/min of C over the grid (per s)
    std::vector<double> b_constants;   ///< C(τ) = max_k ratio, per τ
    double b_spread = 0.0;
    double c_constant = 0.0;
    bool pass_a = false, pass_b = false, pass_c = false;
    bool pass() const { return pass_a && pass_b && pass_c; }
};

struct OperatorGrid {
    double alpha = 1.0;
    std::vector<int> s_values{1, 2};
    std::vector<std::size_t> n_values{4, 8, 16, 32, 64};
    std::vector<double> t_values{0.0, 0.5, 1.0, 2.0};
    std::vector<double> taus{0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625, 0.001953125,
                             0.0009765625};
    std::vector<long> ks{1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096};
    std::size_t sup_modes = 1 << 14; ///< modes scanned for the suprema
};

/// sup_m |r_m^k - e^{-(iμ_m+α)kτ}| |λ_m|^{-w} over m = 1..m_max.
inline double discrete_semigroup_gap(double alpha, double tau, long k, double w,
                                     std::size_t m_max) {
    double best = 0.0;
    const double t = static_cast<double>(k) * tau;
    for (std::size_t m = 1; m <= m_max; ++m) {
        const double mu = laplace_eigenvalue(m);
        const cplx exact = std::exp(cplx(-alpha * t, -mu * t));
        const double d = std::abs(s_tau_symbol(mu, alpha, tau, k) - exact);
        best = std::max(best, d * std::pow(std::abs(cplx(alpha, mu)), -w));
    }
    return best;
}

inline OperatorReport operator_check(const OperatorGrid& g = {}) {
    OperatorReport rep;
    // (a) ‖S(t)(I - π_N)‖_{L(Ḣ^s, L²)} = sup_{m>N} e^{-αt}|λ_m|^{-s/2}
    for (int s : g.s_values) {
        double cmin = INFINITY, cmax = 0.0;
        for (std::size_t n : g.n_values)
            for (double t : g.t_values) {
                double brute = 0.0;
                for (std::size_t m = n + 1; m <= n + g.sup_modes; ++m)
                    brute = std::max(brute, std::exp(-g.alpha * t) *
                                                std::pow(std::abs(cplx(g.alpha, laplace_eigenvalue(m))),
                                                         -0.5 * s));
                const double closed = std::exp(-g.alpha * t) *
                                      std::pow(std::abs(cplx(g.alpha, laplace_eigenvalue(n + 1))), -0.5 * s);
                OperatorRow row{'a', s, n, t, 0.0, 0, brute, closed, 0.0};
                row.ratio = brute * std::pow(static_cast<double>(n), s) * std::exp(g.alpha * t);
                rep.a_max_equality_error =
                    std::max(rep.a_max_equality_error, std::abs(brute - closed) / closed);
                cmin = std::min(cmin, row.ratio);
                cmax = std::max(cmax, row.ratio);
                rep.rows.push_back(row);
            }
        rep.a_constant = std::max(rep.a_constant, cmax);
        rep.a_spread = std::max(rep.a_spread, cmax / cmin);
    }
    rep.pass_a = rep.a_max_equality_error <= 1e-12 && rep.a_spread < 2.0;

    // (b) sup_m |r^k - e^{-(iμ+α)t_k}| / |λ_m| against (t+τ)^{1/2} e^{-αt} τ^{1/2}
    // (c) sup_m |r^k - e^{-(iμ+α)t_k}| against e^{-αt}
    for (double tau : g.taus) {
        double cb = 0.0;
        for (long k : g.ks) {
            const double t = static_cast<double>(k) * tau;
            const double vb = discrete_semigroup_gap(g.alpha, tau, k, 1.0, g.sup_modes);
            const double shape_b = std::sqrt(t + tau) * std::exp(-g.alpha * t) * std::sqrt(tau);
            OperatorRow rb{'b', 2, 0, t, tau, k, vb, shape_b, vb / shape_b};
            cb = std::max(cb, rb.ratio);
            rep.rows.push_back(rb);
            const double vc = discrete_semigroup_gap(g.alpha, tau, k, 0.0, g.sup_modes);
            const double shape_c = std::exp(-g.alpha * t);
            OperatorRow rc{'c', 1, 0, t, tau, k, vc, shape_c, vc / shape_c};
            rep.c_constant = std::max(rep.c_constant, rc.ratio);
            rep.rows.push_back(rc);
        }
        rep.b_constants.push_back(cb);
    }
    const auto [bmin, bmax] = std::minmax_element(rep.b_constants.begin(), rep.b_constants.end());
    rep.b_spread = rep.b_constants.empty() ? 0.0 : *bmax / *bmin;
    rep.pass_b = !rep.b_constants.empty() && rep.b_spread < 2.0;
    rep.pass_c = rep.c_constant <= 4.0;
    return rep;
}

} // namespace snls
