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

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "snls/errors.hpp"
#include "snls/grid.hpp"
#include "snls/philox.hpp"
#include "snls/spectral.hpp"

namespace snls {

/// c₀ in ℋ(u) = ½‖∇u‖² - (λ/4)‖u‖⁴_{L⁴} + c₀‖u‖⁶_0. Value returned by
/// calibrate_c0(1'000'000, 2026).
inline constexpr double kDefaultC0 = 2.0;

struct ObservableRecord {
    double mass = 0.0;      ///< ‖u‖_0²
    double h1 = 0.0;        ///< ‖u‖_1
    double h2 = 0.0;        ///< ‖u‖_2
    double grad_sq = 0.0;   ///< ‖∇u‖_0²
    double l4_fourth = 0.0; ///< ‖u‖_{L⁴}⁴
    double ham_mod = 0.0;   ///< ℋ(u)
    double ham_disc = 0.0;  ///< ℋ_k = ‖∇u‖² - (λ/2)‖u‖⁴_{L⁴}
    double f_val = 0.0;     ///< ‖Δu‖² + λ Re∫ Δū |u|²u dx
};

inline double grad_sq(const SpectralState& u, const LinearSpectrum& spec) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += spec.mu[i] * std::norm(u[i]);
    return s;
}

inline double laplacian_sq(const SpectralState& u, const LinearSpectrum& spec) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += spec.mu[i] * spec.mu[i] * std::norm(u[i]);
    return s;
}

/// ℋ_k for the given λ.
inline double discrete_hamiltonian(const SpectralState& u, const LinearSpectrum& spec,
                                   GridWorkspace& ws, int lambda) {
    const double g = grad_sq(u, spec);
    if (lambda == 0) return g;
    return g - 0.5 * lambda * l4_fourth(u, ws);
}

/// Re∫ Δū |u|²u dx; the integrand is a cosine series of band 4N, exact for M ≥ 2N.
inline double laplacian_cubic_cross(const SpectralState& u, const LinearSpectrum& spec,
                                    GridWorkspace& ws) {
    require_grid(ws, 2 * u.size(), "laplacian_cubic_cross");
    auto pu = ws.scratch_b();
    auto pl = ws.scratch_c();
    ws.synthesize(u, pu);
    SpectralState lap(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) lap[i] = -spec.mu[i] * u[i];
    ws.synthesize(lap, pl);
    double s = 0.0;
    for (std::size_t j = 0; j < pu.size(); ++j)
        s += (std::conj(pl[j]) * pu[j]).real() * std::norm(pu[j]);
    return s * ws.weight();
}

inline ObservableRecord record(const SpectralState& u, const LinearSpectrum& spec,
                               GridWorkspace& ws, const ModelParams& params,
                               double c0 = kDefaultC0) {
    ObservableRecord r;
    r.mass = mass(u);
    r.h1 = sobolev_norm(u, spec, 1);
    r.h2 = sobolev_norm(u, spec, 2);
    r.grad_sq = grad_sq(u, spec);
    r.l4_fourth = l4_fourth(u, ws);
    const double lam = params.lambda;
    r.ham_mod = 0.5 * r.grad_sq - 0.25 * lam * r.l4_fourth + c0 * r.mass * r.mass * r.mass;
    r.ham_disc = r.grad_sq - 0.5 * lam * r.l4_fourth;
    r.f_val = laplacian_sq(u, spec) + (lam == 0 ? 0.0 : lam * laplacian_cubic_cross(u, spec, ws));
    return r;
}

/// Bounded test functionals with bounded first and second derivatives on L².
enum class TestFunction { exp_neg_mass, inv_mass, sin_mode1 };

inline constexpr std::array<TestFunction, 3> kAllTestFunctions{
    TestFunction::exp_neg_mass, TestFunction::inv_mass, TestFunction::sin_mode1};

inline std::string_view name(TestFunction f) {
    switch (f) {
    case TestFunction::exp_neg_mass: return "exp_neg_mass";
    case TestFunction::inv_mass: return "inv_mass";
    case TestFunction::sin_mode1: return "sin_mode1";
    }
    return "?";
}

inline TestFunction parse_test_function(std::string_view s) {
    for (auto f : kAllTestFunctions)
        if (name(f) == s) return f;
    throw ConfigError("unknown test function '" + std::string(s) + "'");
}

inline double evaluate(TestFunction f, const SpectralState& u) {
    switch (f) {
    case TestFunction::exp_neg_mass: return std::exp(-mass(u));
    case TestFunction::inv_mass: return 1.0 / (1.0 + mass(u));
    case TestFunction::sin_mode1: return u.size() ? std::sin(u[0].real()) : 0.0;
    }
    return 0.0;
}

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        comp_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Birkhoff averages (1/K) Σ_k φ(u^k) over steps past the burn-in.
class TimeAverage {
public:
    explicit TimeAverage(std::size_t n_channels, std::size_t burn_in = 0)
        : burn_in_(burn_in), sums_(n_channels) {}

    std::size_t burn_in() const noexcept { return burn_in_; }
    std::size_t count() const noexcept { return count_; }
    std::size_t channels() const noexcept { return sums_.size(); }

    /// Adds the sample of step `step` if step ≥ burn_in.
    void accumulate(std::size_t step, std::span<const double> values) {
        if (values.size() != sums_.size()) throw UsageError("TimeAverage: channel count mismatch");
        if (step < burn_in_) return;
        for (std::size_t i = 0; i < values.size(); ++i) sums_[i].add(values[i]);
        ++count_;
    }

    double mean(std::size_t channel) const {
        if (count_ == 0) throw UsageError("TimeAverage: no samples accumulated");
        return sums_.at(channel).value() / static_cast<double>(count_);
    }

private:
    std::size_t burn_in_;
    std::size_t count_ = 0;
    std::vector<CompensatedSum> sums_;
};

/// Channels of ObservableRecord followed by the three test functions, in CSV order.
inline constexpr std::array<std::string_view, 11> kRecordChannels{
    "mass", "grad_sq", "l4_fourth", "ham_disc", "ham_mod", "h2", "f_val",
    "phi_exp_neg_mass", "phi_inv_mass", "phi_sin_mode1", "h1"};

inline std::array<double, 11> channel_values(const ObservableRecord& r, const SpectralState& u) {
    return {r.mass, r.grad_sq, r.l4_fourth, r.ham_disc, r.ham_mod, r.h2, r.f_val,
            evaluate(TestFunction::exp_neg_mass, u), evaluate(TestFunction::inv_mass, u),
            evaluate(TestFunction::sin_mode1, u), r.h1};
}

struct EnsembleStats {
    double mean = 0.0;
    double variance = 0.0;
    double stderr_ = 0.0;
    std::size_t n_replicas = 0;
};

inline EnsembleStats ensemble_reduce(std::span<const double> values) {
    if (values.size() < 2) throw UsageError("ensemble_reduce needs at least two values");
    CompensatedSum s;
    for (double v : values) s.add(v);
    const double n = static_cast<double>(values.size());
    const double mean = s.value() / n;
    CompensatedSum q;
    for (double v : values) q.add((v - mean) * (v - mean));
    EnsembleStats e;
    e.mean = mean;
    e.variance = q.value() / (n - 1.0);
    e.stderr_ = std::sqrt(e.variance / n);
    e.n_replicas = values.size();
    return e;
}

/// Smallest c₀ = 2^j such that ‖u‖⁴_{L⁴} ≤ ¼‖∇u‖² + ½c₀‖u‖⁶ holds for every rescaling
/// s·u of n_states random states, then doubled. For fixed shape the worst scale needs
/// c₀ ≥ 2‖u‖⁸_{L⁴} / (‖∇u‖² ‖u‖⁶).
inline double calibrate_c0(std::size_t n_states, std::uint64_t seed, std::size_t max_modes = 16) {
    std::vector<GridWorkspace> grids;
    for (std::size_t n = 1; n <= max_modes; ++n) grids.emplace_back(n);
    const auto spec = make_spectrum(1.0, max_modes);
    double worst = 0.0;
    for (std::size_t i = 0; i < n_states; ++i) {
        const Philox4x32::key_type key{static_cast<std::uint32_t>(seed),
                                       static_cast<std::uint32_t>(seed >> 32)};
        const std::uint32_t lo = static_cast<std::uint32_t>(i);
        const std::uint32_t hi = static_cast<std::uint32_t>(i >> 32);
        const auto shape = Philox4x32::apply({lo, hi, 0xC0u, 0u}, key);
        const std::size_t n = 1 + shape[0] % max_modes;
        const double decay = 3.0 * uniform_open(shape[1], shape[2]);
        auto draw = [&](std::uint32_t j) {
            return normal_pair(Philox4x32::apply({lo, hi, 0xC1u, j}, key));
        };
        SpectralState u(n);
        for (std::size_t m = 0; m < n; ++m) {
            const auto [a, b] = draw(static_cast<std::uint32_t>(m));
            u[m] = cplx(a, b) * std::pow(static_cast<double>(m + 1), -decay);
        }
        const double mss = mass(u);
        const double g = grad_sq(u, spec);
        if (!(mss > 0.0) || !(g > 0.0)) continue;
        const double a = l4_fourth(u, grids[n - 1]);
        worst = std::max(worst, 2.0 * a * a / (g * mss * mss * mss));
    }
    double c0 = 1.0 / 1024.0;
    while (c0 < worst) c0 *= 2.0;
    return 2.0 * c0;
}

} // namespace snls
