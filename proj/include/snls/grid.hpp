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

#include <fftw3.h>

#include <cmath>
#include <cstddef>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

#include "snls/errors.hpp"
#include "snls/spectral.hpp"

namespace snls {

namespace detail {

// The FFTW planner is not re-entrant; plan execution is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(fftw_complex* p) const noexcept { fftw_free(p); }
};

struct FftwPlanDestroy {
    void operator()(fftw_plan p) const noexcept {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(p);
    }
};

using FftwBuffer = std::unique_ptr<fftw_complex[], FftwFree>;
using FftwPlan = std::unique_ptr<std::remove_pointer_t<fftw_plan>, FftwPlanDestroy>;

inline bool is_7_smooth(std::size_t n) {
    if (n == 0) return false;
    for (std::size_t p : {2u, 3u, 5u, 7u})
        while (n % p == 0) n /= p;
    return n == 1;
}

} // namespace detail

/// Default collocation size: the smallest M ≥ 4N-1 whose DST-I length M+1 is 7-smooth.
inline std::size_t default_grid_size(std::size_t n_modes) {
    if (n_modes == 0) throw ConfigError("a grid needs at least one mode");
    std::size_t m = 4 * n_modes - 1;
    while (!detail::is_7_smooth(m + 1)) ++m;
    return m;
}

/**
 * Collocation grid x_j = j/(M+1), j = 1..M, with a type-I discrete sine transform
 * between Galerkin coefficients and point values (one complex FFT of length 2(M+1)).
 *
 * Point values of a sine series of band limit K are analysed exactly onto the first
 * N modes whenever K + N < 2(M+1), and cosine series of band limit K are integrated
 * exactly by the trapezoidal rule whenever K < 2(M+1). With M ≥ 2N both the cubic
 * projection (K = 3N) and quartic integrals (K = 4N) are exact.
 *
 * Single owner: the scratch buffers make concurrent use of one workspace a data race.
 */
class GridWorkspace {
public:
    explicit GridWorkspace(std::size_t n_modes, std::size_t grid_size = 0)
        : n_modes_(n_modes), m_(grid_size == 0 ? default_grid_size(n_modes) : grid_size) {
        if (n_modes_ == 0) throw ConfigError("GridWorkspace needs at least one mode");
        if (m_ < n_modes_) throw ConfigError("grid_size must be at least n_modes");
        const std::size_t len = 2 * (m_ + 1);
        in_.reset(fftw_alloc_complex(len));
        out_.reset(fftw_alloc_complex(len));
        if (!in_ || !out_) throw std::bad_alloc();
        {
            std::lock_guard lock(detail::fftw_planner_mutex());
            // ESTIMATE keeps plans (and hence rounding) identical from run to run.
            plan_.reset(fftw_plan_dft_1d(static_cast<int>(len), in_.get(), out_.get(),
                                         FFTW_FORWARD, FFTW_ESTIMATE));
        }
        if (!plan_) throw ConfigError("FFTW could not plan the sine transform");
        phys_a_.resize(m_);
        phys_b_.resize(m_);
        phys_c_.resize(m_);
    }

    GridWorkspace(GridWorkspace&&) noexcept = default;
    GridWorkspace& operator=(GridWorkspace&&) noexcept = default;

    std::size_t n_modes() const noexcept { return n_modes_; }
    std::size_t grid_size() const noexcept { return m_; }
    double node(std::size_t j) const { return static_cast<double>(j + 1) / static_cast<double>(m_ + 1); }
    /// Trapezoidal weight 1/(M+1).
    double weight() const noexcept { return 1.0 / static_cast<double>(m_ + 1); }

    /// Point values u(x_j) of Σ a_m e_m.
    void synthesize(std::span<const cplx> coeffs, std::span<cplx> phys) {
        if (coeffs.size() > m_ || phys.size() != m_)
            throw UsageError("synthesize: size mismatch with grid");
        load_odd(coeffs);
        fftw_execute(plan_.get());
        unload(phys, std::numbers::sqrt2);
    }

    void synthesize(const SpectralState& u, std::span<cplx> phys) {
        synthesize(u.coeffs(), phys);
    }

    /// First coeffs.size() Galerkin coefficients of the point values phys.
    void analyze(std::span<const cplx> phys, std::span<cplx> coeffs) {
        if (coeffs.size() > m_ || phys.size() != m_)
            throw UsageError("analyze: size mismatch with grid");
        load_odd(phys);
        fftw_execute(plan_.get());
        unload(coeffs, std::numbers::sqrt2 / static_cast<double>(m_ + 1));
    }

    SpectralState analyze(std::span<const cplx> phys, std::size_t n_out) {
        SpectralState s(n_out);
        analyze(phys, s.coeffs());
        return s;
    }

    /// Trapezoidal ∫₀¹ f dx of point values (endpoint values are zero).
    double integrate(std::span<const double> values) const {
        double s = 0.0;
        for (double v : values) s += v;
        return s * weight();
    }

    // Scratch buffers of length grid_size(); contents are clobbered by library calls.
    std::span<cplx> scratch_a() noexcept { return phys_a_; }
    std::span<cplx> scratch_b() noexcept { return phys_b_; }
    std::span<cplx> scratch_c() noexcept { return phys_c_; }

private:
    // The DST-I S_k = Σ_{j=1}^{M} x_j sin(πjk/(M+1)) of a complex sequence is i/2 times
    // the forward DFT of its odd extension of length 2(M+1).
    void load_odd(std::span<const cplx> x) {
        fftw_complex* in = in_.get();
        const std::size_t len = 2 * (m_ + 1);
        for (std::size_t j = 0; j < len; ++j) in[j][0] = in[j][1] = 0.0;
        for (std::size_t j = 1; j <= x.size(); ++j) {
            in[j][0] = x[j - 1].real();
            in[j][1] = x[j - 1].imag();
            in[len - j][0] = -x[j - 1].real();
            in[len - j][1] = -x[j - 1].imag();
        }
    }

    // dst[k-1] = scale · S_k = scale · (i/2) Y_k
    void unload(std::span<cplx> dst, double scale) const {
        const fftw_complex* out = out_.get();
        const double h = 0.5 * scale;
        for (std::size_t k = 1; k <= dst.size(); ++k)
            dst[k - 1] = cplx(-h * out[k][1], h * out[k][0]);
    }

    std::size_t n_modes_;
    std::size_t m_;
    detail::FftwBuffer in_;
    detail::FftwBuffer out_;
    detail::FftwPlan plan_;
    std::vector<cplx> phys_a_, phys_b_, phys_c_;
};

inline void require_grid(const GridWorkspace& ws, std::size_t needed, const char* what) {
    if (ws.grid_size() < needed)
        throw ConfigError(std::string(what) + ": grid_size " + std::to_string(ws.grid_size()) +
                          " is below the exactness bound " + std::to_string(needed));
}

/// π_N(|u|²u) without the iλ factor, exact on a grid of at least 3N points.
inline SpectralState galerkin_cubic(const SpectralState& u, GridWorkspace& ws) {
    require_grid(ws, 3 * u.size(), "galerkin_cubic");
    auto phys = ws.scratch_a();
    ws.synthesize(u, phys);
    for (auto& z : phys) z *= std::norm(z);
    return ws.analyze(phys, u.size());
}

/// π_N( (|u|² + w)/2 · u ) for a precomputed nonnegative weight w on the grid.
inline void galerkin_cubic_mix(const SpectralState& u, std::span<const double> weight,
                               GridWorkspace& ws, SpectralState& out) {
    auto phys = ws.scratch_a();
    ws.synthesize(u, phys);
    for (std::size_t j = 0; j < phys.size(); ++j)
        phys[j] *= 0.5 * (std::norm(phys[j]) + weight[j]);
    ws.analyze(phys, out.coeffs());
}

/// ‖u‖_{L⁴}⁴ = ∫|u|⁴ dx, exact on a grid of at least 2N points.
inline double l4_fourth(const SpectralState& u, GridWorkspace& ws) {
    require_grid(ws, 2 * u.size(), "l4_norm");
    auto phys = ws.scratch_a();
    ws.synthesize(u, phys);
    double s = 0.0;
    for (const auto& z : phys) {
        const double a = std::norm(z);
        s += a * a;
    }
    return s * ws.weight();
}

inline double l4_norm(const SpectralState& u, GridWorkspace& ws) {
    return std::sqrt(std::sqrt(l4_fourth(u, ws)));
}

} // namespace snls
