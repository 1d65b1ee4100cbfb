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
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "snls/errors.hpp"
#include "snls/philox.hpp"
#include "snls/spectral.hpp"

namespace snls {

enum class SpectrumKind { power, custom };

/// Per-mode variance rates η_m of π_N Q^{1/2} dW = Σ √η_m e_m dβ_m.
struct NoiseSpectrum {
    std::vector<double> eta;
    SpectrumKind kind = SpectrumKind::custom;
    double p = 0.0;
    double scale = 1.0;
    /// Set when Σ|λ_m|²η_m diverges as N → ∞ (power decay p ≤ 5).
    bool hs2_tail_diverges = false;

    std::size_t size() const noexcept { return eta.size(); }

    double trace() const {
        double s = 0.0;
        for (double e : eta) s += e;
        return s;
    }

    /// ‖Q^{1/2}‖_{HS(L², Ḣ^s)} restricted to the represented modes.
    double hs_norm(const LinearSpectrum& spec, int s) const {
        if (s < 0 || s > 3) throw UsageError("hs_norm supports s in {0,1,2,3}");
        if (spec.size() < eta.size()) throw UsageError("hs_norm: spectrum shorter than noise");
        double acc = 0.0;
        for (std::size_t i = 0; i < eta.size(); ++i)
            acc += std::pow(spec.abs_lambda[i], s) * eta[i];
        return std::sqrt(acc);
    }

    /// The first n rates (the noise seen by an n-mode Galerkin system).
    NoiseSpectrum truncated(std::size_t n) const {
        if (n > eta.size()) throw UsageError("noise spectrum shorter than requested modes");
        NoiseSpectrum t = *this;
        t.eta.resize(n);
        return t;
    }
};

inline NoiseSpectrum make_power_spectrum(std::size_t n_modes, double p, double scale) {
    if (!(p >= 0.0)) throw ConfigError("noise power p must be nonnegative");
    if (!(scale > 0.0)) throw ConfigError("noise scale must be positive");
    NoiseSpectrum s;
    s.kind = SpectrumKind::power;
    s.p = p;
    s.scale = scale;
    s.eta.resize(n_modes);
    for (std::size_t m = 1; m <= n_modes; ++m)
        s.eta[m - 1] = scale * std::pow(static_cast<double>(m), -p);
    // |λ_m|² η_m ~ m^{4-p}
    s.hs2_tail_diverges = p <= 5.0;
    return s;
}

inline NoiseSpectrum make_custom_spectrum(std::vector<double> eta) {
    for (double e : eta)
        if (!(e >= 0.0) || !std::isfinite(e)) throw ConfigError("noise rates must be finite and >= 0");
    NoiseSpectrum s;
    s.kind = SpectrumKind::custom;
    s.eta = std::move(eta);
    return s;
}

/**
 * Seeded source of complex Brownian increments β_m(t_k) - β_m(t_{k-1}), each real
 * component N(0, τ), on the dyadic grid τ = base_step · 2^{-level}.
 *
 * Every variate is addressed by (seed, replica, mode, level, index) through Philox,
 * and finer levels are built by Brownian-bridge midpoint splitting of coarser ones.
 * Hence a level-L increment is the sum of its two level-(L+1) children, mode m of an
 * N-mode run is the same path for every N ≥ m, and sibling replicas are independent.
 */
class NoiseStream {
public:
    NoiseStream(std::uint64_t master_seed, std::uint32_t replica, double base_step,
                int level = 0)
        : seed_(master_seed), replica_(replica), base_step_(base_step), level_(level) {
        if (!(base_step > 0.0)) throw ConfigError("noise base step must be positive");
        if (level < 0 || level > 30) throw ConfigError("noise level must be in [0, 30]");
    }

    std::uint64_t master_seed() const noexcept { return seed_; }
    std::uint32_t replica_index() const noexcept { return replica_; }
    int level() const noexcept { return level_; }
    double base_step() const noexcept { return base_step_; }
    double tau() const noexcept { return std::ldexp(base_step_, -level_); }
    std::uint64_t cursor() const noexcept { return cursor_; }

    /// Repositions the stream at step k of its own level.
    void seek(std::uint64_t k) noexcept { cursor_ = k; }

    /// Brownian increments of modes 1..out.size() over the current step; advances.
    void next_brownian(std::span<cplx> out) {
        const std::uint64_t per_block = std::uint64_t{1} << level_;
        const std::uint64_t base = cursor_ >> level_;
        if (!block_valid_ || block_base_ != base || block_modes_ != out.size())
            fill_block(out.size(), base);
        const std::size_t off = static_cast<std::size_t>(cursor_ & (per_block - 1));
        if (checksum_.size() < out.size()) checksum_.resize(out.size());
        for (std::size_t m = 0; m < out.size(); ++m) {
            out[m] = block_[m * per_block + off];
            checksum_[m].add(out[m]);
        }
        ++cursor_;
    }

    /// Sum of all increments consumed so far for mode m (1-based), i.e. β_m(t_cursor)
    /// when started from cursor 0.
    cplx consumed_sum(std::size_t m) const {
        if (m < 1 || m > checksum_.size()) return 0.0;
        return checksum_[m - 1].value();
    }

    /// Standard normal pair addressed by (mode, level, index); exposed for tests.
    std::pair<double, double> normals(std::uint32_t mode, int level,
                                      std::uint64_t index) const noexcept {
        const Philox4x32::counter_type ctr{
            static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
            replica_, (mode & 0x00FFFFFFu) | (static_cast<std::uint32_t>(level) << 24)};
        const Philox4x32::key_type key{static_cast<std::uint32_t>(seed_),
                                       static_cast<std::uint32_t>(seed_ >> 32)};
        return normal_pair(Philox4x32::apply(ctr, key));
    }

private:
    struct CompensatedComplex {
        double re = 0.0, re_c = 0.0, im = 0.0, im_c = 0.0;
        static void add1(double& s, double& c, double x) {
            const double t = s + x;
            c += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
            s = t;
        }
        void add(cplx z) {
            add1(re, re_c, z.real());
            add1(im, im_c, z.imag());
        }
        cplx value() const { return {re + re_c, im + im_c}; }
    };

    void fill_block(std::size_t n_modes, std::uint64_t base) {
        const std::size_t per_block = std::size_t{1} << level_;
        block_.assign(n_modes * per_block, cplx(0.0, 0.0));
        for (std::size_t m = 0; m < n_modes; ++m) {
            cplx* b = block_.data() + m * per_block;
            const auto mode = static_cast<std::uint32_t>(m + 1);
            const auto [z0, z1] = normals(mode, 0, base);
            b[0] = std::sqrt(base_step_) * cplx(z0, z1);
            for (int l = 1; l <= level_; ++l) {
                const std::size_t parents = std::size_t{1} << (l - 1);
                const double s = 0.5 * std::sqrt(std::ldexp(base_step_, -(l - 1)));
                for (std::size_t i = parents; i-- > 0;) {
                    const cplx d = 0.5 * b[i];
                    const auto [y0, y1] = normals(mode, l, base * parents + i);
                    const cplx z = s * cplx(y0, y1);
                    b[2 * i] = d + z;
                    b[2 * i + 1] = d - z;
                }
            }
        }
        block_valid_ = true;
        block_base_ = base;
        block_modes_ = n_modes;
    }

    std::uint64_t seed_;
    std::uint32_t replica_;
    double base_step_;
    int level_;
    std::uint64_t cursor_ = 0;

    std::vector<cplx> block_;
    bool block_valid_ = false;
    std::uint64_t block_base_ = 0;
    std::size_t block_modes_ = 0;
    std::vector<CompensatedComplex> checksum_;
};

/// The same Brownian paths at half the step; the new cursor sits at the same time.
inline NoiseStream refine_stream(const NoiseStream& s) {
    NoiseStream fine(s.master_seed(), s.replica_index(), s.base_step(), s.level() + 1);
    fine.seek(2 * s.cursor());
    return fine;
}

/// π_N Q^{1/2} δW_k in Galerkin coordinates: dw_m = √η_m δβ_m.
struct NoiseIncrement {
    std::vector<cplx> dw;

    NoiseIncrement() = default;
    explicit NoiseIncrement(std::size_t n) : dw(n, cplx(0.0, 0.0)) {}
    std::size_t size() const noexcept { return dw.size(); }
};

inline void check_tau(const NoiseStream& stream, double tau) {
    if (!(std::abs(tau - stream.tau()) <= 1e-12 * stream.tau()))
        throw UsageError("time step " + std::to_string(tau) +
                         " does not match the noise stream spacing " +
                         std::to_string(stream.tau()));
}

inline void sample_increment(NoiseStream& stream, const NoiseSpectrum& spectrum, double tau,
                             NoiseIncrement& out) {
    check_tau(stream, tau);
    out.dw.resize(spectrum.size());
    stream.next_brownian(out.dw);
    for (std::size_t m = 0; m < out.dw.size(); ++m) out.dw[m] *= std::sqrt(spectrum.eta[m]);
}

inline NoiseIncrement sample_increment(NoiseStream& stream, const NoiseSpectrum& spectrum,
                                       double tau) {
    NoiseIncrement inc(spectrum.size());
    sample_increment(stream, spectrum, tau, inc);
    return inc;
}

} // namespace snls
