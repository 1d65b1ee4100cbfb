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
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "snls/errors.hpp"

namespace snls {

using cplx = std::complex<double>;

/// Parameters of du = (i Δu - αu + iλ|u|²u) dt + Q^{1/2} dW on (0,1), Galerkin-truncated to N modes.
struct ModelParams {
    double alpha = 1.0;
    int lambda = -1;
    int n_modes = 16;

    void validate() const {
        if (!(alpha > 0.0) || !std::isfinite(alpha))
            throw ConfigError("alpha must be a positive finite number (damping is required)");
        if (lambda < -1 || lambda > 1)
            throw ConfigError("lambda must be one of -1, 0, 1");
        if (n_modes < 1)
            throw ConfigError("n_modes must be positive");
    }

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Eigen-data of A = -iΔ + α in the Dirichlet sine basis e_m(x) = √2 sin(mπx).
struct LinearSpectrum {
    double alpha = 1.0;
    std::vector<double> mu;         ///< (mπ)², eigenvalues of -Δ
    std::vector<cplx> lambda_op;    ///< i μ_m + α
    std::vector<double> abs_lambda; ///< |λ_m|

    std::size_t size() const noexcept { return mu.size(); }
};

/// μ_m = (mπ)² for a 1-based mode index.
inline double laplace_eigenvalue(std::size_t m) {
    const double k = static_cast<double>(m) * std::numbers::pi;
    return k * k;
}

inline LinearSpectrum make_spectrum(double alpha, std::size_t n_modes) {
    LinearSpectrum s;
    s.alpha = alpha;
    s.mu.resize(n_modes);
    s.lambda_op.resize(n_modes);
    s.abs_lambda.resize(n_modes);
    for (std::size_t i = 0; i < n_modes; ++i) {
        const double mu = laplace_eigenvalue(i + 1);
        s.mu[i] = mu;
        s.lambda_op[i] = cplx(alpha, mu);
        s.abs_lambda[i] = std::hypot(mu, alpha);
    }
    return s;
}

inline LinearSpectrum make_spectrum(const ModelParams& params) {
    params.validate();
    return make_spectrum(params.alpha, static_cast<std::size_t>(params.n_modes));
}

/// Galerkin coefficients (u, e_m), m = 1..N, of a function in V_N.
class SpectralState {
public:
    SpectralState() = default;
    explicit SpectralState(std::size_t n) : c_(n, cplx(0.0, 0.0)) {}
    explicit SpectralState(std::vector<cplx> coeffs) : c_(std::move(coeffs)) {}

    /// The basis function e_m (1-based m) in V_N.
    static SpectralState basis(std::size_t n, std::size_t m, cplx weight = 1.0) {
        if (m < 1 || m > n) throw UsageError("basis index out of range");
        SpectralState s(n);
        s.c_[m - 1] = weight;
        return s;
    }

    std::size_t size() const noexcept { return c_.size(); }
    cplx& operator[](std::size_t i) { return c_[i]; }
    const cplx& operator[](std::size_t i) const { return c_[i]; }
    std::span<cplx> coeffs() noexcept { return c_; }
    std::span<const cplx> coeffs() const noexcept { return c_; }
    const std::vector<cplx>& vector() const noexcept { return c_; }

    bool is_finite() const noexcept {
        for (const auto& z : c_)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
        return true;
    }

    SpectralState& operator+=(const SpectralState& o) {
        check_same(o);
        for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
        return *this;
    }
    SpectralState& operator-=(const SpectralState& o) {
        check_same(o);
        for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
        return *this;
    }
    SpectralState& operator*=(cplx a) {
        for (auto& z : c_) z *= a;
        return *this;
    }
    friend SpectralState operator+(SpectralState a, const SpectralState& b) { return a += b; }
    friend SpectralState operator-(SpectralState a, const SpectralState& b) { return a -= b; }
    friend SpectralState operator*(cplx a, SpectralState b) { return b *= a; }

    friend bool operator==(const SpectralState&, const SpectralState&) = default;

private:
    void check_same(const SpectralState& o) const {
        if (o.c_.size() != c_.size()) throw UsageError("spectral states of different length");
    }

    std::vector<cplx> c_;
};

/// ‖u‖_0², the L² mass of u_N.
inline double mass(const SpectralState& u) {
    double s = 0.0;
    for (const auto& z : u.coeffs()) s += std::norm(z);
    return s;
}

/// (u, v) = ∫ u v̄ dx.
inline cplx inner(const SpectralState& u, const SpectralState& v) {
    if (u.size() != v.size()) throw UsageError("inner product of states of different length");
    cplx s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * std::conj(v[i]);
    return s;
}

/// ‖u‖_s = (Σ |a_m|² |λ_m|^s)^{1/2}.
inline double sobolev_norm(const SpectralState& u, const LinearSpectrum& spec, int s) {
    if (s < 0 || s > 3) throw UsageError("sobolev_norm supports s in {0,1,2,3}");
    if (u.size() > spec.size()) throw UsageError("state longer than spectrum");
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        double w = 1.0;
        for (int j = 0; j < s; ++j) w *= spec.abs_lambda[i];
        acc += std::norm(u[i]) * w;
    }
    return std::sqrt(acc);
}

/// S(t) = e^{-tA}: multiplies mode m by e^{-(iμ_m + α)t}.
inline SpectralState apply_semigroup(SpectralState u, const LinearSpectrum& spec, double t) {
    if (!(t >= 0.0)) throw UsageError("apply_semigroup requires t >= 0");
    const double decay = std::exp(-spec.alpha * t);
    for (std::size_t i = 0; i < u.size(); ++i)
        u[i] *= std::polar(decay, -spec.mu[i] * t);
    return u;
}

/// Symbol of S_τ^k on mode with eigenvalue mu: (e^{-ατ} / (1 + iμτ))^k.
inline cplx s_tau_symbol(double mu, double alpha, double tau, long k) {
    const cplx r = std::exp(-alpha * tau) / cplx(1.0, mu * tau);
    const double kk = static_cast<double>(k);
    return std::polar(std::pow(std::abs(r), kk), kk * std::arg(r));
}

/// S_τ^k with S_τ = (Id - iτΔ)^{-1} e^{-ατ}.
inline SpectralState apply_s_tau(SpectralState u, const LinearSpectrum& spec, double tau,
                                 long k) {
    if (!(tau > 0.0)) throw UsageError("apply_s_tau requires tau > 0");
    if (k < 1) throw UsageError("apply_s_tau requires k >= 1");
    for (std::size_t i = 0; i < u.size(); ++i)
        u[i] *= s_tau_symbol(spec.mu[i], spec.alpha, tau, k);
    return u;
}

/// π_M: keep the first n_target coefficients.
inline SpectralState project(const SpectralState& u, std::size_t n_target) {
    if (n_target > u.size()) throw UsageError("projection target exceeds state length");
    auto c = u.coeffs();
    return SpectralState(std::vector<cplx>(c.begin(), c.begin() + static_cast<long>(n_target)));
}

/// Zero-pads (or truncates) u to n coefficients.
inline SpectralState resize(const SpectralState& u, std::size_t n) {
    std::vector<cplx> c(n, cplx(0.0, 0.0));
    for (std::size_t i = 0; i < std::min(n, u.size()); ++i) c[i] = u[i];
    return SpectralState(std::move(c));
}

} // namespace snls
