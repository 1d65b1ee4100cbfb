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

#include <catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "snls/grid.hpp"
#include "snls/philox.hpp"

using namespace snls;
using Catch::Approx;

namespace {

// Direct O(NM) sine sums.
std::vector<cplx> dense_synthesize(const SpectralState& u, std::size_t m_grid) {
    std::vector<cplx> out(m_grid);
    for (std::size_t j = 0; j < m_grid; ++j) {
        const double x = static_cast<double>(j + 1) / static_cast<double>(m_grid + 1);
        for (std::size_t m = 0; m < u.size(); ++m)
            out[j] += u[m] * std::sqrt(2.0) * std::sin(static_cast<double>(m + 1) * std::numbers::pi * x);
    }
    return out;
}

// Galerkin coefficient ∫ f e_m dx by a fine midpoint rule of a smooth integrand.
cplx fine_coefficient(const std::function<cplx(double)>& f, std::size_t m, int n = 20000) {
    cplx s = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = (i + 0.5) / n;
        s += f(x) * std::sqrt(2.0) * std::sin(static_cast<double>(m) * std::numbers::pi * x);
    }
    return s / static_cast<double>(n);
}

SpectralState random_state(std::size_t n, std::uint32_t salt) {
    SpectralState u(n);
    for (std::size_t m = 0; m < n; ++m) {
        const auto [a, b] = normal_pair(Philox4x32::apply({static_cast<std::uint32_t>(m), salt, 0, 0}, {7, 7}));
        u[m] = cplx(a, b) / static_cast<double>(m + 1);
    }
    return u;
}

} // namespace

TEST_CASE("default grid is 7-smooth and at least 4N-1") {
    for (std::size_t n : {1u, 3u, 16u, 17u, 64u, 100u}) {
        const auto m = default_grid_size(n);
        CHECK(m >= 4 * n - 1);
        std::size_t k = m + 1;
        for (std::size_t p : {2u, 3u, 5u, 7u})
            while (k % p == 0) k /= p;
        CHECK(k == 1);
    }
    CHECK(default_grid_size(16) == 63);
}

TEST_CASE("synthesis matches direct sine sums") {
    for (std::size_t n : {1u, 5u, 16u, 31u}) {
        GridWorkspace ws(n);
        const auto u = random_state(n, 1);
        std::vector<cplx> phys(ws.grid_size());
        ws.synthesize(u, phys);
        const auto want = dense_synthesize(u, ws.grid_size());
        for (std::size_t j = 0; j < phys.size(); ++j) CHECK(std::abs(phys[j] - want[j]) < 1e-12);
    }
}

TEST_CASE("analysis inverts synthesis to 1e-12") {
    for (std::size_t n : {1u, 2u, 16u, 64u}) {
        GridWorkspace ws(n);
        const auto u = random_state(n, 2);
        std::vector<cplx> phys(ws.grid_size());
        ws.synthesize(u, phys);
        const auto back = ws.analyze(phys, n);
        for (std::size_t m = 0; m < n; ++m) CHECK(std::abs(back[m] - u[m]) < 1e-12);
    }
}

TEST_CASE("cubic of e_1 is (3/2, 0, -1/2)") {
    GridWorkspace ws(6);
    const auto c = galerkin_cubic(SpectralState::basis(6, 1), ws);
    CHECK(std::abs(c[0] - 1.5) < 1e-12);
    CHECK(std::abs(c[1]) < 1e-12);
    CHECK(std::abs(c[2] + 0.5) < 1e-12);
    for (std::size_t m = 3; m < 6; ++m) CHECK(std::abs(c[m]) < 1e-12);
}

TEST_CASE("cubic projection matches quadrature of |u|^2 u") {
    const std::size_t n = 5;
    const auto u = random_state(n, 3);
    GridWorkspace ws(n);
    const auto c = galerkin_cubic(u, ws);
    auto val = [&](double x) {
        cplx s = 0.0;
        for (std::size_t m = 0; m < n; ++m) s += u[m] * std::sqrt(2.0) * std::sin((m + 1) * std::numbers::pi * x);
        return s;
    };
    for (std::size_t m = 1; m <= n; ++m) {
        const cplx want = fine_coefficient([&](double x) { const cplx v = val(x); return std::norm(v) * v; }, m);
        CHECK(std::abs(c[m - 1] - want) < 1e-7);
    }
}

TEST_CASE("cubic is exact on the smallest admissible grid") {
    const std::size_t n = 8;
    const auto u = random_state(n, 4);
    GridWorkspace tight(n, 3 * n);
    GridWorkspace wide(n, 1023);
    const auto a = galerkin_cubic(u, tight);
    const auto b = galerkin_cubic(u, wide);
    for (std::size_t m = 0; m < n; ++m) CHECK(std::abs(a[m] - b[m]) < 1e-12);
    GridWorkspace small(n, 2 * n);
    CHECK_THROWS_AS(galerkin_cubic(u, small), ConfigError);
}

TEST_CASE("cubic term conserves mass: Re[i (c, u)] = 0") {
    GridWorkspace ws(12);
    for (std::uint32_t s = 0; s < 50; ++s) {
        auto u = random_state(12, 100 + s);
        const auto c = galerkin_cubic(u, ws);
        cplx ip = 0.0;
        for (std::size_t m = 0; m < 12; ++m) ip += c[m] * std::conj(u[m]);
        CHECK(std::abs((cplx(0, 1) * ip).real()) < 1e-12 * (1.0 + std::abs(ip)));
    }
}

TEST_CASE("L4 norms are exact") {
    GridWorkspace ws(4);
    // ∫ 4 sin^4(πx) dx = 3/2
    CHECK(l4_fourth(SpectralState::basis(4, 1), ws) == Approx(1.5).epsilon(1e-14));
    // ∫ |e_1 + e_2|^4 dx by quadrature
    SpectralState u(std::vector<cplx>{1.0, 1.0, 0.0, 0.0});
    double q = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = (i + 0.5) / n;
        const double v = std::sqrt(2.0) * (std::sin(std::numbers::pi * x) + std::sin(2 * std::numbers::pi * x));
        q += v * v * v * v;
    }
    CHECK(l4_fourth(u, ws) == Approx(q / n).epsilon(1e-9));
    CHECK(l4_norm(u, ws) == Approx(std::pow(q / n, 0.25)).epsilon(1e-9));
}

TEST_CASE("mixed cubic reduces to the plain cubic when the weight is |u|^2") {
    const std::size_t n = 6;
    const auto u = random_state(n, 9);
    GridWorkspace ws(n);
    std::vector<cplx> phys(ws.grid_size());
    ws.synthesize(u, phys);
    std::vector<double> w(phys.size());
    for (std::size_t j = 0; j < w.size(); ++j) w[j] = std::norm(phys[j]);
    SpectralState mix(n);
    galerkin_cubic_mix(u, w, ws, mix);
    const auto c = galerkin_cubic(u, ws);
    for (std::size_t m = 0; m < n; ++m) CHECK(std::abs(mix[m] - c[m]) < 1e-12);
}

TEST_CASE("workspace rejects mismatched sizes") {
    CHECK_THROWS_AS(GridWorkspace(0), ConfigError);
    CHECK_THROWS_AS(GridWorkspace(8, 4), ConfigError);
    GridWorkspace ws(4);
    std::vector<cplx> wrong(3);
    CHECK_THROWS_AS(ws.synthesize(SpectralState(4), wrong), UsageError);
    CHECK(ws.weight() == Approx(1.0 / (ws.grid_size() + 1)));
    CHECK(ws.node(0) == Approx(1.0 / (ws.grid_size() + 1)));
}
