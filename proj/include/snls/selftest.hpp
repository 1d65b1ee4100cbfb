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
#include <cstdint>
#include <string>
#include <vector>

#include "snls/experiments.hpp"
#include "snls/grid.hpp"
#include "snls/philox.hpp"
#include "snls/spectral.hpp"

namespace snls {

struct SelfCheck {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

namespace detail {

inline SpectralState random_state(std::size_t n, std::uint64_t seed, std::uint64_t index) {
    NoiseStream rng(seed, 0x7e57u, 1.0);
    SpectralState u(n);
    for (std::size_t m = 0; m < n; ++m) {
        const auto [a, b] = rng.normals(static_cast<std::uint32_t>(m + 1), 0, index);
        u[m] = cplx(a, b) / static_cast<double>(m + 1);
    }
    return u;
}

inline SelfCheck make_check(std::string name, double value, double tol) {
    return {std::move(name), value, tol, value <= tol};
}

} // namespace detail

/// Deterministic invariants: transforms, cubic identity, mass identity, semigroup,
/// operator bounds. Each entry reports its worst observed deviation.
inline std::vector<SelfCheck> run_selftest(std::uint64_t seed = 2026) {
    std::vector<SelfCheck> out;

    double roundtrip = 0.0;
    for (std::size_t n : {1u, 4u, 16u, 33u, 64u}) {
        GridWorkspace ws(n);
        const auto u = detail::random_state(n, seed, n);
        std::vector<cplx> phys(ws.grid_size());
        ws.synthesize(u, phys);
        const auto back = ws.analyze(phys, n);
        for (std::size_t m = 0; m < n; ++m) roundtrip = std::max(roundtrip, std::abs(back[m] - u[m]));
    }
    out.push_back(detail::make_check("transform roundtrip", roundtrip, 1e-12));

    {
        GridWorkspace ws(8);
        const auto c = galerkin_cubic(SpectralState::basis(8, 1), ws);
        const double want[8] = {1.5, 0.0, -0.5, 0, 0, 0, 0, 0};
        double err = 0.0;
        for (std::size_t m = 0; m < 8; ++m) err = std::max(err, std::abs(c[m] - want[m]));
        out.push_back(detail::make_check("cubic of e_1 = (3/2, 0, -1/2)", err, 1e-12));
    }

    {
        double worst = 0.0;
        GridWorkspace ws(16);
        for (std::uint64_t i = 0; i < 1000; ++i) {
            auto u = detail::random_state(16, seed + 1, i);
            u *= cplx(1.0 / std::sqrt(mass(u)), 0.0);
            const auto c = galerkin_cubic(u, ws);
            worst = std::max(worst, std::abs((cplx(0.0, -1.0) * inner(c, u)).real()));
        }
        out.push_back(detail::make_check("mass identity Re[i lambda (c,u)]", worst, 1e-12));
    }

    {
        double worst = 0.0;
        const auto spec = make_spectrum(1.0, 32);
        for (double t : {0.0, 0.1, 0.5, 1.0, 3.0}) {
            const auto u = detail::random_state(32, seed + 2, static_cast<std::uint64_t>(t * 10));
            const double lhs = std::sqrt(mass(apply_semigroup(u, spec, t)));
            const double rhs = std::exp(-t) * std::sqrt(mass(u));
            worst = std::max(worst, std::abs(lhs - rhs) / rhs);
        }
        out.push_back(detail::make_check("semigroup contraction equality", worst, 1e-12));
    }

    const auto op = operator_check();
    out.push_back(detail::make_check("truncation bound equality", op.a_max_equality_error, 1e-12));
    out.push_back(detail::make_check("truncation constant spread", op.a_spread, 2.0));
    out.push_back(detail::make_check("discrete semigroup constant spread", op.b_spread, 2.0));
    out.push_back(detail::make_check("discrete semigroup H1 constant", op.c_constant, 4.0));
    for (auto& c : out) c.pass = c.pass && std::isfinite(c.value);
    return out;
}

} // namespace snls
