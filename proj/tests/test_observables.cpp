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
#include <numbers>
#include <vector>

#include "snls/observables.hpp"

using namespace snls;
using Catch::Approx;

namespace {

// ∫ g(x) dx on (0,1) by the composite midpoint rule.
template <class F>
double quad(F g, int n = 200000) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += g((i + 0.5) / n);
    return s / n;
}

} // namespace

TEST_CASE("observables of e_1") {
    const std::size_t n = 4;
    ModelParams p{1.0, -1, static_cast<int>(n)};
    const auto spec = make_spectrum(p);
    GridWorkspace ws(n);
    const auto u = SpectralState::basis(n, 1);
    const auto r = record(u, spec, ws, p, 2.0);
    const double pi2 = std::numbers::pi * std::numbers::pi;
    CHECK(r.mass == Approx(1.0));
    CHECK(r.grad_sq == Approx(pi2));
    CHECK(r.l4_fourth == Approx(1.5));
    CHECK(r.ham_disc == Approx(pi2 + 0.75));
    CHECK(r.ham_mod == Approx(0.5 * pi2 + 0.375 + 2.0));
    CHECK(r.h1 == Approx(std::sqrt(std::hypot(1.0, pi2))));
    CHECK(r.h2 == Approx(std::hypot(1.0, pi2)));
    // ‖Δe_1‖² + λ Re∫ Δē_1 |e_1|² e_1 = π⁴ - (-π²)·(3/2)
    CHECK(r.f_val == Approx(pi2 * pi2 + 1.5 * pi2));
}

TEST_CASE("f_val cross term matches quadrature") {
    const std::size_t n = 3;
    ModelParams p{1.0, 1, static_cast<int>(n)};
    const auto spec = make_spectrum(p);
    GridWorkspace ws(n);
    SpectralState u(std::vector<cplx>{cplx(1, 0.5), cplx(-0.3, 0.2), cplx(0.1, -0.4)});
    auto val = [&](double x, bool lap) {
        cplx s = 0.0;
        for (std::size_t m = 0; m < n; ++m) {
            const double k = (m + 1) * std::numbers::pi;
            s += (lap ? -k * k : 1.0) * u[m] * std::sqrt(2.0) * std::sin(k * x);
        }
        return s;
    };
    const double want = quad([&](double x) {
        const cplx v = val(x, false);
        return (std::conj(val(x, true)) * v).real() * std::norm(v);
    });
    CHECK(laplacian_cubic_cross(u, spec, ws) == Approx(want).epsilon(1e-8));
}

TEST_CASE("test functions") {
    SpectralState u(std::vector<cplx>{cplx(0.5, 1.0), 0.0});
    CHECK(evaluate(TestFunction::exp_neg_mass, u) == Approx(std::exp(-1.25)));
    CHECK(evaluate(TestFunction::inv_mass, u) == Approx(1.0 / 2.25));
    CHECK(evaluate(TestFunction::sin_mode1, u) == Approx(std::sin(0.5)));
    for (auto f : kAllTestFunctions) CHECK(parse_test_function(name(f)) == f);
    CHECK_THROWS_AS(parse_test_function("nope"), ConfigError);
}

TEST_CASE("compensated sum recovers small addends") {
    CompensatedSum s;
    s.add(1e16);
    for (int i = 0; i < 1000; ++i) s.add(1.0);
    s.add(-1e16);
    CHECK(s.value() == 1000.0);
}

TEST_CASE("time averages skip the burn-in") {
    TimeAverage avg(2, 3);
    for (std::size_t k = 0; k < 6; ++k) {
        const double v[2] = {static_cast<double>(k), 1.0};
        avg.accumulate(k, v);
    }
    CHECK(avg.count() == 3);
    CHECK(avg.mean(0) == Approx(4.0));
    CHECK(avg.mean(1) == Approx(1.0));
    const double wrong[1] = {0.0};
    CHECK_THROWS_AS(avg.accumulate(7, wrong), UsageError);
    CHECK_THROWS_AS(TimeAverage(1).mean(0), UsageError);
}

TEST_CASE("ensemble reduction uses the unbiased variance") {
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    const auto e = ensemble_reduce(v);
    CHECK(e.mean == Approx(2.5));
    CHECK(e.variance == Approx(5.0 / 3.0));
    CHECK(e.stderr_ == Approx(std::sqrt(5.0 / 12.0)));
    CHECK(e.n_replicas == 4);
    const std::vector<double> one{1.0};
    CHECK_THROWS_AS(ensemble_reduce(one), UsageError);
}

TEST_CASE("c0 calibration is bounded by the Gagliardo-Nirenberg constant") {
    const double c0 = calibrate_c0(20000, 5);
    CHECK(c0 <= kDefaultC0);
    CHECK(c0 > 0.0);
    CHECK(std::log2(c0) == Approx(std::round(std::log2(c0))));
}

TEST_CASE("modified Hamiltonian is nonnegative for lambda = 1 with the default c0") {
    const std::size_t n = 8;
    ModelParams p{1.0, 1, static_cast<int>(n)};
    const auto spec = make_spectrum(p);
    GridWorkspace ws(n);
    for (double s : {0.1, 1.0, 3.0, 10.0, 30.0}) {
        SpectralState u(n);
        for (std::size_t m = 0; m < n; ++m) u[m] = s * cplx(1.0 / (m + 1), 0.2) / static_cast<double>(m + 1);
        CHECK(record(u, spec, ws, p).ham_mod >= 0.0);
    }
}
