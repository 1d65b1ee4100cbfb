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
#include <vector>

#include "snls/noise.hpp"

using namespace snls;
using Catch::Approx;

TEST_CASE("power spectrum rates and tail flag") {
    const auto s = make_power_spectrum(4, 2.0, 3.0);
    CHECK(s.eta == std::vector<double>{3.0, 0.75, 3.0 / 9, 3.0 / 16});
    CHECK(s.trace() == Approx(3.0 + 0.75 + 1.0 / 3 + 3.0 / 16));
    CHECK(s.hs2_tail_diverges);
    CHECK_FALSE(make_power_spectrum(4, 8.0, 1.0).hs2_tail_diverges);
    CHECK_THROWS_AS(make_power_spectrum(4, -1.0, 1.0), ConfigError);
    CHECK_THROWS_AS(make_power_spectrum(4, 2.0, 0.0), ConfigError);
    CHECK_THROWS_AS(make_custom_spectrum({1.0, -1.0}), ConfigError);
    CHECK(s.truncated(2).eta == std::vector<double>{3.0, 0.75});
    CHECK_THROWS_AS(s.truncated(5), UsageError);
}

TEST_CASE("HS norm sums |lambda_m|^s eta_m") {
    const auto spec = make_spectrum(1.0, 3);
    const auto s = make_custom_spectrum({1.0, 0.5, 0.0});
    CHECK(s.hs_norm(spec, 0) == Approx(std::sqrt(1.5)));
    CHECK(s.hs_norm(spec, 2) ==
          Approx(std::sqrt(std::pow(spec.abs_lambda[0], 2) + 0.5 * std::pow(spec.abs_lambda[1], 2))));
}

TEST_CASE("streams are reproducible and seekable") {
    NoiseStream a(42, 3, 0.01), b(42, 3, 0.01);
    std::vector<cplx> x(5), y(5);
    for (int k = 0; k < 10; ++k) {
        a.next_brownian(x);
        b.next_brownian(y);
        CHECK(x == y);
    }
    NoiseStream c(42, 3, 0.01);
    c.seek(9);
    c.next_brownian(y);
    CHECK(x == y);
    NoiseStream d(42, 4, 0.01);
    d.seek(9);
    d.next_brownian(y);
    CHECK(x != y);
}

TEST_CASE("mode m is the same path whatever the number of modes") {
    NoiseStream small(7, 0, 0.1), big(7, 0, 0.1);
    std::vector<cplx> s(3), b(10);
    for (int k = 0; k < 20; ++k) {
        small.next_brownian(s);
        big.next_brownian(b);
        for (std::size_t m = 0; m < 3; ++m) CHECK(s[m] == b[m]);
    }
    for (std::size_t m = 1; m <= 3; ++m) CHECK(small.consumed_sum(m) == big.consumed_sum(m));
}

TEST_CASE("refined increments sum to the coarse increment") {
    const double base = 0.125;
    NoiseStream coarse(11, 2, base);
    for (int level : {1, 2, 5}) {
        NoiseStream fine(11, 2, base, level);
        CHECK(fine.tau() == Approx(std::ldexp(base, -level)));
        coarse.seek(0);
        std::vector<cplx> c(4), f(4);
        for (int k = 0; k < 6; ++k) {
            coarse.next_brownian(c);
            std::vector<cplx> acc(4);
            for (int j = 0; j < (1 << level); ++j) {
                fine.next_brownian(f);
                for (std::size_t m = 0; m < 4; ++m) acc[m] += f[m];
            }
            for (std::size_t m = 0; m < 4; ++m) CHECK(std::abs(acc[m] - c[m]) < 1e-13);
        }
    }
}

TEST_CASE("refine_stream keeps the time position") {
    NoiseStream s(5, 0, 0.5);
    std::vector<cplx> x(2);
    s.next_brownian(x);
    s.next_brownian(x);
    const auto f = refine_stream(s);
    CHECK(f.level() == 1);
    CHECK(f.cursor() == 4);
    CHECK(f.tau() == Approx(0.25));
}

TEST_CASE("increments have variance 2 eta tau per complex mode") {
    const double tau = 0.01;
    const auto spec = make_custom_spectrum({1.0, 0.25});
    for (int level : {0, 3}) {
        NoiseStream s(99, 0, tau * (1 << level), level);
        const int n = 100000;
        double q0 = 0, q1 = 0, re_im = 0;
        NoiseIncrement inc;
        for (int k = 0; k < n; ++k) {
            sample_increment(s, spec, tau, inc);
            q0 += std::norm(inc.dw[0]);
            q1 += std::norm(inc.dw[1]);
            re_im += inc.dw[0].real() * inc.dw[0].imag();
        }
        // relative stderr of a chi-square(2) mean is 1/sqrt(n)
        CHECK(q0 / n == Approx(2 * tau).epsilon(5.0 / std::sqrt(n)));
        CHECK(q1 / n == Approx(2 * 0.25 * tau).epsilon(5.0 / std::sqrt(n)));
        CHECK(std::abs(re_im / n) < 5.0 * tau / std::sqrt(n));
    }
}

TEST_CASE("sampling with the wrong step is rejected") {
    NoiseStream s(1, 0, 0.01);
    NoiseIncrement inc;
    CHECK_THROWS_AS(sample_increment(s, make_power_spectrum(2, 2, 1), 0.02, inc), UsageError);
    CHECK_THROWS_AS(NoiseStream(1, 0, 0.0), ConfigError);
    CHECK_THROWS_AS(NoiseStream(1, 0, 1.0, 31), ConfigError);
}
