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

#include "snls/philox.hpp"

using namespace snls;

TEST_CASE("Philox4x32-10 known-answer vectors") {
    using C = Philox4x32::counter_type;
    using K = Philox4x32::key_type;
    CHECK(Philox4x32::apply(C{0, 0, 0, 0}, K{0, 0}) ==
          C{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(Philox4x32::apply(C{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                            K{0xffffffffu, 0xffffffffu}) ==
          C{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(Philox4x32::apply(C{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                            K{0xa4093822u, 0x299f31d0u}) ==
          C{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("uniforms lie strictly inside (0, 1)") {
    CHECK(uniform_open(0, 0) > 0.0);
    CHECK(uniform_open(0xffffffffu, 0xffffffffu) < 1.0);
}

TEST_CASE("normal pairs have unit variance and no correlation") {
    const int n = 200000;
    double s0 = 0, s1 = 0, q0 = 0, q1 = 0, c = 0;
    for (int i = 0; i < n; ++i) {
        const auto [a, b] = normal_pair(Philox4x32::apply({static_cast<std::uint32_t>(i), 0, 0, 0}, {1, 2}));
        s0 += a;
        s1 += b;
        q0 += a * a;
        q1 += b * b;
        c += a * b;
    }
    // 5 standard errors
    CHECK(std::abs(s0 / n) < 5.0 / std::sqrt(n));
    CHECK(std::abs(s1 / n) < 5.0 / std::sqrt(n));
    CHECK(std::abs(q0 / n - 1.0) < 5.0 * std::sqrt(2.0 / n));
    CHECK(std::abs(q1 / n - 1.0) < 5.0 * std::sqrt(2.0 / n));
    CHECK(std::abs(c / n) < 5.0 / std::sqrt(n));
}
