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

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "snls/errors.hpp"
#include "snls/experiments.hpp"

namespace snls {

struct IoConfig {
    std::string out = "snls_out";
    bool csv = true;
    bool json = true;

    friend bool operator==(const IoConfig&, const IoConfig&) = default;
};

struct RunConfig {
    StudySpec study;
    IoConfig io;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Shortest decimal that parses back to exactly x.
inline std::string format_double(double x) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto next = s.find(sep, pos);
        out.push_back(trim(s.substr(pos, next == std::string_view::npos ? s.npos : next - pos)));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return out;
}

inline double parse_double(std::string_view key, std::string_view v) {
    double x = 0.0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(x))
        throw ConfigError(std::string(key) + ": '" + std::string(v) + "' is not a finite number");
    return x;
}

inline std::uint64_t parse_uint(std::string_view key, std::string_view v) {
    std::uint64_t x = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), x);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size())
        throw ConfigError(std::string(key) + ": '" + std::string(v) +
                          "' is not a nonnegative integer");
    return x;
}

inline std::vector<double> parse_list(std::string_view key, std::string_view v) {
    std::vector<double> out;
    if (trim(v).empty()) return out;
    for (auto item : split(v, ',')) out.push_back(parse_double(key, item));
    return out;
}

/// "re" or "re:im"
inline cplx parse_coefficient(std::string_view key, std::string_view v) {
    const auto colon = v.find(':');
    if (colon == std::string_view::npos) return {parse_double(key, v), 0.0};
    return {parse_double(key, trim(v.substr(0, colon))), parse_double(key, trim(v.substr(colon + 1)))};
}

inline std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        s += format_double(v[i]);
    }
    return s;
}

inline std::string solver_name(SolverKind k) {
    return k == SolverKind::exact_linear ? "exact_linear" : "fixed_point";
}

} // namespace detail

/// Applies one `key = value` assignment to cfg.
inline void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
    using namespace detail;
    auto& st = cfg.study;
    const std::string k(key);
    if (k == "seed") {
        st.seed = parse_uint(key, value);
    } else if (k == "model.alpha") {
        st.model.alpha = parse_double(key, value);
    } else if (k == "model.lambda") {
        const double l = parse_double(key, value);
        if (l != -1.0 && l != 0.0 && l != 1.0) throw ConfigError("model.lambda must be one of -1, 0, 1");
        st.model.lambda = static_cast<int>(l);
    } else if (k == "model.n_modes") {
        const auto n = parse_uint(key, value);
        if (n < 1 || n > (1u << 20)) throw ConfigError("model.n_modes must be in [1, 2^20]");
        st.model.n_modes = static_cast<int>(n);
    } else if (k == "noise.kind") {
        if (value == "power") st.noise.kind = SpectrumKind::power;
        else if (value == "custom") st.noise.kind = SpectrumKind::custom;
        else throw ConfigError("noise.kind must be 'power' or 'custom'");
    } else if (k == "noise.p") {
        st.noise.p = parse_double(key, value);
    } else if (k == "noise.scale") {
        st.noise.scale = parse_double(key, value);
    } else if (k == "noise.etas") {
        st.noise.etas = parse_list(key, value);
    } else if (k == "step.tau") {
        st.step.tau = parse_double(key, value);
    } else if (k == "step.fp_tol") {
        st.step.fp_tol = parse_double(key, value);
    } else if (k == "step.fp_max_iters") {
        const auto n = parse_uint(key, value);
        if (n < 1 || n > 100000) throw ConfigError("step.fp_max_iters must be in [1, 100000]");
        st.step.fp_max_iters = static_cast<int>(n);
    } else if (k == "step.solver") {
        if (value == "fixed_point") st.step.solver = SolverKind::fixed_point;
        else if (value == "exact_linear") st.step.solver = SolverKind::exact_linear;
        else throw ConfigError("step.solver must be 'fixed_point' or 'exact_linear'");
    } else if (k == "study.kind") {
        st.kind = parse_study_kind(value);
    } else if (k == "study.resolutions") {
        st.resolutions = parse_list(key, value);
    } else if (k == "study.reference") {
        st.reference = parse_double(key, value);
    } else if (k == "study.n_replicas") {
        st.n_replicas = parse_uint(key, value);
    } else if (k == "study.t_final") {
        st.t_final = parse_double(key, value);
    } else if (k == "study.n_steps") {
        st.n_steps = parse_uint(key, value);
    } else if (k == "study.burn_in") {
        st.burn_in = parse_uint(key, value);
    } else if (k == "study.burn_in_time") {
        st.burn_in_time = parse_double(key, value);
    } else if (k == "study.t_average") {
        st.t_average = parse_double(key, value);
    } else if (k == "study.test_function") {
        st.test_function = parse_test_function(value);
    } else if (k == "study.initial_conditions") {
        st.initial_conditions.clear();
        for (auto ic : split(value, ';')) {
            std::vector<cplx> c;
            if (!ic.empty())
                for (auto item : split(ic, ',')) c.push_back(parse_coefficient(key, item));
            st.initial_conditions.push_back(std::move(c));
        }
    } else if (k == "io.out") {
        if (value.empty()) throw ConfigError("io.out must not be empty");
        cfg.io.out = std::string(value);
    } else if (k == "io.formats") {
        cfg.io.csv = cfg.io.json = false;
        for (auto f : split(value, ',')) {
            if (f == "csv") cfg.io.csv = true;
            else if (f == "json") cfg.io.json = true;
            else throw ConfigError("io.formats entries must be 'csv' or 'json'");
        }
    } else if (k == "io.sample_every") {
        st.sample_every = parse_uint(key, value);
    } else {
        throw ConfigError("unknown configuration key '" + k + "'");
    }
}

/// Parses `key = value` lines ('#' starts a comment) on top of `base`, then validates.
inline RunConfig parse_config(std::string_view text, RunConfig base = {}) {
    std::size_t line_no = 0;
    std::map<std::string, std::size_t, std::less<>> seen;
    for (auto line : detail::split(text, '\n')) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        const auto key = detail::trim(line.substr(0, eq));
        const auto value = detail::trim(line.substr(eq + 1));
        if (auto [it, fresh] = seen.emplace(std::string(key), line_no); !fresh)
            throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" +
                              std::string(key) + "' (first on line " + std::to_string(it->second) + ")");
        try {
            apply_setting(base, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    base.study.validate();
    return base;
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read configuration file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config(ss.str(), std::move(base));
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline std::string serialize_config(const RunConfig& cfg) {
    using detail::join;
    const auto& st = cfg.study;
    std::ostringstream o;
    o << "seed = " << st.seed << "\n";
    o << "model.alpha = " << format_double(st.model.alpha) << "\n";
    o << "model.lambda = " << st.model.lambda << "\n";
    o << "model.n_modes = " << st.model.n_modes << "\n";
    o << "noise.kind = " << (st.noise.kind == SpectrumKind::power ? "power" : "custom") << "\n";
    o << "noise.p = " << format_double(st.noise.p) << "\n";
    o << "noise.scale = " << format_double(st.noise.scale) << "\n";
    o << "noise.etas = " << join(st.noise.etas) << "\n";
    o << "step.tau = " << format_double(st.step.tau) << "\n";
    o << "step.fp_tol = " << format_double(st.step.fp_tol) << "\n";
    o << "step.fp_max_iters = " << st.step.fp_max_iters << "\n";
    o << "step.solver = " << detail::solver_name(st.step.solver) << "\n";
    o << "study.kind = " << name(st.kind) << "\n";
    o << "study.resolutions = " << join(st.resolutions) << "\n";
    o << "study.reference = " << format_double(st.reference) << "\n";
    o << "study.n_replicas = " << st.n_replicas << "\n";
    o << "study.t_final = " << format_double(st.t_final) << "\n";
    o << "study.n_steps = " << st.n_steps << "\n";
    o << "study.burn_in = " << st.burn_in << "\n";
    o << "study.burn_in_time = " << format_double(st.burn_in_time) << "\n";
    o << "study.t_average = " << format_double(st.t_average) << "\n";
    o << "study.test_function = " << name(st.test_function) << "\n";
    o << "study.initial_conditions = ";
    for (std::size_t i = 0; i < st.initial_conditions.size(); ++i) {
        if (i) o << "; ";
        const auto& c = st.initial_conditions[i];
        for (std::size_t m = 0; m < c.size(); ++m) {
            if (m) o << ", ";
            o << format_double(c[m].real());
            if (c[m].imag() != 0.0) o << ":" << format_double(c[m].imag());
        }
    }
    o << "\n";
    o << "io.out = " << cfg.io.out << "\n";
    o << "io.formats = ";
    if (cfg.io.csv) o << "csv" << (cfg.io.json ? ", " : "");
    if (cfg.io.json) o << "json";
    o << "\n";
    o << "io.sample_every = " << st.sample_every << "\n";
    return o.str();
}

/// Defaults of each study, sized for a workstation run.
inline RunConfig default_config(StudyKind kind) {
    RunConfig c;
    auto& s = c.study;
    s.kind = kind;
    s.model = ModelParams{1.0, -1, 16};
    s.noise = NoiseConfig{SpectrumKind::power, 8.0, 1.0, {}};
    s.step.tau = 1.0 / 128.0;
    switch (kind) {
    case StudyKind::simulate:
        s.n_steps = 1000;
        break;
    case StudyKind::ergodicity:
        s.model.n_modes = 32;
        s.initial_conditions = {{}, {cplx(2.0), cplx(1.0)}};
        s.n_replicas = 32;
        s.n_steps = std::size_t{1} << 17;
        s.burn_in = std::size_t{1} << 13;
        break;
    case StudyKind::spatial_order:
    case StudyKind::invariant_error_spatial:
        s.resolutions = {4, 8, 16, 32};
        s.reference = 64;
        s.n_replicas = kind == StudyKind::spatial_order ? 2000 : 64;
        break;
    case StudyKind::temporal_order:
    case StudyKind::invariant_error_temporal:
        s.resolutions = {1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128, 1.0 / 256};
        s.reference = 1.0 / 1024;
        s.step.tau = s.resolutions.front();
        s.n_replicas = kind == StudyKind::temporal_order ? 2000 : 64;
        break;
    case StudyKind::operator_check:
        break;
    }
    return c;
}

} // namespace snls
