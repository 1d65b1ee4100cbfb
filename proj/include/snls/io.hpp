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

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "snls/config.hpp"
#include "snls/experiments.hpp"

#ifndef SNLS_VERSION
#define SNLS_VERSION "0.1.0"
#endif

namespace snls {

inline constexpr const char* kTrajectoryHeader =
    "step,time,mass,grad_sq,l4_fourth,ham_disc,ham_mod,h2,f_val,phi_exp_neg_mass,phi_inv_mass,"
    "phi_sin_mode1";
inline constexpr const char* kRateHeader = "resolution,error,stderr";

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Writes `content` to `path` through a temporary file and a rename.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out << content;
        out.flush();
        if (!out) throw IoError("write to '" + tmp.string() + "' failed");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

inline void ensure_directory(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir))
        throw IoError("cannot create output directory '" + dir.string() + "'");
}

inline std::string csv_row(std::initializer_list<double> values) {
    std::string s;
    bool first = true;
    for (double v : values) {
        if (!first) s += ',';
        first = false;
        s += format_double(v);
    }
    s += '\n';
    return s;
}

/// Streams trajectory rows to a CSV file; a file with no rows has only the header.
class TrajectoryCsv {
public:
    explicit TrajectoryCsv(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw IoError("cannot open '" + path.string() + "' for writing");
        out_ << kTrajectoryHeader << '\n';
    }

    void add(const TrajectoryRow& r) {
        out_ << r.step << ',';
        const auto& o = r.obs;
        out_ << csv_row({r.time, o.mass, o.grad_sq, o.l4_fourth, o.ham_disc, o.ham_mod, o.h2,
                         o.f_val, r.phi[0], r.phi[1], r.phi[2]});
    }

    void close() {
        out_.close();
        if (!out_) throw IoError("write to '" + path_.string() + "' failed");
    }

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

inline std::string trajectory_csv(const std::vector<TrajectoryRow>& rows) {
    std::string s = std::string(kTrajectoryHeader) + "\n";
    for (const auto& r : rows) {
        const auto& o = r.obs;
        s += std::to_string(r.step) + "," +
             csv_row({r.time, o.mass, o.grad_sq, o.l4_fourth, o.ham_disc, o.ham_mod, o.h2, o.f_val,
                      r.phi[0], r.phi[1], r.phi[2]});
    }
    return s;
}

inline std::string rate_csv(const RateStudyReport& rep) {
    std::string s = std::string(kRateHeader) + "\n";
    for (const auto& p : rep.points) s += csv_row({p.resolution, p.error, p.stderr_});
    return s;
}

inline std::string rate_csv(const IncrementScaling& inc) {
    std::string s = std::string(kRateHeader) + "\n";
    for (std::size_t i = 0; i < inc.taus.size(); ++i)
        s += csv_row({inc.taus[i], inc.mean_sq[i], inc.stderr_[i]});
    return s;
}

inline nlohmann::json fit_json(const RateFit& f) {
    nlohmann::json pts = nlohmann::json::array();
    for (auto [x, y] : f.points) pts.push_back({x, y});
    return {{"slope", f.slope},       {"intercept", f.intercept}, {"ci_low", f.ci_low},
            {"ci_high", f.ci_high},   {"r_squared", f.r_squared}, {"points", pts}};
}

inline std::string ergodicity_csv(const ErgodicityReport& rep) {
    std::string s = "ic,channel,mean,stderr,n_replicas\n";
    for (const auto& ch : rep.channels)
        for (std::size_t ic = 0; ic < ch.per_ic.size(); ++ic) {
            const auto& st = ch.per_ic[ic];
            s += std::to_string(ic) + "," + ch.name + "," + format_double(st.mean) + "," +
                 format_double(st.stderr_) + "," + std::to_string(st.n_replicas) + "\n";
        }
    return s;
}

inline std::string drift_csv(const ErgodicityReport& rep) {
    std::string s = "ic,bin,t_start,t_end,mass,ham_disc,h2_sq\n";
    const double w = rep.total_time / static_cast<double>(kDriftBins);
    for (std::size_t ic = 0; ic < rep.bin_means.size(); ++ic)
        for (std::size_t b = 0; b < rep.bin_means[ic].size(); ++b) {
            const auto& v = rep.bin_means[ic][b];
            s += std::to_string(ic) + "," + std::to_string(b) + "," +
                 csv_row({w * static_cast<double>(b), w * static_cast<double>(b + 1), v[0], v[1], v[2]});
        }
    return s;
}

inline std::string moment_csv(const std::vector<ModeMomentCheck>& rows) {
    std::string s = "mode,empirical,stderr,exact,continuum\n";
    for (const auto& r : rows)
        s += std::to_string(r.mode) + "," + csv_row({r.empirical, r.stderr_, r.exact, r.continuum});
    return s;
}

inline std::string operator_csv(const OperatorReport& rep) {
    std::string s = "part,s,n,t,tau,k,value,reference,ratio\n";
    for (const auto& r : rep.rows)
        s += std::string(1, r.part) + "," + std::to_string(r.s) + "," + std::to_string(r.n) + "," +
             format_double(r.t) + "," + format_double(r.tau) + "," + std::to_string(r.k) + "," +
             csv_row({r.value, r.reference, r.ratio});
    return s;
}

enum class Verdict { pass, fail, not_applicable };

inline const char* verdict_name(Verdict v) {
    switch (v) {
    case Verdict::pass: return "PASS";
    case Verdict::fail: return "FAIL";
    case Verdict::not_applicable: return "N/A";
    }
    return "N/A";
}

/// Record of one CLI run; written last, atomically, as manifest.json.
struct RunManifest {
    std::string command;
    RunConfig config;
    std::vector<std::string> outputs;
    Verdict verdict = Verdict::not_applicable;
    nlohmann::json details = nlohmann::json::object();
    double wall_clock_seconds = 0.0;
    std::vector<std::string> warnings;

    nlohmann::json to_json() const {
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        char stamp[32];
        std::tm tm{};
        gmtime_r(&now, &tm);
        std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
        return {{"tool", "snls"},
                {"version", SNLS_VERSION},
                {"command", command},
                {"timestamp", stamp},
                {"seed", config.study.seed},
                {"config", serialize_config(config)},
                {"outputs", outputs},
                {"wall_clock_seconds", wall_clock_seconds},
                {"verdict", verdict_name(verdict)},
                {"warnings", warnings},
                {"details", details}};
    }
};

/// Writes `content` under dir and records the path in the manifest.
inline void emit(RunManifest& m, const std::filesystem::path& dir, const std::string& file,
                 const std::string& content) {
    write_file_atomic(dir / file, content);
    m.outputs.push_back((dir / file).string());
}

inline void write_manifest(const RunManifest& m, const std::filesystem::path& dir) {
    write_file_atomic(dir / "manifest.json", m.to_json().dump(2) + "\n");
}

} // namespace snls
