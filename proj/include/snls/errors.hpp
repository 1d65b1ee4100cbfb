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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace snls {

/// Invalid model, noise, step or study configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An operation was called outside its contract (wrong level spacing, wrong lambda, ...).
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// The per-step fixed-point solve did not converge.
class StepFailure : public std::runtime_error {
public:
    StepFailure(const std::string& what, double residual, int iterations,
                std::size_t step_index = 0)
        : std::runtime_error(what), residual_(residual), iterations_(iterations),
          step_index_(step_index) {}

    double residual() const noexcept { return residual_; }
    int iterations() const noexcept { return iterations_; }
    std::size_t step_index() const noexcept { return step_index_; }

    StepFailure at_step(std::size_t k) const {
        return StepFailure("step " + std::to_string(k) + ": " + what(), residual_,
                           iterations_, k);
    }

private:
    double residual_;
    int iterations_;
    std::size_t step_index_;
};

} // namespace snls
