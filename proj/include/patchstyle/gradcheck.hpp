#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "patchstyle/tensor.hpp"

namespace patchstyle {

struct GradCheckOptions {
    std::uint64_t seed = 0;
    double step = 1e-3;
    double tol = 1e-3;
};

struct GradCheckReport {
    std::string name;
    int checked = 0;
    int skipped = 0;  // probes whose central differences disagree across step sizes
    double max_rel = 0.0;
};

struct GradCheckSummary {
    std::vector<GradCheckReport> reports;
    double max_rel = 0.0;
    int checked = 0;
    int skipped = 0;
    bool pass = false;
};

// Builds a scalar loss from a flat parameter vector. When `vars` is non-null
// the builder must register there, in order, the variables it created from
// theta; their concatenated gradients must line up with theta.
using GradBuild = std::function<Tensor<double>(Tape<double>&, const std::vector<double>&,
                                               std::vector<Tensor<double>>*)>;

// Central-difference check of autodiff gradients at the probe indices.
// Probes where the h and h/2 differences disagree are counted as skipped:
// the loss is only piecewise smooth there and the comparison is meaningless.
GradCheckReport check_gradients(std::string name, const std::vector<double>& theta,
                                const GradBuild& build, const std::vector<std::size_t>& probes,
                                const GradCheckOptions& opt = {});

// Full suite: every tensor op plus the composed generator objective on a
// 16x16 input (64-bit throughout).
GradCheckSummary run_gradcheck(const GradCheckOptions& opt = {});

}  // namespace patchstyle
