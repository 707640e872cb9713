#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "oasis/nn.hpp"

namespace oasis {

/// ||analytic - numeric|| / max(||analytic||, ||numeric||, 1e-12), numeric
/// gradient from central differences of `loss` with step `step`.
double gradient_relative_error(const Model& model, const std::function<double(const Model&)>& loss,
                               const ParameterSet& analytic, double step = 1e-5);

struct GradCheckCase {
    std::string loss;
    int network = 0;
    double relative_error = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckCase> cases;
    double max_relative_error = 0.0;
    double tolerance = 0.0;
    double seconds = 0.0;

    bool passed() const noexcept { return max_relative_error <= tolerance; }
};

/// Checks every training loss on `networks` random small models.
GradCheckReport run_gradcheck(int networks = 20, std::uint64_t seed = 7, double step = 1e-5, double tolerance = 1e-4);

} // namespace oasis
