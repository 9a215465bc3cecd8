#pragma once

#include <string>
#include <vector>

#include "bigat/model.hpp"

namespace bigat::eval {

struct GradSuiteEntry {
    std::string name;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

// Central finite-difference validation of every primitive (tolerance 1e-5,
// step 1e-5), every layer, and every end-to-end loss on a two-pedestrian toy
// scene (tolerance 1e-4, step 1e-4), on freshly initialized reduced-width
// networks.
std::vector<GradSuiteEntry> run_gradient_suite(uint64_t seed);

bool all_pass(const std::vector<GradSuiteEntry>& entries);

} // namespace bigat::eval
