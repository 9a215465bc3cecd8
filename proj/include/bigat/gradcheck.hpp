#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bigat/param_store.hpp"

namespace bigat::ad {

struct GradCheckResult {
    double max_rel_error = 0.0;
    bool pass = false;
    std::string worst; // "coordinate 3" or "param.name[7]"
};

// Scalar-valued function built on a fresh graph from a single input leaf.
using PointFn = std::function<Value(Graph&, Value)>;

// Scalar-valued function over store parameters bound through a binder.
using StoreFn = std::function<Value(Graph&, ParamBinder&)>;

// Compares the analytic gradient of f at `point` against central finite
// differences, coordinate by coordinate. Relative error uses
// |a - n| / max(|a|, |n|, 1). Throws ContractError if f is not
// deterministic (two evaluations disagree bitwise) or not scalar.
GradCheckResult gradient_check(const PointFn& f, const Tensor& point, double step,
                               double tolerance);

// Same check swept over every parameter under the given prefixes.
GradCheckResult gradient_check_params(ParameterStore& store,
                                      const std::vector<std::string>& prefixes, const StoreFn& f,
                                      double step, double tolerance);

} // namespace bigat::ad
