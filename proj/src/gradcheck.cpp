#include "bigat/gradcheck.hpp"

#include <cmath>

namespace bigat::ad {

namespace {

double rel_error(double a, double n) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1.0});
}

double eval_point(const PointFn& f, const Tensor& point) {
    Graph g;
    Value x = g.leaf(point, false);
    Value r = f(g, x);
    if (r.numel() != 1) throw ContractError("gradient_check: function is not scalar-valued");
    return r.data()[0];
}

} // namespace

GradCheckResult gradient_check(const PointFn& f, const Tensor& point, double step,
                               double tolerance) {
    if (step <= 0.0) throw ContractError("gradient_check: step must be positive");

    Graph g;
    Value x = g.leaf(point, true);
    Value root = f(g, x);
    if (root.numel() != 1) throw ContractError("gradient_check: function is not scalar-valued");
    double base = root.data()[0];
    if (eval_point(f, point) != base)
        throw ContractError("gradient_check: function is not deterministic");
    g.backward(root);
    Tensor analytic = x.grad();
    if (analytic.empty()) analytic = Tensor{point.shape()};

    GradCheckResult res;
    Tensor probe = point;
    for (int64_t i = 0; i < point.numel(); ++i) {
        double saved = probe[i];
        probe[i] = saved + step;
        double fp = eval_point(f, probe);
        probe[i] = saved - step;
        double fm = eval_point(f, probe);
        probe[i] = saved;
        double numeric = (fp - fm) / (2.0 * step);
        double err = rel_error(analytic[i], numeric);
        if (err > res.max_rel_error) {
            res.max_rel_error = err;
            res.worst = "coordinate " + std::to_string(i);
        }
    }
    res.pass = res.max_rel_error <= tolerance;
    return res;
}

namespace {

double eval_store(ParameterStore& store, const StoreFn& f) {
    Graph g;
    ParamBinder frozen(g, store, {});
    Value r = f(g, frozen);
    if (r.numel() != 1)
        throw ContractError("gradient_check_params: function is not scalar-valued");
    return r.data()[0];
}

} // namespace

GradCheckResult gradient_check_params(ParameterStore& store,
                                      const std::vector<std::string>& prefixes, const StoreFn& f,
                                      double step, double tolerance) {
    if (step <= 0.0) throw ContractError("gradient_check_params: step must be positive");

    for (const std::string& p : prefixes) store.zero_grad(p);
    Graph g;
    ParamBinder binder(g, store, prefixes);
    Value root = f(g, binder);
    if (root.numel() != 1)
        throw ContractError("gradient_check_params: function is not scalar-valued");
    double base = root.data()[0];
    if (eval_store(store, f) != base)
        throw ContractError("gradient_check_params: function is not deterministic");
    g.backward(root);
    binder.pull_grads();

    GradCheckResult res;
    for (const std::string& prefix : prefixes) {
        for (const std::string& name : store.names(prefix)) {
            const Tensor analytic = store.grad(name);
            Tensor& value = store.value(name);
            for (int64_t i = 0; i < value.numel(); ++i) {
                double saved = value[i];
                value[i] = saved + step;
                double fp = eval_store(store, f);
                value[i] = saved - step;
                double fm = eval_store(store, f);
                value[i] = saved;
                double numeric = (fp - fm) / (2.0 * step);
                double err = rel_error(analytic[i], numeric);
                if (err > res.max_rel_error) {
                    res.max_rel_error = err;
                    res.worst = name + "[" + std::to_string(i) + "]";
                }
            }
            store.clear_grad(name);
        }
    }
    res.pass = res.max_rel_error <= tolerance;
    return res;
}

} // namespace bigat::ad
