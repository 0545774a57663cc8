#pragma once

#include <doctest.h>

#include <cmath>
#include <functional>

#include "s2c/autograd.hpp"

namespace s2c_test {

using s2c::i64;
using s2c::Shape;
using s2c::Tensor;
using s2c::Var;

/// Central finite differences of f(theta) against theta's analytic grad.
/// f must rebuild the graph and return the scalar loss; the analytic grad
/// for comparison is expected to already sit in theta.grad().
inline double fd_max_rel_error(s2c::Var<double>& theta, const std::function<double()>& f, double step = 1e-4) {
    Tensor<double>& t = theta.value();
    const Tensor<double> g = theta.grad();  // copy: f() may rebuild graphs
    REQUIRE(g.defined());
    double worst = 0;
    for (i64 i = 0; i < t.numel(); ++i) {
        const double orig = t[i];
        t[i] = orig + step;
        const double fp = f();
        t[i] = orig - step;
        const double fm = f();
        t[i] = orig;
        const double fd = (fp - fm) / (2 * step);
        const double an = g[i];
        const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
        worst = std::max(worst, std::abs(fd - an) / denom);
    }
    return worst;
}

/// Norm-level comparison for whole parameter tensors (used on big groups).
inline double fd_group_rel_error(s2c::Var<double>& theta, const std::function<double()>& f, double step = 1e-4) {
    Tensor<double>& t = theta.value();
    const Tensor<double> g = theta.grad();  // copy: f() may rebuild graphs
    REQUIRE(g.defined());
    double nd = 0, na = 0, nf = 0;
    for (i64 i = 0; i < t.numel(); ++i) {
        const double orig = t[i];
        t[i] = orig + step;
        const double fp = f();
        t[i] = orig - step;
        const double fm = f();
        t[i] = orig;
        const double fd = (fp - fm) / (2 * step);
        const double an = g[i];
        nd += (fd - an) * (fd - an);
        na += an * an;
        nf += fd * fd;
    }
    // Both numerically zero (e.g. gradients that cancel exactly): treat as match
    // rather than comparing two flavors of round-off noise.
    if (std::sqrt(na) < 1e-6 && std::sqrt(nf) < 1e-6) return 0.0;
    return std::sqrt(nd) / std::max({std::sqrt(na), std::sqrt(nf), 1e-12});
}

/// Weighted projection of a tensor output so gradient errors cannot cancel.
/// The weight tensor must stay fixed across finite-difference re-evaluations.
inline s2c::Var<double> projection_loss(const s2c::Var<double>& y, const Tensor<double>& w) {
    return s2c::sum_all(s2c::mul(y, s2c::constant(w)));
}

}  // namespace s2c_test
