#pragma once
// Central finite differences over a scalar function. Deliberately knows
// nothing about the tape: it re-evaluates the forward path only, so it can
// serve as an independent check on reverse-mode gradients.

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace dctc {

using ScalarFn = std::function<double(const std::vector<double>&)>;

inline std::vector<double> finite_diff_grad(const ScalarFn& f, const std::vector<double>& x, double eps = 1e-5) {
    if (!(eps > 0.0)) throw std::invalid_argument("finite_diff_grad: eps must be positive");
    std::vector<double> g(x.size());
    std::vector<double> probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + eps;
        const double hi = f(probe);
        probe[i] = x[i] - eps;
        const double lo = f(probe);
        probe[i] = x[i];
        g[i] = (hi - lo) / (2.0 * eps);
    }
    return g;
}

// max over coordinates of |a-b| / max(1, |a|, |b|)
inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("max_relative_error: length mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({1.0, std::fabs(a[i]), std::fabs(b[i])});
        worst = std::max(worst, std::fabs(a[i] - b[i]) / denom);
    }
    return worst;
}

}  // namespace dctc
