// SPDX-License-Identifier: Apache-2.0
// Independent reference computations used as test oracles. They share no
// code with the library beyond plain containers.
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace lens::oracle {

using Row = std::vector<double>;
using Fn = std::function<double(const Row&)>;

/// Mean of f over background rows with the `fixed` columns taken from x.
inline double substituted_mean(const Fn& f, const std::vector<Row>& bg, const Row& x, const std::vector<std::size_t>& fixed) {
    double s = 0.0;
    for (const auto& b : bg) {
        Row r = b;
        for (auto j : fixed) r[j] = x[j];
        s += f(r);
    }
    return s / static_cast<double>(bg.size());
}

/// Per-feature break-down values (indexed by feature) along `order`.
inline std::vector<double> breakdown(const Fn& f, const std::vector<Row>& bg, const Row& x,
                                     const std::vector<std::size_t>& order) {
    std::vector<double> v(x.size(), 0.0);
    std::vector<std::size_t> fixed;
    double prev = substituted_mean(f, bg, x, fixed);
    for (auto j : order) {
        fixed.push_back(j);
        const double cur = substituted_mean(f, bg, x, fixed);
        v[j] = cur - prev;
        prev = cur;
    }
    return v;
}

/// Closed-form contribution of feature j for f(x) = sum_j g_j(x_j).
inline double additive_contribution(const std::function<double(double)>& g, const std::vector<Row>& bg, const Row& x,
                                    std::size_t j) {
    double m = 0.0;
    for (const auto& b : bg) m += g(b[j]);
    return g(x[j]) - m / static_cast<double>(bg.size());
}

struct ClassCounts {
    std::size_t tp = 0, fp = 0, fn = 0, support = 0;
};

/// Per-class counts by a direct scan of the label vectors.
inline std::vector<ClassCounts> count_classes(const std::vector<std::size_t>& y_true, const std::vector<std::size_t>& y_pred,
                                              std::size_t classes) {
    std::vector<ClassCounts> out(classes);
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t i = 0; i < y_true.size(); ++i) {
            const bool t = y_true[i] == c, p = y_pred[i] == c;
            if (t) ++out[c].support;
            if (t && p) ++out[c].tp;
            if (!t && p) ++out[c].fp;
            if (t && !p) ++out[c].fn;
        }
    }
    return out;
}

inline double safe_div(double a, double b) { return b == 0.0 ? 0.0 : a / b; }

}  // namespace lens::oracle
