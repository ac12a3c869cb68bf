#pragma once

// Paired two-sided Student t-test and the significance stars used in the
// result tables.

#include "mot3d/core.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <span>
#include <string>

namespace mot3d {

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    double df = 0.0;
    double mean_diff = 0.0;
    bool degenerate = false;  // zero variance of the differences
};

inline TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ValidationError("paired_t_test: samples differ in length");
    const std::size_t n = a.size();
    if (n < 2) throw ValidationError("paired_t_test: at least two pairs are required");

    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i] - mean;
        ss += d * d;
    }
    const double var = ss / static_cast<double>(n - 1);

    TTestResult r;
    r.df = static_cast<double>(n - 1);
    r.mean_diff = mean;
    if (!(var > 0.0)) {
        r.degenerate = true;
        if (mean == 0.0) {
            r.t = 0.0;
            r.p = 1.0;
        } else {
            r.t = std::copysign(std::numeric_limits<double>::infinity(), mean);
            r.p = 0.0;
        }
        return r;
    }
    r.t = mean / std::sqrt(var / static_cast<double>(n));
    const boost::math::students_t dist(r.df);
    r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t)));
    r.p = std::min(1.0, r.p);
    return r;
}

/// "*", "**", "***" at p < 0.05, 0.01, 0.001.
inline std::string significance_stars(double p) {
    if (p < 0.001) return "***";
    if (p < 0.01) return "**";
    if (p < 0.05) return "*";
    return "";
}

}  // namespace mot3d
