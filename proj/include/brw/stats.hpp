#pragma once

// Small sample-statistics helpers shared by experiments and tests. All the
// statistical gates in this project are 3-standard-error checks computed
// from the ensemble itself.

#include <vector>
#include <cmath>
#include <stdexcept>
#include <algorithm>

namespace brw {

struct SampleStats {
    int64_t count = 0;
    double mean = 0.0;
    double sd = 0.0;        // sample standard deviation (n-1)
    double se = 0.0;        // standard error of the mean
    double variance = 0.0;  // unbiased sample variance
    double variance_se = 0.0;  // moment-based SE of the variance estimator
};

inline SampleStats sample_stats(const std::vector<double>& xs) {
    SampleStats s;
    s.count = int64_t(xs.size());
    if (xs.empty()) return s;
    double sum = 0.0;
    for (double x : xs) sum += x;
    s.mean = sum / double(s.count);
    double m2 = 0.0, m4 = 0.0;
    for (double x : xs) {
        double d = x - s.mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    m2 /= double(s.count);
    m4 /= double(s.count);
    s.variance = s.count > 1 ? m2 * double(s.count) / double(s.count - 1) : 0.0;
    s.sd = std::sqrt(s.variance);
    s.se = s.sd / std::sqrt(double(s.count));
    s.variance_se = std::sqrt(std::max(0.0, m4 - m2 * m2) / double(s.count));
    return s;
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("median of empty sample");
    std::sort(v.begin(), v.end());
    size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// chi-square upper critical values at p = 0.01 for the isotropy tests
inline double chi2_crit_p01(int dof) {
    switch (dof) {
        case 1: return 6.6349;
        case 2: return 9.2103;
        case 3: return 11.3449;
        default: throw std::invalid_argument("chi2_crit_p01: unsupported dof");
    }
}

} // namespace brw
