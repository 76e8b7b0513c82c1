#pragma once

#include <cstdint>
#include <span>

namespace erank::stats {

struct GTestResult {
    double g_statistic = 0.0;
    int degrees_of_freedom = 1;
    double p_value = 1.0;
    double confidence = 0.0;  // 1 - p_value
    bool significant_at_90 = false;
};

/// Likelihood-ratio test on the 2x2 table {clickers, non-clickers} x {A, B}.
/// Requires 0 <= clickers <= users and users > 0 for both arms.
GTestResult g_test_2x2(std::uint64_t users_a, std::uint64_t clickers_a, std::uint64_t users_b,
                       std::uint64_t clickers_b);

/// Chi-square(1) survival function, erfc(sqrt(x / 2)).
double chi2_df1_survival(double x);

/// Two-sided standard normal critical value, e.g. 1.6449 for level 0.90.
double normal_critical_value(double level);

/// Normal-approximation half-width z * sqrt(p (1 - p) / n).
double proportion_halfwidth(double rate, std::uint64_t n, double level = 0.90);

/// One-sample Kolmogorov-Smirnov statistic against Uniform(0, 1).
double ks_uniform_statistic(std::span<const double> sample);

/// Asymptotic p-value for a KS statistic on n samples (Stephens' correction).
double ks_p_value(double statistic, std::size_t n);

}  // namespace erank::stats
