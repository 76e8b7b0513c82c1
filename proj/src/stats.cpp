#include "erank/stats.hpp"

#include <algorithm>
#include <array>
#include <tuple>
#include <cmath>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "erank/error.hpp"

namespace erank::stats {

namespace {

double o_ln_o_over_e(double observed, double expected) {
    if (observed == 0.0) return 0.0;
    return observed * std::log(observed / expected);
}

}  // namespace

GTestResult g_test_2x2(std::uint64_t users_a, std::uint64_t clickers_a, std::uint64_t users_b,
                       std::uint64_t clickers_b) {
    if (users_a == 0 || users_b == 0) throw ValidationError("g-test needs users in both arms");
    if (clickers_a > users_a || clickers_b > users_b) throw ValidationError("clickers exceed users");

    const double n = static_cast<double>(users_a) + static_cast<double>(users_b);
    const double clicks = static_cast<double>(clickers_a) + static_cast<double>(clickers_b);
    const double quiet = n - clicks;
    GTestResult r;
    if (clicks == 0.0 || quiet == 0.0) return r;  // degenerate: both arms all-0 or all-1

    if (std::tie(users_a, clickers_a) > std::tie(users_b, clickers_b)) {
        std::swap(users_a, users_b);
        std::swap(clickers_a, clickers_b);
    }
    const std::array<double, 2> arm{static_cast<double>(users_a), static_cast<double>(users_b)};
    const std::array<double, 2> hit{static_cast<double>(clickers_a), static_cast<double>(clickers_b)};
    double sum = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
        sum += o_ln_o_over_e(hit[i], arm[i] * clicks / n);
        sum += o_ln_o_over_e(arm[i] - hit[i], arm[i] * quiet / n);
    }
    // Rounding can leave a tiny negative sum for identical proportions.
    r.g_statistic = std::max(0.0, 2.0 * sum);
    r.p_value = chi2_df1_survival(r.g_statistic);
    r.confidence = 1.0 - r.p_value;
    r.significant_at_90 = r.confidence >= 0.90;
    return r;
}

double chi2_df1_survival(double x) {
    if (x <= 0.0) return 1.0;
    return std::erfc(std::sqrt(x / 2.0));
}

double normal_critical_value(double level) {
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("confidence level must be in (0, 1)");
    return std::sqrt(2.0) * boost::math::erf_inv(level);
}

double proportion_halfwidth(double rate, std::uint64_t n, double level) {
    if (n == 0) throw ValidationError("half-width needs n > 0");
    return normal_critical_value(level) * std::sqrt(rate * (1.0 - rate) / static_cast<double>(n));
}

double ks_uniform_statistic(std::span<const double> sample) {
    if (sample.empty()) throw ValidationError("empty sample");
    std::vector<double> xs(sample.begin(), sample.end());
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double x = std::clamp(xs[i], 0.0, 1.0);
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - x, x - static_cast<double>(i) / n});
    }
    return d;
}

double ks_p_value(double statistic, std::size_t n) {
    const double sn = std::sqrt(static_cast<double>(n));
    const double lambda = (sn + 0.12 + 0.11 / sn) * statistic;
    if (lambda < 1e-3) return 1.0;
    double sum = 0.0;
    for (int j = 1; j <= 100; ++j) {
        double term = std::exp(-2.0 * j * j * lambda * lambda);
        sum += (j % 2 ? 2.0 : -2.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(sum, 0.0, 1.0);
}

}  // namespace erank::stats
