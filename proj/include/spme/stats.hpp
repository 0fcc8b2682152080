#pragma once

#include <cstddef>
#include <span>

namespace spme {

struct MeanEstimate {
    double mean = 0.0;
    double se = 0.0;  ///< standard error of the mean
    std::size_t n = 0;
};

MeanEstimate mean_and_se(std::span<const double> x);

/// One-sided 95% upper confidence limit mean + 1.645 se.
double ucl95(const MeanEstimate& e);

struct ProportionInterval {
    double lo = 0.0;
    double hi = 1.0;
};

/// Wilson score interval for k successes out of n (z = 1.96 by default).
ProportionInterval wilson_interval(std::size_t k, std::size_t n, double z = 1.959963984540054);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

/// Least squares y = slope x + intercept.
LineFit fit_line(std::span<const double> x, std::span<const double> y);
/// Least squares in log-log coordinates; all inputs must be positive.
LineFit fit_loglog(std::span<const double> x, std::span<const double> y);

}  // namespace spme
