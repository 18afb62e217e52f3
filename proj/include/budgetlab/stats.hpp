#pragma once

#include <span>
#include <vector>

namespace budgetlab {

double mean(std::span<const double> xs);

// population variance (divide by n)
double population_variance(std::span<const double> xs);

// sample variance (divide by n-1); n >= 2
double sample_variance(std::span<const double> xs);

// Quantile of Student's t distribution with `dof` degrees of freedom,
// p in (0, 1). Used for confidence intervals over repeated runs.
double t_quantile(double p, int dof);

struct MeanCI {
    double mean = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    double half_width = 0.0;
    int n = 0;
};

// Mean with a two-sided t-based confidence interval. With n == 1 the
// interval is reported as not applicable (half_width = 0, lo = hi = mean).
MeanCI mean_ci(std::span<const double> xs, double level = 0.95);

}  // namespace budgetlab
