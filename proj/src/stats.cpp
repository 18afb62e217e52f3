#include "budgetlab/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace budgetlab {

double mean(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("mean: empty input");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double population_variance(std::span<const double> xs) {
    if (xs.size() < 2) throw std::invalid_argument("population_variance: need at least 2 values");
    const double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs) {
    if (xs.size() < 2) throw std::invalid_argument("sample_variance: need at least 2 values");
    const double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

namespace {

double log_gamma(double x) { return std::lgamma(x); }

// regularized incomplete beta I_x(a, b) via the standard continued fraction
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-16;
    constexpr double kFpMin = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

double inc_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double lbeta =
        log_gamma(a + b) - log_gamma(a) - log_gamma(b) + a * std::log(x) + b * std::log(1.0 - x);
    const double front = std::exp(lbeta);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - std::exp(log_gamma(a + b) - log_gamma(b) - log_gamma(a) + b * std::log(1.0 - x) +
                          a * std::log(x)) *
                     betacf(b, a, 1.0 - x) / b;
}

// CDF of Student's t at value t >= 0
double t_cdf(double t, double dof) {
    const double x = dof / (dof + t * t);
    return 1.0 - 0.5 * inc_beta(dof / 2.0, 0.5, x);
}

}  // namespace

double t_quantile(double p, int dof) {
    if (dof < 1) throw std::invalid_argument("t_quantile: dof must be >= 1");
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("t_quantile: p must be in (0,1)");
    if (p == 0.5) return 0.0;
    const bool upper = p > 0.5;
    const double target = upper ? p : 1.0 - p;

    double lo = 0.0, hi = 2.0;
    while (t_cdf(hi, dof) < target && hi < 1e12) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (t_cdf(mid, dof) < target)
            lo = mid;
        else
            hi = mid;
    }
    const double q = 0.5 * (lo + hi);
    return upper ? q : -q;
}

MeanCI mean_ci(std::span<const double> xs, double level) {
    MeanCI out;
    out.n = static_cast<int>(xs.size());
    out.mean = mean(xs);
    if (xs.size() < 2) {
        out.lo = out.hi = out.mean;
        out.half_width = 0.0;
        return out;
    }
    const double sd = std::sqrt(sample_variance(xs));
    const double se = sd / std::sqrt(static_cast<double>(xs.size()));
    const double q = t_quantile(0.5 + level / 2.0, static_cast<int>(xs.size()) - 1);
    out.half_width = q * se;
    out.lo = out.mean - out.half_width;
    out.hi = out.mean + out.half_width;
    return out;
}

}  // namespace budgetlab
