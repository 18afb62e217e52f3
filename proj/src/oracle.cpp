#include "budgetlab/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace budgetlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxBisectIters = 200;
constexpr double kLambdaTol = 1e-10;

double checked_zero_crossing(const MroiCurve& curve, double budget, int index) {
    const double zc = curve.zero_crossing(std::max(budget * 4.0, budget + 1.0));
    if (std::isnan(zc)) {
        throw std::invalid_argument("oracle: curve " + std::to_string(index) +
                                    " has no well-defined zero crossing");
    }
    return zc;
}

}  // namespace

std::vector<double> invert_marginal(const Environment& env, double level) {
    if (level < 0.0) throw std::domain_error("invert_marginal: level must be nonnegative");
    const int T = env.periods();
    std::vector<double> demand(T, 0.0);
    for (int t = 0; t < T; ++t) {
        const MroiCurve& c = env.curves[t];
        const double at0 = c.eval(0.0);
        if (level == 0.0) {
            demand[t] = checked_zero_crossing(c, env.budget, t);
        } else if (at0 <= level) {
            demand[t] = 0.0;
        } else {
            const double hi = checked_zero_crossing(c, env.budget, t);
            const double cap = std::isinf(hi) ? env.budget * 4.0 : hi;
            // curves still above the level at the cap absorb "everything";
            // the root of the bisection is unaffected since per-period
            // demand at the root never exceeds B
            demand[t] = c.raw(cap) > level ? cap : c.invert(level, cap);
        }
    }
    return demand;
}

namespace {

double total_demand(const Environment& env, double level) {
    double s = 0.0;
    for (double d : invert_marginal(env, level)) s += d;
    return s;
}

// Distributes the residual |sum - B| along the equal-marginal manifold:
// each interior period absorbs in proportion to 1/|F'|, which keeps the
// marginals equal to first order.
void repair_residual(const Environment& env, std::vector<double>& alloc,
                     const std::vector<double>& caps) {
    const int T = env.periods();
    for (int pass = 0; pass < 4; ++pass) {
        double sum = 0.0;
        for (double v : alloc) sum += v;
        const double deficit = env.budget - sum;
        if (std::fabs(deficit) <= 1e-13 * std::max(1.0, env.budget)) break;

        std::vector<double> weight(T, 0.0);
        double wsum = 0.0;
        for (int t = 0; t < T; ++t) {
            // only interior periods move, so zero-capped periods stay at 0
            // and the equalized marginals stay equal
            if (!(alloc[t] > 0.0 && alloc[t] < caps[t])) continue;
            const double s = std::fabs(env.curves[t].slope(alloc[t]));
            weight[t] = 1.0 / std::max(s, 1e-9);
            wsum += weight[t];
        }
        if (wsum <= 0.0) break;
        for (int t = 0; t < T; ++t) {
            if (weight[t] <= 0.0) continue;
            alloc[t] = std::max(0.0, alloc[t] + deficit * weight[t] / wsum);
        }
    }
}

}  // namespace

OracleResult solve_equal_marginal(const Environment& env) {
    validate_environment(env);
    const int T = env.periods();
    const double B = env.budget;

    double lambda_hi = 0.0;
    for (const auto& c : env.curves) lambda_hi = std::max(lambda_hi, c.eval(0.0));

    std::vector<double> caps(T);
    double cap_sum = 0.0;
    for (int t = 0; t < T; ++t) {
        caps[t] = checked_zero_crossing(env.curves[t], B, t);
        cap_sum += caps[t];
    }

    OracleResult res;
    if (!(cap_sum > B)) {
        // Saturation: even a zero marginal cannot absorb the budget. Spread
        // the surplus uniformly over the zero-crossing caps.
        std::vector<double> alloc(T);
        const double surplus = (B - cap_sum) / T;
        for (int t = 0; t < T; ++t) alloc[t] = caps[t] + surplus;
        double sum = 0.0;
        for (double v : alloc) sum += v;
        res.allocation.values = std::move(alloc);
        res.common_marginal = 0.0;
        res.iterations = 0;
        res.residual = std::fabs(sum - B);
        return res;
    }

    // total_demand(0) > B >= 0 = total_demand(lambda_hi): bisect on the level
    double lo = 0.0, hi = lambda_hi;
    int iters = 0;
    for (; iters < kMaxBisectIters && (hi - lo) > kLambdaTol * std::max(1.0, lambda_hi); ++iters) {
        const double mid = 0.5 * (lo + hi);
        if (total_demand(env, mid) > B)
            lo = mid;
        else
            hi = mid;
    }
    const double lambda = 0.5 * (lo + hi);
    std::vector<double> alloc = invert_marginal(env, lambda);
    for (int t = 0; t < T; ++t)
        if (std::isinf(alloc[t])) alloc[t] = B;  // unreachable once lambda > 0
    repair_residual(env, alloc, caps);

    double sum = 0.0;
    for (double v : alloc) sum += v;
    res.allocation.values = std::move(alloc);
    res.common_marginal = std::max(lambda, 0.0);
    res.iterations = iters;
    res.residual = std::fabs(sum - B);
    return res;
}

double mroi_variance(std::span<const double> mroi) {
    if (mroi.size() < 2)
        throw std::invalid_argument("mroi_variance: need at least 2 periods");
    double m = 0.0, lo = mroi[0], hi = mroi[0];
    for (double v : mroi) {
        m += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (lo == hi) return 0.0;  // constant vector, exactly
    m /= static_cast<double>(mroi.size());
    double s = 0.0;
    for (double v : mroi) s += (v - m) * (v - m);
    return s / static_cast<double>(mroi.size());
}

}  // namespace budgetlab
