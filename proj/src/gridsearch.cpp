#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "budgetlab/oracle.hpp"

namespace budgetlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Grids small enough for plain recursive enumeration; larger simplices go
// through the parametric DP below, which is exact but touches only
// O(T * n^2) states per probe instead of the full composition count.
constexpr double kPlainEnumLimit = 1.2e6;
constexpr double kSerialEnumLimit = 2e7;
constexpr double kDpWorkLimit = 2.5e8;

struct Grid {
    int T = 0;
    int n = 0;             // budget units per period, so allocations sum to n
    double budget = 0.0;
    std::vector<std::vector<double>> v;  // v[t][u] = marginal ROI at u units

    double unit_value(int units) const {
        return (static_cast<double>(units) * budget) / static_cast<double>(n);
    }
};

Grid make_grid(const Environment& env, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("solve_bruteforce: step must be positive");
    if (step > env.budget)
        throw std::invalid_argument("solve_bruteforce: step exceeds the budget (degenerate grid)");
    Grid g;
    g.T = env.periods();
    g.budget = env.budget;
    g.n = static_cast<int>(std::llround(env.budget / step));
    if (g.n < 1) throw std::invalid_argument("solve_bruteforce: step too coarse for the budget");
    g.v.assign(g.T, std::vector<double>(g.n + 1));
    for (int t = 0; t < g.T; ++t)
        for (int u = 0; u <= g.n; ++u)
            g.v[t][u] = env.curves[t].eval(std::min(g.unit_value(u), env.budget));
    return g;
}

double simplex_size(int n, int T) {
    // C(n + T - 1, T - 1), computed in doubles (overflow-safe for our use)
    double r = 1.0;
    for (int i = 1; i <= T - 1; ++i) r *= static_cast<double>(n + i) / static_cast<double>(i);
    return r;
}

struct Best {
    double var = kInf;
    std::vector<int> units;

    void offer(double var_cand, const std::vector<int>& cand) {
        if (units.empty() || var_cand < var) {
            var = var_cand;
            units = cand;
            return;
        }
        if (var_cand == var &&
            std::lexicographical_compare(cand.begin(), cand.end(), units.begin(), units.end()))
            units = cand;
    }
};

void enumerate_rec(const Grid& g, int t, int remaining, double s, double q,
                   std::vector<int>& partial, Best& best) {
    if (t == g.T - 1) {
        const double r = g.v[t][remaining];
        const double s2 = s + r;
        const double q2 = q + r * r;
        const double var = (q2 - s2 * s2 / g.T) / g.T;
        partial[t] = remaining;
        best.offer(var, partial);
        return;
    }
    for (int b = 0; b <= remaining; ++b) {
        const double r = g.v[t][b];
        partial[t] = b;
        enumerate_rec(g, t + 1, remaining - b, s + r, q + r * r, partial, best);
    }
}

Allocation units_to_allocation(const Grid& g, const std::vector<int>& units) {
    Allocation a;
    a.values.resize(g.T);
    for (int t = 0; t < g.T; ++t) a.values[t] = g.unit_value(units[t]);
    return a;
}

Best enumerate_parallel(const Grid& g) {
    if (g.T == 1) {
        Best b;
        b.offer(0.0, {g.n});
        return b;
    }
    std::vector<Best> per_first(static_cast<std::size_t>(g.n) + 1);
#pragma omp parallel for schedule(dynamic, 8)
    for (int b1 = 0; b1 <= g.n; ++b1) {
        const double r = g.v[0][b1];
        std::vector<int> partial(g.T, 0);
        partial[0] = b1;
        enumerate_rec(g, 1, g.n - b1, r, r * r, partial, per_first[b1]);
    }
    // ascending merge keeps the result identical to a serial lexicographic scan
    Best best;
    for (int b1 = 0; b1 <= g.n; ++b1)
        if (!per_first[b1].units.empty()) best.offer(per_first[b1].var, per_first[b1].units);
    return best;
}

// --- Parametric DP -------------------------------------------------------
//
// population variance of r = min over mu of (1/T) * sum_t (r_t - mu)^2, so
//
//   min_alloc Var(r(alloc)) = min_mu (1/T) * min_alloc sum_t (r_t - mu)^2.
//
// For a fixed mu the inner problem is separable across periods and solved
// exactly by a knapsack-style DP over (period, units). Writing the DP value
// as g(mu) = T*mu^2 + L(mu), L is a concave piecewise-linear envelope of
// lines, so chords of L bound g below on any interval. Branch and bound on
// mu intervals then converges to the exact grid optimum.

struct DpProbe {
    double mu = 0.0;
    double total_cost = 0.0;  // g(mu)
    double line = 0.0;        // L(mu) = g(mu) - T*mu^2
    double var = 0.0;
    std::vector<int> units;
};

DpProbe dp_probe(const Grid& g, double mu) {
    const int n = g.n;
    const int T = g.T;
    std::vector<std::vector<double>> D(T, std::vector<double>(n + 1));
    for (int u = 0; u <= n; ++u) {
        const double diff = g.v[T - 1][u] - mu;
        D[T - 1][u] = diff * diff;
    }
    for (int t = T - 2; t >= 0; --t) {
        const std::vector<double>& next = D[t + 1];
        const std::vector<double>& vt = g.v[t];
        std::vector<double>& cur = D[t];
#pragma omp parallel for schedule(static)
        for (int u = 0; u <= n; ++u) {
            double m = kInf;
            for (int b = 0; b <= u; ++b) {
                const double diff = vt[b] - mu;
                const double c = diff * diff + next[u - b];
                if (c < m) m = c;
            }
            cur[u] = m;
        }
    }

    DpProbe p;
    p.mu = mu;
    p.total_cost = D[0][n];
    p.line = p.total_cost - T * mu * mu;
    p.units.assign(T, 0);
    // forward reconstruction by re-minimizing each level; strict `<` keeps
    // the smallest unit count on cost ties
    int u = n;
    for (int t = 0; t < T - 1; ++t) {
        int chosen = 0;
        double best_cost = kInf;
        for (int b = 0; b <= u; ++b) {
            const double diff = g.v[t][b] - mu;
            const double c = diff * diff + D[t + 1][u - b];
            if (c < best_cost) {
                best_cost = c;
                chosen = b;
            }
        }
        p.units[t] = chosen;
        u -= chosen;
    }
    p.units[T - 1] = u;

    double s = 0.0, q = 0.0;
    for (int t = 0; t < T; ++t) {
        const double r = g.v[t][p.units[t]];
        s += r;
        q += r * r;
    }
    p.var = (q - s * s / T) / T;
    return p;
}

Best dp_optimize(const Grid& g) {
    double lambda_max = 0.0;
    for (int t = 0; t < g.T; ++t) lambda_max = std::max(lambda_max, g.v[t][0]);

    Best best;
    DpProbe p_lo = dp_probe(g, 0.0);
    best.offer(p_lo.var, p_lo.units);
    if (lambda_max <= 0.0) return best;  // every marginal is zero everywhere
    DpProbe p_hi = dp_probe(g, lambda_max);
    best.offer(p_hi.var, p_hi.units);

    struct Seg {
        double mu1, line1, mu2, line2;
    };
    std::vector<Seg> stack{{p_lo.mu, p_lo.line, p_hi.mu, p_hi.line}};
    const double width_floor = 1e-12 * std::max(1.0, lambda_max);
    constexpr int kMaxProbes = 600;
    int probes = 2;

    while (!stack.empty() && probes < kMaxProbes) {
        const Seg seg = stack.back();
        stack.pop_back();
        const double width = seg.mu2 - seg.mu1;
        if (width <= width_floor) continue;

        // lower bound of g(mu)/T over the segment via the chord of L
        const double slope = (seg.line2 - seg.line1) / width;
        const double icept = seg.line1 - slope * seg.mu1;
        double mu_v = -slope / (2.0 * g.T);
        mu_v = std::clamp(mu_v, seg.mu1, seg.mu2);
        const double lb = (g.T * mu_v * mu_v + slope * mu_v + icept) / g.T;
        if (lb > best.var) continue;

        const double mid = 0.5 * (seg.mu1 + seg.mu2);
        DpProbe pm = dp_probe(g, mid);
        ++probes;
        best.offer(pm.var, pm.units);
        stack.push_back({mid, pm.line, seg.mu2, seg.line2});
        stack.push_back({seg.mu1, seg.line1, mid, pm.line});
    }
    return best;
}

}  // namespace

Allocation solve_bruteforce(const Environment& env, double step) {
    const Grid g = make_grid(env, step);
    const double size = simplex_size(g.n, g.T);
    if (size <= kPlainEnumLimit) {
        Best best = enumerate_parallel(g);
        return units_to_allocation(g, best.units);
    }
    const double dp_work = static_cast<double>(g.T) * (g.n + 1.0) * (g.n + 1.0);
    if (dp_work > kDpWorkLimit)
        throw std::invalid_argument(
            "solve_bruteforce: grid too large to enumerate; use a coarser step");
    Best best = dp_optimize(g);
    return units_to_allocation(g, best.units);
}

Allocation solve_bruteforce_serial(const Environment& env, double step) {
    const Grid g = make_grid(env, step);
    const double size = simplex_size(g.n, g.T);
    if (size > kSerialEnumLimit)
        throw std::invalid_argument(
            "solve_bruteforce_serial: grid too large to enumerate; use a coarser step");
    Best best;
    std::vector<int> partial(g.T, 0);
    if (g.T == 1) {
        best.offer(0.0, {g.n});
    } else {
        enumerate_rec(g, 0, g.n, 0.0, 0.0, partial, best);
    }
    return units_to_allocation(g, best.units);
}

}  // namespace budgetlab
