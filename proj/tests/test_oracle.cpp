#include <cmath>
#include <stdexcept>

#include "budgetlab/envmodel.hpp"
#include "budgetlab/oracle.hpp"
#include "budgetlab/rng.hpp"
#include "doctest.h"

using namespace budgetlab;

namespace {

Environment two_linear_curves() {
    Environment env;
    env.budget = 6.0;
    env.curves.push_back(MroiCurve::polynomial({2.0, -0.5}));
    env.curves.push_back(MroiCurve::polynomial({1.0, -0.25}));
    return env;
}

Environment identical_linear(int T, double budget) {
    Environment env;
    env.budget = budget;
    for (int t = 0; t < T; ++t)
        env.curves.push_back(MroiCurve::polynomial({1.0, -1.0 / budget}));
    return env;
}

}  // namespace

TEST_CASE("mroi_variance: worked values") {
    CHECK(mroi_variance(std::vector<double>{0.2, 0.2, 0.2}) == 0.0);
    CHECK(mroi_variance(std::vector<double>{0.1, 0.3}) == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(mroi_variance(std::vector<double>{0.0, 0.2, 0.4}) ==
          doctest::Approx(2.0 / 75.0).epsilon(1e-12));
    CHECK_THROWS_AS(mroi_variance(std::vector<double>{0.5}), std::invalid_argument);
}

TEST_CASE("solve_equal_marginal: closed-form linear case") {
    // 2 - 0.5 b1 = 1 - 0.25 b2 with b1 + b2 = 6 gives b1 = 10/3, lambda = 1/3
    const OracleResult res = solve_equal_marginal(two_linear_curves());
    CHECK(res.allocation.values[0] == doctest::Approx(10.0 / 3.0).epsilon(1e-7));
    CHECK(res.allocation.values[1] == doctest::Approx(8.0 / 3.0).epsilon(1e-7));
    CHECK(res.common_marginal == doctest::Approx(1.0 / 3.0).epsilon(1e-7));
    CHECK(res.residual <= 1e-8 * 6.0);
}

TEST_CASE("solve_equal_marginal: identical curves split uniformly") {
    const OracleResult res = solve_equal_marginal(identical_linear(3, 6.0));
    for (double v : res.allocation.values) CHECK(v == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("solve_equal_marginal: saturation when zero-crossing mass is short") {
    Environment env;
    env.budget = 6.0;
    env.curves.push_back(MroiCurve::polynomial({1.0, -2.0}));  // crosses at 0.5
    env.curves.push_back(MroiCurve::polynomial({1.0, -1.0}));  // crosses at 1.0
    const OracleResult res = solve_equal_marginal(env);
    CHECK(res.common_marginal == 0.0);
    CHECK(res.allocation.values[0] == doctest::Approx(0.5 + 2.25).epsilon(1e-9));
    CHECK(res.allocation.values[1] == doctest::Approx(1.0 + 2.25).epsilon(1e-9));
    CHECK(res.residual <= 1e-8 * env.budget);
}

TEST_CASE("oracle marginals are equal over interior periods on random environments") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        GenSpec spec;
        spec.periods = 2 + static_cast<int>(seed % 5);
        spec.family = seed % 2 == 0 ? CurveFamily::Mixed : CurveFamily::Polynomial;
        const Environment env = env_generate(seed, spec);
        const OracleResult res = solve_equal_marginal(env);
        CHECK(res.residual <= 1e-8 * env.budget);

        double lo = 1e300, hi = -1e300;
        int interior = 0;
        for (int t = 0; t < env.periods(); ++t) {
            const double b = res.allocation.values[t];
            const double zc = env.curves[t].zero_crossing(env.budget * 4.0);
            if (b > 0.0 && b < zc) {
                const double m = env.curves[t].eval(std::min(b, env.budget));
                lo = std::min(lo, m);
                hi = std::max(hi, m);
                ++interior;
            }
        }
        if (interior >= 2) CHECK(hi - lo <= 1e-6);
    }
}

TEST_CASE("invert_marginal: total demand is non-increasing in the level") {
    for (std::uint64_t seed : {3ull, 9ull, 21ull}) {
        GenSpec spec;
        spec.periods = 4;
        const Environment env = env_generate(seed, spec);
        double lambda_hi = 0.0;
        for (const auto& c : env.curves) lambda_hi = std::max(lambda_hi, c.eval(0.0));
        double prev = 1e300;
        for (int i = 1; i <= 50; ++i) {
            const double level = lambda_hi * i / 50.0;
            double total = 0.0;
            for (double d : invert_marginal(env, level)) total += d;
            CHECK(total <= prev + 1e-9);
            prev = total;
        }
    }
}

TEST_CASE("solve_bruteforce: fine grid matches the equal-marginal solution") {
    const Environment env = two_linear_curves();
    const Allocation grid = solve_bruteforce(env, 0.01);
    CHECK(grid.values[0] == doctest::Approx(3.33).epsilon(1e-9));
    CHECK(grid.values[1] == doctest::Approx(2.67).epsilon(1e-9));
    const double grid_var = mroi_variance(env_evaluate(env, grid.values));
    // frozen from direct evaluation: marginals [0.335, 0.3325] at [3.33, 2.67]
    CHECK(grid_var == doctest::Approx(1.5625e-6).epsilon(1e-9));
    const OracleResult oracle = solve_equal_marginal(env);
    const double oracle_var = mroi_variance(env_evaluate(env, oracle.allocation.values));
    CHECK(oracle_var <= grid_var + 1e-4);
}

TEST_CASE("solve_bruteforce: symmetric tie resolves to the uniform split") {
    const Allocation a = solve_bruteforce(identical_linear(2, 6.0), 1.0);
    CHECK(a.values[0] == 3.0);
    CHECK(a.values[1] == 3.0);
}

TEST_CASE("solve_bruteforce: degenerate steps are rejected") {
    const Environment env = two_linear_curves();
    CHECK_THROWS_AS(solve_bruteforce(env, 7.0), std::invalid_argument);
    CHECK_THROWS_AS(solve_bruteforce(env, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(solve_bruteforce(env, 1e-7), std::invalid_argument);
}

TEST_CASE("solve_bruteforce agrees with the serial reference enumeration") {
    // spans both the plain-enumeration path and the parametric-DP path
    struct Case {
        std::uint64_t seed;
        int periods;
        double step;
    };
    for (const Case c : {Case{11, 3, 0.1}, Case{12, 4, 0.25}, Case{13, 5, 0.5},
                         Case{14, 6, 0.15}, Case{15, 5, 0.08}}) {
        GenSpec spec;
        spec.periods = c.periods;
        spec.family = CurveFamily::Mixed;
        const Environment env = env_generate(c.seed, spec);
        const Allocation fast = solve_bruteforce(env, c.step);
        const Allocation ref = solve_bruteforce_serial(env, c.step);
        REQUIRE(fast.values.size() == ref.values.size());
        for (std::size_t t = 0; t < fast.values.size(); ++t)
            CHECK(fast.values[t] == ref.values[t]);
    }
}

TEST_CASE("solve_bruteforce DP path agrees with the serial reference on identical curves") {
    // simplex size past the plain-enumeration limit forces the DP path
    const Environment env = identical_linear(6, 6.0);
    const Allocation fast = solve_bruteforce(env, 6.0 / 40.0);
    const Allocation ref = solve_bruteforce_serial(env, 6.0 / 40.0);
    for (std::size_t t = 0; t < fast.values.size(); ++t) CHECK(fast.values[t] == ref.values[t]);
}

TEST_CASE("exchange property: oracle solutions are locally optimal on the grid") {
    for (std::uint64_t seed = 30; seed < 40; ++seed) {
        GenSpec spec;
        spec.periods = 4;
        const Environment env = env_generate(seed, spec);
        const OracleResult res = solve_equal_marginal(env);
        const double base = mroi_variance(env_evaluate(env, res.allocation.values));
        const double delta = 0.01;
        for (int i = 0; i < env.periods(); ++i) {
            for (int j = 0; j < env.periods(); ++j) {
                if (i == j) continue;
                auto moved = res.allocation.values;
                if (moved[i] < delta) continue;
                moved[i] -= delta;
                moved[j] += delta;
                if (moved[j] > env.budget) continue;
                const double var = mroi_variance(env_evaluate(env, moved));
                CHECK(var >= base - 1e-6);
            }
        }
    }
}
