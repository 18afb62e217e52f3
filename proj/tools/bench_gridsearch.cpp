// Benchmark comparing the naive serial grid enumeration against the
// production solver (pruned parametric DP with OpenMP kernels) on growing
// grids. Both must return identical allocations.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "budgetlab/envmodel.hpp"
#include "budgetlab/oracle.hpp"

using namespace budgetlab;

namespace {

double time_of(const std::function<Allocation()>& fn, Allocation& out) {
    const auto start = std::chrono::steady_clock::now();
    out = fn();
    const auto elapsed = std::chrono::steady_clock::now() - start;
    return std::chrono::duration<double>(elapsed).count();
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
    std::printf("OpenMP: disabled\n");
#endif
    std::printf("%-6s %-8s %-12s %-12s %-10s %-8s\n", "T", "step", "serial_s", "solver_s",
                "speedup", "match");

    struct Case {
        int periods;
        double step;
        std::uint64_t seed;
    };
    // the last three push past the plain-enumeration limit so the production
    // solver switches to its parametric-DP path
    const std::vector<Case> cases{
        {3, 0.05, 41}, {4, 0.1, 42},   {4, 0.05, 43},
        {5, 0.2, 44},  {5, 0.05, 45},  {6, 0.15, 46}, {6, 0.1, 47},
    };

    for (const Case& c : cases) {
        GenSpec spec;
        spec.periods = c.periods;
        spec.budget = 6.0;
        spec.family = CurveFamily::Mixed;
        const Environment env = env_generate(c.seed, spec);

        Allocation serial_out, solver_out;
        const double serial_s =
            time_of([&] { return solve_bruteforce_serial(env, c.step); }, serial_out);
        const double solver_s = time_of([&] { return solve_bruteforce(env, c.step); }, solver_out);
        const bool match = serial_out.values == solver_out.values;
        std::printf("%-6d %-8.3f %-12.4f %-12.4f %-10.1f %-8s\n", c.periods, c.step, serial_s,
                    solver_s, serial_s / std::max(solver_s, 1e-9), match ? "yes" : "NO");
        if (!match) return 1;
    }
    return 0;
}
