#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace budgetlab {

enum class CurveKind { Polynomial, Exponential, Tabular };

// One period's marginal-ROI function F(b), evaluated as max{F(b), 0}.
// F must be strictly decreasing on the working range until its zero crossing.
struct MroiCurve {
    CurveKind kind = CurveKind::Polynomial;

    // Polynomial: coefficients of F in ascending degree.
    std::vector<double> coeffs;

    // Exponential: F(b) = a * exp(-k*b) - d, with a > 0, k > 0, d >= 0.
    double a = 0.0, k = 0.0, d = 0.0;

    // Tabular: (budget, mroi) sample points with strictly increasing budgets;
    // evaluation interpolates piecewise-linearly and extends boundary values.
    std::vector<std::pair<double, double>> points;

    static MroiCurve polynomial(std::vector<double> coeffs);
    static MroiCurve exponential(double a, double k, double d);
    static MroiCurve tabular(std::vector<std::pair<double, double>> points);

    // F(b) without the clamp; b >= 0
    double raw(double b) const;

    // max{F(b), 0}; b >= 0
    double eval(double b) const;

    // dF/db at b (segment slope for tabular curves)
    double slope(double b) const;

    // Smallest b >= 0 with F(b) <= 0, or +inf if F stays positive on [0, hi].
    double zero_crossing(double hi) const;

    // Budget where eval(b) == level, for 0 < level <= eval(0), searched on
    // [0, hi]. Requires a strictly decreasing positive branch.
    double invert(double level, double hi) const;
};

struct Environment {
    std::vector<MroiCurve> curves;
    double budget = 0.0;
    std::optional<std::uint64_t> seed;

    int periods() const { return static_cast<int>(curves.size()); }
};

// Length-T budget vector. `validated` construction enforces nonnegativity
// and the exact-sum constraint; raw agent outputs are plain vectors until
// reward scoring decides their fate.
struct Allocation {
    std::vector<double> values;

    static Allocation validated(std::vector<double> values, double budget);

    double sum() const;
};

// One executed episode: the (possibly raw) allocation and the observed
// marginal-ROI response. mroi has the same length as the allocation.
struct EpisodeRecord {
    std::vector<double> allocation;
    std::vector<double> mroi;
};

// max{F(b), 0} with the domain check against the environment budget
double curve_eval(const MroiCurve& curve, double b, double budget);

// Per-period marginal ROI for an allocation; values[t] must be in [0, B].
std::vector<double> env_evaluate(const Environment& env, std::span<const double> values);

enum class CurveFamily { Polynomial, Exponential, Mixed };

struct GenSpec {
    int periods = 6;
    double budget = 6.0;
    CurveFamily family = CurveFamily::Polynomial;
    // F(0) range for generated curves
    double intercept_lo = 0.5;
    double intercept_hi = 2.0;
    // zero-crossing range; clamped at generation time to
    // [0.3*B/T, 2.5*B] so every generated curve stays well posed
    double crossing_lo = 0.5;
    double crossing_hi = -1.0;  // < 0 means "3*B/T" resolved at generation
};

// Deterministic in `seed`: same seed, bit-identical environment.
Environment env_generate(std::uint64_t seed, const GenSpec& spec);

// Throws std::invalid_argument naming the offending curve when an invariant
// fails. Checks strict decrease while positive on a dense grid.
void validate_environment(const Environment& env);

Environment env_load(const std::string& path);
void env_save(const Environment& env, const std::string& path);

std::string env_to_text(const Environment& env);
Environment env_from_text(const std::string& text, const std::string& origin = "<string>");

}  // namespace budgetlab
