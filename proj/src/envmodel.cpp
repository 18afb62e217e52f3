#include "budgetlab/envmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "budgetlab/rng.hpp"
#include "json.hpp"

namespace budgetlab {

namespace {

constexpr int kInvariantGridPoints = 1000;
constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

MroiCurve MroiCurve::polynomial(std::vector<double> coeffs) {
    require(!coeffs.empty(), "polynomial curve needs at least one coefficient");
    MroiCurve c;
    c.kind = CurveKind::Polynomial;
    c.coeffs = std::move(coeffs);
    return c;
}

MroiCurve MroiCurve::exponential(double a, double k, double d) {
    require(a > 0.0, "exponential curve needs a > 0");
    require(k > 0.0, "exponential curve needs k > 0");
    require(d >= 0.0, "exponential curve needs d >= 0");
    MroiCurve c;
    c.kind = CurveKind::Exponential;
    c.a = a;
    c.k = k;
    c.d = d;
    return c;
}

MroiCurve MroiCurve::tabular(std::vector<std::pair<double, double>> points) {
    require(points.size() >= 2, "tabular curve needs at least two sample points");
    for (std::size_t i = 1; i < points.size(); ++i)
        require(points[i].first > points[i - 1].first, "tabular budgets must be strictly increasing");
    bool zero_seen = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
        require(points[i].second >= 0.0, "tabular mroi values must be nonnegative");
        if (zero_seen) {
            require(points[i].second == 0.0, "tabular mroi must stay zero after its first zero");
        } else if (points[i].second == 0.0) {
            zero_seen = true;
        } else if (i > 0) {
            require(points[i].second < points[i - 1].second,
                    "tabular mroi values not decreasing (must fall strictly until the first zero)");
        }
    }
    MroiCurve c;
    c.kind = CurveKind::Tabular;
    c.points = std::move(points);
    return c;
}

double MroiCurve::raw(double b) const {
    switch (kind) {
        case CurveKind::Polynomial: {
            double v = 0.0;
            for (std::size_t i = coeffs.size(); i-- > 0;) v = v * b + coeffs[i];
            return v;
        }
        case CurveKind::Exponential:
            return a * std::exp(-k * b) - d;
        case CurveKind::Tabular: {
            if (b <= points.front().first) return points.front().second;
            if (b >= points.back().first) return points.back().second;
            auto it = std::upper_bound(points.begin(), points.end(), b,
                                       [](double x, const auto& p) { return x < p.first; });
            const auto& hi = *it;
            const auto& lo = *(it - 1);
            const double t = (b - lo.first) / (hi.first - lo.first);
            return lo.second + t * (hi.second - lo.second);
        }
    }
    return 0.0;
}

double MroiCurve::eval(double b) const { return std::max(raw(b), 0.0); }

double MroiCurve::slope(double b) const {
    switch (kind) {
        case CurveKind::Polynomial: {
            double v = 0.0;
            for (std::size_t i = coeffs.size(); i-- > 1;)
                v = v * b + coeffs[i] * static_cast<double>(i);
            return v;
        }
        case CurveKind::Exponential:
            return -a * k * std::exp(-k * b);
        case CurveKind::Tabular: {
            if (points.size() < 2) return 0.0;
            if (b <= points.front().first) {
                const auto& p0 = points[0];
                const auto& p1 = points[1];
                return (p1.second - p0.second) / (p1.first - p0.first);
            }
            auto it = std::upper_bound(points.begin(), points.end(), b,
                                       [](double x, const auto& p) { return x < p.first; });
            if (it == points.end()) --it;
            const auto& hi = *it;
            const auto& lo = *(it - 1);
            return (hi.second - lo.second) / (hi.first - lo.first);
        }
    }
    return 0.0;
}

double MroiCurve::zero_crossing(double hi) const {
    if (raw(0.0) <= 0.0) return 0.0;
    if (kind == CurveKind::Exponential) {
        if (d <= 0.0) return kInf;
        return std::log(a / d) / k;
    }
    if (kind == CurveKind::Tabular) {
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (points[i].second <= 0.0) {
                const auto& p1 = points[i];
                const auto& p0 = points[i - 1];  // i > 0 since points[0].second > 0 here
                const double t = p0.second / (p0.second - p1.second);
                return p0.first + t * (p1.first - p0.first);
            }
        }
        return kInf;  // constant positive extension beyond the last point
    }
    if (raw(hi) > 0.0) return kInf;
    double lo = 0.0, b_hi = hi;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + b_hi);
        if (raw(mid) > 0.0)
            lo = mid;
        else
            b_hi = mid;
    }
    return 0.5 * (lo + b_hi);
}

double MroiCurve::invert(double level, double hi) const {
    const double at0 = eval(0.0);
    require(level > 0.0 && level <= at0, "invert: level outside the curve's positive range");
    if (kind == CurveKind::Exponential) return std::log(a / (level + d)) / k;
    if (kind == CurveKind::Tabular) {
        if (level >= points.front().second) return 0.0;
        for (std::size_t i = 1; i < points.size(); ++i) {
            if (points[i].second <= level) {
                const auto& p0 = points[i - 1];
                const auto& p1 = points[i];
                if (p0.second == p1.second) return p0.first;
                const double t = (p0.second - level) / (p0.second - p1.second);
                return p0.first + t * (p1.first - p0.first);
            }
        }
        throw std::invalid_argument("invert: level below the tabular curve's final value");
    }
    // strictly decreasing on the positive branch; plain bisection
    double lo = 0.0, b_hi = hi;
    if (raw(b_hi) > level) throw std::invalid_argument("invert: level not reached on [0, hi]");
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + b_hi);
        if (raw(mid) > level)
            lo = mid;
        else
            b_hi = mid;
    }
    return 0.5 * (lo + b_hi);
}

Allocation Allocation::validated(std::vector<double> values, double budget) {
    require(!values.empty(), "allocation must be non-empty");
    double sum = 0.0;
    for (double v : values) {
        require(v >= 0.0, "allocation entries must be nonnegative");
        sum += v;
    }
    require(std::fabs(sum - budget) <= 1e-9, "allocation must sum to the budget within 1e-9");
    Allocation a;
    a.values = std::move(values);
    return a;
}

double Allocation::sum() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
}

double curve_eval(const MroiCurve& curve, double b, double budget) {
    if (!(b >= 0.0 && b <= budget))
        throw std::domain_error("curve_eval: budget point outside [0, B]");
    return curve.eval(b);
}

std::vector<double> env_evaluate(const Environment& env, std::span<const double> values) {
    if (static_cast<int>(values.size()) != env.periods())
        throw std::invalid_argument("env_evaluate: allocation length does not match periods");
    std::vector<double> out(values.size());
    for (std::size_t t = 0; t < values.size(); ++t)
        out[t] = curve_eval(env.curves[t], values[t], env.budget);
    return out;
}

namespace {

void check_curve_shape(const MroiCurve& curve, double budget, int index) {
    const auto fail = [index](const std::string& what) {
        throw std::invalid_argument("curve " + std::to_string(index) + " " + what);
    };
    // Tabular curves are strict at their sample points (enforced on
    // construction) but extend flat beyond the sampled range, so the grid
    // check relaxes to non-increasing for them.
    const bool strict = curve.kind != CurveKind::Tabular;
    double prev = curve.eval(0.0);
    bool went_zero = (prev <= 0.0);
    for (int i = 1; i <= kInvariantGridPoints; ++i) {
        const double b = budget * static_cast<double>(i) / kInvariantGridPoints;
        const double v = curve.eval(b);
        if (v < 0.0) fail("evaluates negative (clamp broken)");
        if (went_zero) {
            if (v > 0.0) fail("rises again after reaching zero");
        } else if (v > 0.0) {
            if (strict ? (v >= prev) : (v > prev)) fail("not decreasing");
        } else {
            went_zero = true;
        }
        prev = v;
    }
}

}  // namespace

void validate_environment(const Environment& env) {
    require(env.periods() >= 2, "environment needs at least 2 periods (T >= 2)");
    require(env.budget > 0.0, "environment budget must be positive");
    for (int t = 0; t < env.periods(); ++t) check_curve_shape(env.curves[t], env.budget, t);
}

namespace {

MroiCurve generate_curve(Rng& rng, const GenSpec& spec, CurveFamily family, double cross_lo,
                         double cross_hi) {
    const double intercept = rng.uniform(spec.intercept_lo, spec.intercept_hi);
    const double crossing = rng.uniform(cross_lo, cross_hi);
    if (family == CurveFamily::Polynomial) {
        // F(b) = a0 - c * b^p with the zero crossing placed at `crossing`
        const int p = rng.uniform_int(2) == 0 ? 1 : 2;
        const double c = intercept / std::pow(crossing, p);
        std::vector<double> coeffs(static_cast<std::size_t>(p) + 1, 0.0);
        coeffs[0] = intercept;
        coeffs[static_cast<std::size_t>(p)] = -c;
        return MroiCurve::polynomial(std::move(coeffs));
    }
    // F(b) = a e^{-kb} - d with F(0) = intercept and F(crossing) = 0
    const double d = intercept * rng.uniform(0.15, 0.75);
    const double a = intercept + d;
    const double k = std::log(a / d) / crossing;
    return MroiCurve::exponential(a, k, d);
}

// Variance of the marginal-ROI response to the uniform allocation; the
// difficulty scale of an environment.
double uniform_variance(const std::vector<MroiCurve>& curves, double budget) {
    const double share = budget / static_cast<double>(curves.size());
    double mean = 0.0;
    std::vector<double> values;
    values.reserve(curves.size());
    for (const auto& c : curves) {
        values.push_back(c.eval(share));
        mean += values.back();
    }
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    return var / static_cast<double>(values.size());
}

// Rescales every curve's values by s (shapes and zero crossings preserved).
void scale_curves(std::vector<MroiCurve>& curves, double s) {
    for (auto& c : curves) {
        switch (c.kind) {
            case CurveKind::Polynomial:
                for (double& coeff : c.coeffs) coeff *= s;
                break;
            case CurveKind::Exponential:
                c.a *= s;
                c.d *= s;
                break;
            case CurveKind::Tabular:
                for (auto& [b, m] : c.points) m *= s;
                break;
        }
    }
}

// True when the equal-marginal level clears every intercept with headroom,
// i.e. full equalization is feasible and no period would sit at zero or past
// its crossing. Keeps the optimum of generated environments at (near) zero
// marginal-ROI variance, which the heuristics, the reward shaping and the
// oracle comparisons all assume.
bool equalization_feasible(const std::vector<MroiCurve>& curves, double budget) {
    double min_intercept = 1e300;
    double crossing_mass = 0.0;
    for (const auto& c : curves) {
        min_intercept = std::min(min_intercept, c.eval(0.0));
        const double zc = c.zero_crossing(budget * 4.0);
        crossing_mass += std::isinf(zc) ? budget * 4.0 : zc;
    }
    if (!(crossing_mass >= 1.05 * budget)) return false;  // would saturate
    const double level = 0.98 * min_intercept;
    double demand = 0.0;
    for (const auto& c : curves) {
        if (c.eval(0.0) <= level) return false;
        demand += c.invert(level, budget * 4.0);
    }
    return demand < budget;  // the equalized level stays below every intercept
}

}  // namespace

Environment env_generate(std::uint64_t seed, const GenSpec& spec) {
    require(spec.periods >= 2, "env_generate: periods must be >= 2");
    require(spec.budget > 0.0, "env_generate: budget must be positive");
    require(spec.intercept_lo > 0.0 && spec.intercept_hi >= spec.intercept_lo,
            "env_generate: bad intercept range");

    const double per_period = spec.budget / spec.periods;
    double cross_lo = spec.crossing_lo;
    double cross_hi = spec.crossing_hi > 0.0 ? spec.crossing_hi : 3.0 * per_period;
    cross_lo = std::max(cross_lo, 0.3 * per_period);
    cross_hi = std::min(cross_hi, 2.5 * spec.budget);
    require(cross_lo > 0.0 && cross_hi >= cross_lo,
            "env_generate: zero-crossing range is infeasible");

    Environment env;
    env.budget = spec.budget;
    env.seed = seed;

    Rng rng = Rng(seed).derive(0x656e76);  // "env" stream
    constexpr int kMaxCurveRetries = 16;
    constexpr int kMaxSetRetries = 64;
    for (int attempt = 0; attempt < kMaxSetRetries; ++attempt) {
        env.curves.clear();
        env.curves.reserve(spec.periods);
        bool all_placed = true;
        for (int t = 0; t < spec.periods && all_placed; ++t) {
            CurveFamily fam = spec.family;
            bool placed = false;
            for (int retry = 0; retry < kMaxCurveRetries && !placed; ++retry) {
                Rng curve_rng =
                    rng.derive(static_cast<std::uint64_t>(attempt),
                               static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(retry));
                if (spec.family == CurveFamily::Mixed)
                    fam = curve_rng.uniform_int(2) == 0 ? CurveFamily::Polynomial
                                                        : CurveFamily::Exponential;
                MroiCurve c = generate_curve(curve_rng, spec, fam, cross_lo, cross_hi);
                try {
                    check_curve_shape(c, spec.budget, t);
                    env.curves.push_back(std::move(c));
                    placed = true;
                } catch (const std::invalid_argument&) {
                    // retry with a fresh draw
                }
            }
            all_placed = placed;
        }
        if (!all_placed || !equalization_feasible(env.curves, spec.budget)) continue;

        // normalize the difficulty scale so experiment blocks over different
        // environments are comparable: variance at the uniform allocation is
        // pinned to a common value (shapes and crossings are unaffected)
        constexpr double kUniformVarianceTarget = 0.12;
        const double var_u = uniform_variance(env.curves, spec.budget);
        if (var_u < 1e-4) continue;  // nearly identical curves, degenerate draw
        const double s = std::sqrt(kUniformVarianceTarget / var_u);
        scale_curves(env.curves, s);
        bool in_envelope = true;
        for (const auto& c : env.curves) {
            const double intercept = c.eval(0.0);
            in_envelope = in_envelope && intercept >= 0.3 && intercept <= 2.0 + 1e-12;
        }
        if (!in_envelope || !equalization_feasible(env.curves, spec.budget)) continue;
        validate_environment(env);
        return env;
    }
    throw std::runtime_error(
        "env_generate: could not produce a feasible environment (infeasible parameter ranges)");
}

namespace {

using nlohmann::json;

json curve_to_json(const MroiCurve& c) {
    json j;
    switch (c.kind) {
        case CurveKind::Polynomial:
            j["kind"] = "poly";
            j["coeffs"] = c.coeffs;
            break;
        case CurveKind::Exponential:
            j["kind"] = "exp";
            j["a"] = c.a;
            j["k"] = c.k;
            j["d"] = c.d;
            break;
        case CurveKind::Tabular: {
            j["kind"] = "table";
            json pts = json::array();
            for (const auto& [b, m] : c.points) pts.push_back(json::array({b, m}));
            j["points"] = std::move(pts);
            break;
        }
    }
    return j;
}

MroiCurve curve_from_json(const json& j, int index) {
    const auto fail = [index](const std::string& what) {
        throw std::invalid_argument("curve " + std::to_string(index) + " " + what);
    };
    if (!j.contains("kind") || !j["kind"].is_string()) fail("is missing the 'kind' field");
    const std::string kind = j["kind"].get<std::string>();
    try {
        if (kind == "poly") {
            if (!j.contains("coeffs") || !j["coeffs"].is_array()) fail("is missing 'coeffs'");
            return MroiCurve::polynomial(j["coeffs"].get<std::vector<double>>());
        }
        if (kind == "exp") {
            for (const char* field : {"a", "k", "d"})
                if (!j.contains(field)) fail(std::string("is missing '") + field + "'");
            return MroiCurve::exponential(j["a"].get<double>(), j["k"].get<double>(),
                                          j["d"].get<double>());
        }
        if (kind == "table") {
            if (!j.contains("points") || !j["points"].is_array()) fail("is missing 'points'");
            std::vector<std::pair<double, double>> pts;
            for (const auto& p : j["points"]) {
                if (!p.is_array() || p.size() != 2) fail("has a malformed [budget, mroi] pair");
                pts.emplace_back(p[0].get<double>(), p[1].get<double>());
            }
            return MroiCurve::tabular(std::move(pts));
        }
    } catch (const std::invalid_argument& e) {
        fail(std::string("is invalid: ") + e.what());
    }
    fail("has unknown kind '" + kind + "'");
    throw std::logic_error("unreachable");
}

}  // namespace

std::string env_to_text(const Environment& env) {
    json j;
    j["budget"] = env.budget;
    j["periods"] = env.periods();
    if (env.seed) j["seed"] = *env.seed;
    json curves = json::array();
    for (const auto& c : env.curves) curves.push_back(curve_to_json(c));
    j["curves"] = std::move(curves);
    return j.dump(2) + "\n";
}

Environment env_from_text(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(origin + ": parse error: " + e.what());
    }
    const auto need = [&](const char* field) {
        if (!j.contains(field))
            throw std::invalid_argument(origin + ": missing top-level field '" + field + "'");
    };
    need("budget");
    need("periods");
    need("curves");

    Environment env;
    env.budget = j["budget"].get<double>();
    const int periods = j["periods"].get<int>();
    if (j.contains("seed")) env.seed = j["seed"].get<std::uint64_t>();
    if (!j["curves"].is_array())
        throw std::invalid_argument(origin + ": 'curves' must be an array");
    int index = 0;
    for (const auto& cj : j["curves"]) env.curves.push_back(curve_from_json(cj, index++));
    if (env.periods() != periods)
        throw std::invalid_argument(origin + ": 'periods' (" + std::to_string(periods) +
                                    ") does not match the number of curves (" +
                                    std::to_string(env.periods()) + ")");
    validate_environment(env);
    return env;
}

Environment env_load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("env_load: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return env_from_text(buf.str(), path);
}

void env_save(const Environment& env, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("env_save: cannot open " + path + " for writing");
    out << env_to_text(env);
    if (!out) throw std::runtime_error("env_save: write failed for " + path);
}

}  // namespace budgetlab
