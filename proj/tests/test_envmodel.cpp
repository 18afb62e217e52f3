#include <cmath>
#include <filesystem>
#include <fstream>

#include "budgetlab/envmodel.hpp"
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

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("curve_eval: polynomial constant term at zero") {
    const auto c = MroiCurve::polynomial({2.0, -0.5});
    CHECK(curve_eval(c, 0.0, 6.0) == 2.0);
}

TEST_CASE("curve_eval: clamps the negative branch to zero") {
    const auto c = MroiCurve::polynomial({2.0, -0.5});
    CHECK(curve_eval(c, 5.0, 6.0) == 0.0);
    CHECK(c.raw(5.0) == doctest::Approx(-0.5));
}

TEST_CASE("curve_eval: exponential at zero") {
    const auto c = MroiCurve::exponential(1.0, 1.0, 0.5);
    CHECK(curve_eval(c, 0.0, 6.0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("curve_eval: domain outside [0, B] is an error") {
    const auto c = MroiCurve::polynomial({2.0, -0.5});
    CHECK_THROWS_AS(curve_eval(c, -0.1, 6.0), std::domain_error);
    CHECK_THROWS_AS(curve_eval(c, 6.1, 6.0), std::domain_error);
}

TEST_CASE("tabular curves interpolate and extend boundary values") {
    const auto c = MroiCurve::tabular({{0.0, 1.0}, {2.0, 0.5}, {4.0, 0.0}});
    CHECK(c.eval(1.0) == doctest::Approx(0.75));
    CHECK(c.eval(3.0) == doctest::Approx(0.25));
    CHECK(c.eval(5.0) == 0.0);  // extension past the last point
    const auto shifted = MroiCurve::tabular({{1.0, 0.8}, {2.0, 0.4}});
    CHECK(shifted.eval(0.0) == doctest::Approx(0.8));  // extension before the first point
}

TEST_CASE("tabular invariants: increasing budgets, decreasing mroi, zero stays zero") {
    CHECK_THROWS(MroiCurve::tabular({{0.0, 1.0}, {0.0, 0.5}}));
    CHECK_THROWS(MroiCurve::tabular({{0.0, 0.5}, {1.0, 0.8}}));
    CHECK_THROWS(MroiCurve::tabular({{0.0, 1.0}, {1.0, 0.0}, {2.0, 0.3}}));
    CHECK_NOTHROW(MroiCurve::tabular({{0.0, 1.0}, {1.0, 0.0}, {2.0, 0.0}}));
}

TEST_CASE("env_evaluate: direct evaluation") {
    const Environment env = two_linear_curves();
    const auto mroi = env_evaluate(env, std::vector<double>{2.0, 4.0});
    CHECK(mroi[0] == doctest::Approx(1.0));
    CHECK(mroi[1] == doctest::Approx(0.0));
}

TEST_CASE("env_evaluate: identical curves respond symmetrically") {
    Environment env;
    env.budget = 6.0;
    for (int t = 0; t < 3; ++t) env.curves.push_back(MroiCurve::polynomial({1.0, -1.0 / 6.0}));
    const auto mroi = env_evaluate(env, std::vector<double>{2.0, 2.0, 2.0});
    for (double m : mroi) CHECK(m == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("env_evaluate: zero allocation returns clamped intercepts") {
    const Environment env = two_linear_curves();
    const auto mroi = env_evaluate(env, std::vector<double>{0.0, 0.0});
    CHECK(mroi[0] == 2.0);
    CHECK(mroi[1] == 1.0);
}

TEST_CASE("env_evaluate: length mismatch is a shape error") {
    const Environment env = two_linear_curves();
    CHECK_THROWS_AS(env_evaluate(env, std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("env_generate: deterministic in the seed") {
    GenSpec spec;
    spec.periods = 6;
    spec.budget = 6.0;
    const Environment a = env_generate(7, spec);
    const Environment b = env_generate(7, spec);
    CHECK(env_to_text(a) == env_to_text(b));
    const Environment c = env_generate(8, spec);
    CHECK(env_to_text(a) != env_to_text(c));
}

TEST_CASE("env_generate: curves strictly decrease while positive on a dense grid") {
    GenSpec spec;
    spec.family = CurveFamily::Mixed;
    for (std::uint64_t seed : {1ull, 2ull, 3ull, 11ull}) {
        const Environment env = env_generate(seed, spec);
        CHECK_NOTHROW(validate_environment(env));
        for (const auto& curve : env.curves) {
            double prev = curve.eval(0.0);
            CHECK(prev >= 0.3);
            CHECK(prev <= 2.0 + 1e-12);
            for (int i = 1; i <= 1000; ++i) {
                const double b = env.budget * i / 1000.0;
                const double v = curve.eval(b);
                if (prev > 0.0 && v > 0.0) CHECK(v < prev);
                prev = v;
            }
        }
    }
}

TEST_CASE("clamp property holds everywhere") {
    const Environment env = env_generate(5, GenSpec{});
    for (const auto& curve : env.curves) {
        for (int i = 0; i <= 200; ++i) {
            const double b = env.budget * i / 200.0;
            const double v = curve_eval(curve, b, env.budget);
            CHECK(v >= 0.0);
            if (curve.raw(b) >= 0.0) CHECK(v == curve.raw(b));
        }
    }
}

TEST_CASE("env file round-trip preserves tabular samples exactly") {
    Environment env;
    env.budget = 6.0;
    env.curves.push_back(MroiCurve::tabular({{0.0, 1.5}, {2.0, 0.7}, {5.0, 0.0}}));
    env.curves.push_back(MroiCurve::tabular({{0.0, 0.9}, {3.0, 0.2}, {4.0, 0.0}}));
    const std::string path = temp_path("budgetlab_roundtrip_env.json");
    env_save(env, path);
    const Environment loaded = env_load(path);
    REQUIRE(loaded.periods() == 2);
    for (int t = 0; t < 2; ++t)
        for (const auto& [b, m] : env.curves[t].points)
            CHECK(loaded.curves[t].eval(b) == m);
    std::filesystem::remove(path);
}

TEST_CASE("env_load: generated environment round-trips") {
    GenSpec spec;
    spec.family = CurveFamily::Mixed;
    const Environment env = env_generate(42, spec);
    const std::string path = temp_path("budgetlab_gen_env.json");
    env_save(env, path);
    const Environment loaded = env_load(path);
    CHECK(env_to_text(loaded) == env_to_text(env));
    std::filesystem::remove(path);
}

TEST_CASE("env_load: non-monotone curve names the offender") {
    const std::string path = temp_path("budgetlab_bad_env.json");
    std::ofstream out(path);
    out << R"({"budget": 6, "periods": 6, "curves": [)";
    for (int t = 0; t < 6; ++t) {
        if (t) out << ",";
        if (t == 3)
            out << R"({"kind": "table", "points": [[0, 0.2], [1, 0.5], [2, 0.9]]})";
        else
            out << R"({"kind": "poly", "coeffs": [1.0, -0.5]})";
    }
    out << "]}";
    out.close();
    try {
        env_load(path);
        FAIL("expected a validation error");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("curve 3") != std::string::npos);
        CHECK(msg.find("not decreasing") != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("env_load: T=1 violates the period bound") {
    const std::string path = temp_path("budgetlab_t1_env.json");
    {
        std::ofstream out(path);
        out << R"({"budget": 6, "periods": 1, "curves": [{"kind": "poly", "coeffs": [1.0, -0.5]}]})";
    }
    CHECK_THROWS_AS(env_load(path), std::invalid_argument);
    std::filesystem::remove(path);
}

TEST_CASE("env_load: malformed file reports parse context") {
    const std::string path = temp_path("budgetlab_malformed_env.json");
    {
        std::ofstream out(path);
        out << "{\"budget\": 6, \"periods\":";
    }
    try {
        env_load(path);
        FAIL("expected a parse error");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find(path) != std::string::npos);
        CHECK(msg.find("parse error") != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("Allocation::validated enforces nonnegativity and the exact sum") {
    CHECK_NOTHROW(Allocation::validated({1.0, 2.0, 3.0}, 6.0));
    CHECK_THROWS(Allocation::validated({-0.1, 3.1, 3.0}, 6.0));
    CHECK_THROWS(Allocation::validated({1.0, 2.0, 3.1}, 6.0));
}

TEST_CASE("rng streams are deterministic and derivation is stable") {
    Rng a(123), b(123);
    for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
    Rng c = Rng(123).derive(1, 2);
    Rng d = Rng(123).derive(1, 2);
    CHECK(c.normal() == d.normal());
    Rng e = Rng(123).derive(1, 3);
    CHECK(Rng(123).derive(1, 2).bits() != e.bits());
}
