#include "equichern/harness.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <sstream>

using namespace equichern;

TEST_CASE("tolerance schedule grows only below the reference resolution")
{
    CHECK(scaled_tolerance(1e-3, 2, 256, 1.0) == doctest::Approx(1e-3));
    CHECK(scaled_tolerance(1e-3, 2, 512, 1.0) == doctest::Approx(1e-3));
    CHECK(scaled_tolerance(1e-3, 2, 64, 1.0) == doctest::Approx(1.6e-2));
    CHECK(scaled_tolerance(1e-3, 0, 32, 2.0) == doctest::Approx(2e-3));
}

TEST_CASE("suites are closed and sorted")
{
    const auto all = suite_checks("all");
    CHECK(std::is_sorted(all.begin(), all.end()));
    std::size_t total = 0;
    for (const auto& s : suite_names())
        if (s != "all") total += suite_checks(s).size();
    CHECK(total == all.size());
    CHECK_THROWS_AS(suite_checks("nope"), UsageError);
}

TEST_CASE("invalid configurations are usage errors")
{
    SuiteConfig c;
    c.suite = "winding";
    CHECK_NOTHROW(c.validate());
    c.n = 100;
    CHECK_THROWS_AS(c.validate(), UsageError);
    c.n = 64;
    c.tol_scale = 0.0;
    CHECK_THROWS_AS(c.validate(), UsageError);
    c.tol_scale = 1.0;
    c.suite = "unknown";
    CHECK_THROWS_AS(run_suite(c), UsageError);
    CHECK_THROWS_AS(run_check("no.such.check", SuiteConfig{}), UsageError);
}

TEST_CASE("the winding suite passes and is deterministic apart from timing")
{
    SuiteConfig c;
    c.suite = "winding";
    c.n = 64;
    auto a = run_suite(c), b = run_suite(c);
    REQUIRE(a.size() == b.size());
    CHECK(all_passed(a));
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].id == b[i].id);
        CHECK(a[i].defect == b[i].defect);
        CHECK(a[i].message == b[i].message);
    }
    c.seed = 7;
    CHECK(all_passed(run_suite(c)));
}

TEST_CASE("per-check random streams depend on both seed and id")
{
    auto a = check_rng(1, "x"), b = check_rng(1, "x"), c = check_rng(1, "y"), d = check_rng(2, "x");
    const auto va = a();
    CHECK(va == b());
    CHECK(va != c());
    CHECK(va != d());
}

TEST_CASE("json-lines report has one object per check")
{
    std::vector<CheckResult> r{{"a.one", "anchor", 1e-12, 1e-9, true, 0.1, ""},
                               {"b.two", "other", std::numeric_limits<double>::infinity(), 1e-9, false, 0.0, "rejected"}};
    std::ostringstream out;
    write_report(out, r, ReportFormat::json_lines);
    std::istringstream in(out.str());
    std::string line;
    std::vector<nlohmann::json> rows;
    while (std::getline(in, line)) rows.push_back(nlohmann::json::parse(line));
    REQUIRE(rows.size() == 2);
    CHECK(rows[0]["id"] == "a.one");
    CHECK(rows[0]["pass"] == true);
    CHECK(rows[1]["defect"].is_null());
    CHECK(rows[1]["message"] == "rejected");

    std::ostringstream text;
    write_report(text, r, ReportFormat::text);
    CHECK(text.str().find("FAIL b.two") != std::string::npos);
    CHECK(text.str().find("1 passed, 1 failed") != std::string::npos);
}

TEST_CASE("the output directory variable only redirects relative paths")
{
    ::setenv("EQUICHERN_OUT_DIR", "/tmp/equichern-out", 1);
    CHECK(resolve_output_path("r.txt") == "/tmp/equichern-out/r.txt");
    CHECK(resolve_output_path("/abs/r.txt") == "/abs/r.txt");
    ::unsetenv("EQUICHERN_OUT_DIR");
    CHECK(resolve_output_path("r.txt") == "r.txt");
}

TEST_CASE("the RK4 study reports fourth order")
{
    const auto s = convergence_study("bismut.solver-error", {32, 64, 128});
    CHECK(s.rows.size() == 3);
    CHECK(s.observed_order == doctest::Approx(4.0).epsilon(0.02));
    CHECK_THROWS_AS(convergence_study("cartan.basic", {32, 64}), UsageError);
    CHECK_THROWS_AS(convergence_study("bismut.solver-error", {32}), UsageError);
}

TEST_CASE("random gauges carry their planted winding")
{
    std::mt19937_64 rng(3);
    for (int w = -2; w <= 2; ++w) {
        CHECK(winding_number(random_phase_gauge(rng, 64, w)).winding == w);
        CHECK(winding_number(random_rank2_gauge(rng, 64, w)).winding == w);
    }
    const Mat u = random_unitary(rng, 3);
    CHECK((u.adjoint() * u - Mat::Identity(3, 3)).norm() < 1e-12);
}
