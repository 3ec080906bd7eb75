#include <doctest.h>

#include <sstream>

#include "dcm/bootstrap.hpp"
#include "dcm/synth.hpp"
#include "support/fixtures.hpp"

using namespace dcm;

TEST_CASE("type-7 quantiles") {
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    CHECK(quantile_sorted(v, 0.0) == 1.0);
    CHECK(quantile_sorted(v, 1.0) == 4.0);
    CHECK(quantile_sorted(v, 0.5) == 2.5);
    CHECK(quantile_sorted(v, 0.25) == doctest::Approx(1.75));
    const auto [lo, hi] = percentile_interval({4.0, 1.0, 3.0, 2.0}, 0.5);
    CHECK(lo == doctest::Approx(1.75));
    CHECK(hi == doctest::Approx(3.25));
}

TEST_CASE("resampled rows are seeded and in range") {
    const auto a = resample_rows(50, 7, 3);
    CHECK(a == resample_rows(50, 7, 3));
    CHECK(a != resample_rows(50, 7, 4));
    for (auto i : a) CHECK(i < 50);
}

TEST_CASE("zero shock gives a (0, 0) interval") {
    const auto data = generate_panel(testing::small_spec(51));
    ShockSpec unit{"unit", {{"es_all", 0, data.config.n_periods - 1, ShockMode::Scale, 1.0}}};
    const auto r = bootstrap_value(data.panel, data.config, unit, 10, 0.95, 1);
    CHECK(r.point_estimate == 0.0);
    for (double v : r.replicates) CHECK(v == 0.0);
    CHECK(r.lower == 0.0);
    CHECK(r.upper == 0.0);
}

TEST_CASE("homogeneous customers give a degenerate interval") {
    auto data = generate_panel(testing::small_spec(52));
    const std::vector<std::size_t> rows(40, 0);
    const auto panel = data.panel.select_customers(rows);
    auto config = data.config;
    config.ridge_lambda = 1e-3;  // identical rows need the penalty
    const auto shock = testing::remove_group("es_all", config.n_periods);
    const auto r = bootstrap_value(panel, config, shock, 8, 0.9, 3);
    for (double v : r.replicates) CHECK(v == r.point_estimate);
    CHECK(r.lower == r.point_estimate);
    CHECK(r.upper == r.point_estimate);
}

TEST_CASE("seeded replicates and nested levels") {
    const auto data = generate_panel(testing::small_spec(53));
    const auto shock = testing::remove_group("es_all", data.config.n_periods);
    const auto a = bootstrap_value(data.panel, data.config, shock, 30, 0.9, 11);
    const auto b = bootstrap_value(data.panel, data.config, shock, 30, 0.9, 11);
    CHECK(a.replicates == b.replicates);
    const auto [lo99, hi99] = percentile_interval(a.replicates, 0.99);
    CHECK(lo99 <= a.lower);
    CHECK(hi99 >= a.upper);
    CHECK(a.lower <= a.upper);

    std::ostringstream out, reps;
    write_bootstrap_csv(out, {a});
    write_replicates_csv(reps, {a});
    CHECK(out.str().rfind("scenario,point,lower,upper,level,replicates,seed\n", 0) == 0);
    CHECK(reps.str().rfind("scenario,replicate,value\n", 0) == 0);
}
