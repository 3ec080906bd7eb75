#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "dcm/error.hpp"
#include "dcm/report.hpp"
#include "dcm/synth.hpp"
#include "support/fixtures.hpp"

using namespace dcm;

namespace {

struct Scored {
    SynthData data;
    std::vector<CounterfactualResult> results;
};

Scored scored(std::vector<ShockSpec> shocks) {
    Scored s{generate_panel(testing::small_spec(61)), {}};
    for (const auto& sh : shocks) s.results.push_back(score_counterfactual(s.data.truth, s.data.panel, sh));
    return s;
}

}  // namespace

TEST_CASE("total row and partition rows") {
    const int n = 5;
    auto s = scored({testing::remove_group("channel0", n)});
    const double total = s.results[0].total_delta();
    const auto t = aggregate_by_group(s.results, s.data.config, {"total"});
    CHECK(t.raw_at(0, 0) == doctest::Approx(total).epsilon(1e-12));

    const auto parts = aggregate_by_group(s.results, s.data.config, {"product0", "product1"});
    CHECK(parts.rows_partition);
    CHECK(parts.raw_at(0, 0) + parts.raw_at(1, 0) == doctest::Approx(total).epsilon(1e-12));
    CHECK(parts.additive());

    const auto norm = normalize_table(parts, grand_total(s.results));
    CHECK(norm.normalized_at(0, 0) + norm.normalized_at(1, 0) == doctest::Approx(100.0));
    const auto half = normalize_table(parts, 2.0 * grand_total(s.results));
    CHECK(half.normalized_at(0, 0) + half.normalized_at(1, 0) == doctest::Approx(50.0));
}

TEST_CASE("overlapping scenarios are flagged non-additive") {
    const int n = 5;
    auto s = scored({testing::remove_group("es_all", n), testing::remove_group("channel0", n)});
    const auto t = aggregate_by_group(s.results, s.data.config, {"product0", "product1"});
    CHECK(t.rows_partition);
    CHECK_FALSE(t.scenarios_disjoint);
    CHECK_FALSE(t.additive());

    auto d = scored({testing::remove_group("channel0", n), testing::remove_group("channel1", n)});
    CHECK(aggregate_by_group(d.results, d.data.config, {"product0", "product1"}).additive());
    CHECK_FALSE(aggregate_by_group(d.results, d.data.config, {"product0"}).rows_partition);
}

TEST_CASE("report errors") {
    auto s = scored({testing::remove_group("channel0", 5)});
    const auto t = aggregate_by_group(s.results, s.data.config, {"total"});
    try {
        normalize_table(t, 0.0);
        FAIL("expected ZeroDenominator");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ZeroDenominator);
    }
    try {
        aggregate_by_group(s.results, s.data.config, {"nope"});
        FAIL("expected UnknownGroup");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UnknownGroup);
    }
    // a group without outcomes cannot be a report row
    CHECK_THROWS_AS(aggregate_by_group(s.results, s.data.config, {"es_all"}), Error);
}

TEST_CASE("valuation CSV") {
    auto s = scored({testing::remove_group("channel0", 5)});
    const auto t = normalize_table(aggregate_by_group(s.results, s.data.config, {"product0", "product1"}), 10.0);
    std::ostringstream out;
    write_valuation_csv(out, t);
    const std::string text = out.str();
    CHECK(text.rfind("group,scenario,raw,normalized,additive\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
}
