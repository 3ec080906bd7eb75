#include <doctest.h>

#include <sstream>

#include "dcm/config.hpp"
#include "dcm/error.hpp"
#include "dcm/panel.hpp"
#include "support/fixtures.hpp"

using namespace dcm;

namespace {

ModelConfig two_var_config() {
    return parse_config(R"({"variables":[{"name":"y","role":"outcome"},{"name":"s","role":"surrogate_non_es"}],
                            "n_periods":3})");
}

PanelTensor load(const std::string& text, const ModelConfig& c) {
    std::istringstream in(text);
    return read_panel(in, c);
}

ErrorKind load_error(const std::string& text, const ModelConfig& c) {
    try {
        load(text, c);
    } catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::IoError;
}

}  // namespace

TEST_CASE("fully specified panel loads as given") {
    const auto c = two_var_config();
    const auto p = load("customer_id,period,y,s\n"
                        "c0,0,1,2\nc0,1,3,4\nc0,2,5,6\n"
                        "c1,0,7,8\nc1,1,9,10\nc1,2,11,12\n",
                        c);
    CHECK(p.n_customers() == 2);
    CHECK(p.n_periods() == 3);
    double expect = 1.0;
    for (std::size_t i = 0; i < 2; ++i)
        for (int t = 0; t < 3; ++t)
            for (int v = 0; v < 2; ++v) CHECK(p.value(i, t, v) == expect++);

    std::ostringstream out;
    write_panel(out, p);
    CHECK(load(out.str(), c) == p);
}

TEST_CASE("missing rows are zero") {
    const auto c = two_var_config();
    const auto p = load("customer_id,period,s,y\nc0,0,1,2\nc0,1,3,4\nc1,0,5,6\nc1,1,7,8\nc1,2,9,10\n", c);
    CHECK(p.value(0, 2, 0) == 0.0);
    CHECK(p.value(0, 2, 1) == 0.0);
    CHECK(p.value(0, 1, 0) == 4.0);  // columns follow the config, not the header
}

TEST_CASE("panel input errors") {
    const auto c = two_var_config();
    CHECK(load_error("customer_id,period,y,s\nc0,0,inf,1\n", c) == ErrorKind::NonFiniteValue);
    CHECK(load_error("customer_id,period,y,s\nc0,0,1,1\nc0,0,1,1\n", c) == ErrorKind::DuplicateCell);
    CHECK(load_error("customer_id,period,y,s\nc0,3,1,1\n", c) == ErrorKind::PeriodOutOfRange);
    CHECK(load_error("customer_id,period,y\nc0,0,1\n", c) == ErrorKind::MissingVariable);
    CHECK(load_error("customer_id,period,y,s,q\nc0,0,1,1,1\n", c) == ErrorKind::UnknownVariable);
    CHECK(load_error("customer_id,period,y,s\nc0,0,1\n", c) == ErrorKind::ParseError);
    try {
        load("customer_id,period,y,s\nc0,0,1,1\nc0,1,nan,1\n", c);
        FAIL("expected NonFiniteValue");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("3") != std::string::npos);
    }

    const auto with_cov = parse_config(R"({"variables":[{"name":"y","role":"outcome"},{"name":"s","role":"surrogate_non_es"},
                                           {"name":"x","role":"static_covariate"}],"n_periods":2})");
    CHECK(load_error("customer_id,period,y,s,x\nc0,0,1,1,1\nc0,1,1,1,2\n", with_cov) == ErrorKind::StaticNotInvariant);
}

TEST_CASE("design columns follow the block layout") {
    auto c = parse_config(R"({"variables":[{"name":"y","role":"outcome"},{"name":"s1","role":"surrogate_non_es"},
                              {"name":"s2","role":"surrogate_non_es"},{"name":"x","role":"static_covariate"}],
                              "n_periods":3})");
    const int y = c.variable_index("y");
    auto cols = design_columns(c, y, 2);
    REQUIRE(cols.size() == 6);
    CHECK(cols[0] == Column{ColumnKind::Lag, c.variable_index("s1"), 0});
    CHECK(cols[1] == Column{ColumnKind::Lag, c.variable_index("s1"), 1});
    CHECK(cols[3] == Column{ColumnKind::Lag, c.variable_index("s2"), 1});
    CHECK(cols[4].kind == ColumnKind::Covariate);
    CHECK(cols[5].kind == ColumnKind::Intercept);

    c.lag_window = 1;
    CHECK(design_columns(c, y, 2).size() == 4);

    const auto sp = parse_config(R"({"variables":[{"name":"y","role":"outcome"},{"name":"s","role":"surrogate_non_es"},
                                     {"name":"e","role":"es_interaction"},{"name":"x","role":"static_covariate"}],
                                     "n_periods":3,"same_period_enabled":true})");
    const auto ycols = design_columns(sp, sp.variable_index("y"), 2);
    CHECK(ycols[ycols.size() - 2] == Column{ColumnKind::SamePeriod, sp.variable_index("e"), 2});
    for (const auto& col : design_columns(sp, sp.variable_index("e"), 2)) CHECK(col.kind != ColumnKind::SamePeriod);
}

TEST_CASE("period-0 design without regressors is empty") {
    const auto c = two_var_config();
    CHECK_THROWS_AS(design_columns(c, 0, 0), Error);
    try {
        design_columns(c, 0, 0);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyDesign);
    }
}

TEST_CASE("validate_panel flags constant columns") {
    const auto c = two_var_config();
    const auto p = load("customer_id,period,y,s\nc0,0,1,0\nc0,1,2,0\nc1,0,3,0\nc1,1,5,0\n", c);
    const auto r = validate_panel(p);
    CHECK(r.variables[1].constant);
    CHECK_FALSE(r.variables[0].constant);

    const auto one = load("customer_id,period,y,s\nc0,0,1,2\nc0,1,2,3\nc0,2,4,5\n", c);
    for (const auto& v : validate_panel(one).variables) CHECK(v.constant);

    const auto synth = generate_panel(testing::small_spec());
    CHECK(validate_panel(synth.panel).constant_columns.empty());
}

TEST_CASE("select_customers repeats rows") {
    const auto c = two_var_config();
    const auto p = load("customer_id,period,y,s\nc0,0,1,2\nc1,0,3,4\n", c);
    const std::vector<std::size_t> rows{1, 1, 0};
    const auto q = p.select_customers(rows);
    CHECK(q.n_customers() == 3);
    CHECK(q.value(0, 0, 0) == 3.0);
    CHECK(q.value(1, 0, 0) == 3.0);
    CHECK(q.value(2, 0, 1) == 2.0);
}
