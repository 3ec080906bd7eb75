#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "dcm/error.hpp"
#include "dcm/estimator.hpp"
#include "dcm/synth.hpp"
#include "support/fixtures.hpp"

using namespace dcm;

namespace {

DesignMatrix make_design(const Eigen::MatrixXd& regressors) {
    DesignMatrix d;
    d.x.resize(regressors.rows(), regressors.cols() + 1);
    d.x.leftCols(regressors.cols()) = regressors;
    d.x.col(regressors.cols()).setOnes();
    for (Eigen::Index j = 0; j < regressors.cols(); ++j) {
        d.columns.push_back({ColumnKind::Covariate, static_cast<int>(j), -1});
        d.names.push_back("x" + std::to_string(j + 1));
    }
    d.columns.push_back({ColumnKind::Intercept, -1, -1});
    d.names.push_back("intercept");
    return d;
}

}  // namespace

TEST_CASE("exact linear system") {
    Eigen::MatrixXd x(5, 1);
    x << 1, 2, 3, 4, 5;
    const Eigen::VectorXd y = 2.0 * x.col(0);
    const auto fit = fit_target(make_design(x), y, 0.0);
    CHECK(fit.coefficients[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(std::abs(fit.coefficients[1]) < 1e-12);
    CHECK(fit.diagnostics.residual_variance < 1e-20);
    CHECK(fit.diagnostics.r_squared == doctest::Approx(1.0));
}

TEST_CASE("constant regressor is singular and named") {
    Eigen::MatrixXd x(4, 2);
    x << 1, 7, 2, 7, 3, 7, 4, 7;
    const Eigen::VectorXd y = x.col(0);
    try {
        fit_target(make_design(x), y, 0.0);
        FAIL("expected SingularSystem");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::SingularSystem);
        CHECK(std::string(e.what()).find("x2") != std::string::npos);
    }
    CHECK_NOTHROW(fit_target(make_design(x), y, 1e-3));  // ridge fixes it
}

TEST_CASE("noisy regression matches the normal equations") {
    std::mt19937_64 eng(3);
    std::normal_distribution<double> z(0.0, 1.0);
    const int n = 10000;
    Eigen::MatrixXd x(n, 2);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = z(eng);
        x(i, 1) = z(eng);
        y[i] = 3.0 * x(i, 0) - x(i, 1) + 0.1 * z(eng);
    }
    const auto design = make_design(x);
    const auto fit = fit_target(design, y, 0.0);
    const Eigen::MatrixXd xtx = design.x.transpose() * design.x;
    const Eigen::VectorXd direct = xtx.ldlt().solve(design.x.transpose() * y);
    for (int j = 0; j < 3; ++j) CHECK(std::abs(fit.coefficients[j] - direct[j]) < 1e-10);
    REQUIRE(fit.diagnostics.std_errors.size() == 3);
    CHECK(std::abs(fit.coefficients[0] - 3.0) < 3 * fit.diagnostics.std_errors[0]);
    CHECK(std::abs(fit.coefficients[1] + 1.0) < 3 * fit.diagnostics.std_errors[1]);
}

TEST_CASE("ridge leaves the intercept unpenalized") {
    Eigen::MatrixXd x(4, 1);
    x << 0, 0, 0, 0;
    Eigen::VectorXd y(4);
    y << 5, 5, 5, 5;
    const auto fit = fit_target(make_design(x), y, 10.0);
    CHECK(fit.coefficients[1] == doctest::Approx(5.0));
    CHECK_THROWS_AS(fit_target(make_design(x), y, -1.0), Error);
}

TEST_CASE("scale equivariance") {
    std::mt19937_64 eng(5);
    std::normal_distribution<double> z(0.0, 1.0);
    Eigen::MatrixXd x(200, 2);
    Eigen::VectorXd y(200);
    for (int i = 0; i < 200; ++i) {
        x(i, 0) = z(eng);
        x(i, 1) = z(eng);
        y[i] = x(i, 0) + 2 * x(i, 1) + z(eng);
    }
    const auto a = fit_target(make_design(x), y, 0.0);
    Eigen::MatrixXd x2 = x;
    x2.col(1) *= 4.0;
    const auto b = fit_target(make_design(x2), y, 0.0);
    CHECK(b.coefficients[1] == doctest::Approx(a.coefficients[1] / 4.0).epsilon(1e-10));
    CHECK(b.coefficients[0] == doctest::Approx(a.coefficients[0]).epsilon(1e-10));
}

TEST_CASE("noiseless recovery of a synthetic truth") {
    auto s = testing::small_spec(21);
    s.n_customers = 400;
    s.lag_window = 1;
    s.same_period = false;
    s.fit_period_zero = false;
    s.outcome_sd = s.non_es_sd = s.es_sd = 0.0;
    s.initial_sd = 1.0;
    s.persistence = 0.9;
    s.cross_sd = 0.05;
    const auto data = generate_panel(s);
    const auto fitted = fit_dcm(data.panel, data.config);
    CHECK(max_abs_difference(fitted, data.truth) < 1e-8);
}

TEST_CASE("zero same-period truth estimates near zero") {
    auto s = testing::small_spec(8);
    s.n_customers = 3000;
    s.delta_mean = 0.0;
    s.gamma_mean = 0.0;
    const auto data = generate_panel(s);
    const auto fitted = fit_dcm(data.panel, data.config);
    int checked = 0;
    for (const auto& eq : fitted.equations()) {
        for (std::size_t j = 0; j < eq.columns.size(); ++j) {
            if (eq.columns[j].kind != ColumnKind::SamePeriod) continue;
            CHECK(std::abs(eq.coefficients[j]) < 3.0 * eq.diagnostics.std_errors[j]);
            ++checked;
        }
    }
    CHECK(checked > 0);
}

TEST_CASE("ES equations have no same-period columns") {
    const auto data = generate_panel(testing::small_spec());
    const auto fitted = fit_dcm(data.panel, data.config);
    for (int e : data.config.indices_with_role(Role::EsInteraction)) {
        for (int t = 0; t < data.config.n_periods; ++t) {
            const Equation* eq = fitted.find(e, t);
            REQUIRE(eq);
            for (const auto& c : eq->columns) CHECK(c.kind != ColumnKind::SamePeriod);
        }
    }
}

TEST_CASE("insufficient rows") {
    auto s = testing::small_spec();
    s.n_customers = 4;
    const auto data = generate_panel(s);
    try {
        fit_dcm(data.panel, data.config);
        FAIL("expected InsufficientRows");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InsufficientRows);
    }
}

TEST_CASE("artifact round trip and config mismatch") {
    const auto data = generate_panel(testing::small_spec());
    const auto fitted = fit_dcm(data.panel, data.config);
    CHECK(artifact_from_json(artifact_to_json(fitted)) == fitted);

    const auto path = std::filesystem::temp_directory_path() / "dcm_unit_artifact.json";
    save_artifact(fitted, path);
    const auto loaded = load_artifact(path);
    std::filesystem::remove(path);
    CHECK(loaded == fitted);
    CHECK(loaded.config_hash() == config_hash(data.config));
    CHECK_NOTHROW(loaded.check_config(data.config));

    auto edited = data.config;
    edited.ridge_lambda = 0.25;
    try {
        loaded.check_config(edited);
        FAIL("expected ConfigMismatch");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ConfigMismatch);
    }
}

TEST_CASE("fitting is order independent") {
    const auto data = generate_panel(testing::small_spec(4));
    const auto a = fit_dcm(data.panel, data.config);
    const auto b = fit_dcm(data.panel, data.config);
    CHECK(a == b);
}
