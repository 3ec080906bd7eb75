#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dcm/config.hpp"
#include "dcm/panel.hpp"

namespace dcm {

struct FitDiagnostics {
    double residual_variance = 0.0;
    double r_squared = 0.0;
    double condition = 1.0;  // estimated condition number of the design
    std::size_t n_rows = 0;
    std::string solver;      // "cholesky", "qr", "qr-fallback", "truth"
    std::vector<double> std_errors;

    bool operator==(const FitDiagnostics&) const = default;
};

struct FitResult {
    Eigen::VectorXd coefficients;
    FitDiagnostics diagnostics;
};

/// Ridge least squares, argmin ||y - Xw||^2 + lambda ||w without intercept||^2.
/// With lambda == 0 a rank-deficient design raises SingularSystem naming the
/// dependent columns.
FitResult fit_target(const DesignMatrix& design, const Eigen::VectorXd& targets, double lambda);

/// One fitted structural equation: the target at `period` regressed on
/// `columns` (see design_columns).
struct Equation {
    int target = -1;
    int period = -1;
    std::vector<Column> columns;
    std::vector<double> coefficients;
    FitDiagnostics diagnostics;

    bool operator==(const Equation&) const = default;

    /// Coefficient of `column`, or 0 when the column is not in the equation.
    double coefficient(const Column& column) const noexcept;
    double* find(const Column& column) noexcept;
};

/// The trained system. Equations are keyed by (target variable, period);
/// period-0 equations exist only when the config fits them.
class CoefficientSet {
public:
    CoefficientSet() = default;
    explicit CoefficientSet(ModelConfig config);

    const ModelConfig& config() const noexcept { return config_; }
    const std::string& config_hash() const noexcept { return config_hash_; }
    bool pooled() const noexcept { return pooled_; }
    void set_pooled(bool pooled) noexcept { pooled_ = pooled; }

    void add(Equation equation);
    const Equation* find(int target, int period) const noexcept;
    Equation* find(int target, int period) noexcept;
    const std::vector<Equation>& equations() const noexcept { return equations_; }

    double lag_coeff(int target, int period, int source, int source_period) const noexcept;
    double same_period_coeff(int target, int period, int source) const noexcept;
    double covariate_coeff(int target, int period, int covariate) const noexcept;
    double policy_coeff(int target, int period) const noexcept;
    double intercept(int target, int period) const noexcept;

    /// Throws ConfigMismatch when `config` hashes differently.
    void check_config(const ModelConfig& config) const;

    bool operator==(const CoefficientSet& other) const;

private:
    ModelConfig config_;
    std::string config_hash_;
    bool pooled_ = false;
    std::vector<Equation> equations_;
    std::vector<int> slot_;  // [variable * n_periods + period] -> index or -1
};

/// Largest |a - b| over coefficients of equations present in both sets.
/// Throws InvalidArgument if the equation structures differ.
double max_abs_difference(const CoefficientSet& a, const CoefficientSet& b);

/// Fits every (dynamic variable, period) regression. Regressions run
/// concurrently; results do not depend on scheduling.
CoefficientSet fit_dcm(const PanelTensor& panel, const ModelConfig& config);

nlohmann::json artifact_to_json(const CoefficientSet& coeffs);
CoefficientSet artifact_from_json(const nlohmann::json& doc);
void save_artifact(const CoefficientSet& coeffs, const std::filesystem::path& path);
CoefficientSet load_artifact(const std::filesystem::path& path);

}  // namespace dcm
