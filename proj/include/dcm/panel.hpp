#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dcm/config.hpp"

namespace dcm {

/// Dense customer x period x variable cube. Static covariates and the policy
/// indicator are stored at every period and are time-invariant by
/// construction.
class PanelTensor {
public:
    PanelTensor() = default;
    PanelTensor(std::vector<Variable> variables, int n_periods, std::vector<std::string> customer_ids);

    std::size_t n_customers() const noexcept { return customer_ids_.size(); }
    int n_periods() const noexcept { return n_periods_; }
    std::size_t n_variables() const noexcept { return variables_.size(); }
    const std::vector<Variable>& variables() const noexcept { return variables_; }
    const std::vector<std::string>& customer_ids() const noexcept { return customer_ids_; }

    double value(std::size_t customer, int period, int variable) const noexcept {
        return values_[offset(customer, period, variable)];
    }
    void set_value(std::size_t customer, int period, int variable, double v) noexcept {
        values_[offset(customer, period, variable)] = v;
    }
    /// Writes a static (covariate or policy) value at every period.
    void set_static(std::size_t customer, int variable, double v) noexcept;
    double static_value(std::size_t customer, int variable) const noexcept { return value(customer, 0, variable); }

    /// All values of one customer laid out as [period][variable].
    std::span<const double> customer_block(std::size_t customer) const noexcept {
        return {values_.data() + offset(customer, 0, 0), static_cast<std::size_t>(n_periods_) * variables_.size()};
    }

    /// New panel made of the given customers (repeats allowed), in order.
    PanelTensor select_customers(std::span<const std::size_t> rows) const;

    bool operator==(const PanelTensor&) const = default;

private:
    std::size_t offset(std::size_t customer, int period, int variable) const noexcept {
        return (customer * static_cast<std::size_t>(n_periods_) + static_cast<std::size_t>(period)) *
                   variables_.size() +
               static_cast<std::size_t>(variable);
    }

    std::vector<Variable> variables_;
    int n_periods_ = 0;
    std::vector<std::string> customer_ids_;
    std::vector<double> values_;
};

/// Throws ConfigMismatch unless the panel carries exactly the config's
/// variables (names, roles, order) and period count.
void check_panel_matches(const PanelTensor& panel, const ModelConfig& config);

PanelTensor ingest_panel(const std::filesystem::path& path, const ModelConfig& config);
PanelTensor read_panel(std::istream& in, const ModelConfig& config);
/// Writes every customer x period row, so read(write(p)) == p exactly.
void write_panel(std::ostream& out, const PanelTensor& panel);
void write_panel(const std::filesystem::path& path, const PanelTensor& panel);

enum class ColumnKind { Lag, Covariate, Policy, SamePeriod, Intercept };

std::string_view to_string(ColumnKind kind) noexcept;
ColumnKind parse_column_kind(std::string_view text);

/// One regressor. `variable` indexes ModelConfig::variables; `period` is the
/// absolute source period for Lag / SamePeriod columns.
struct Column {
    ColumnKind kind = ColumnKind::Intercept;
    int variable = -1;
    int period = -1;

    bool operator==(const Column&) const = default;
};

std::string column_name(const Column& column, const ModelConfig& config);

/// Regressors of (target, t) in canonical order: lags (variable-major, then
/// period), covariates, policy, same-period sources, intercept.
std::vector<Column> design_columns(const ModelConfig& config, int target, int period);

struct DesignMatrix {
    int target = -1;
    int period = -1;
    std::vector<Column> columns;
    std::vector<std::string> names;
    Eigen::MatrixXd x;  // customers x columns

    Eigen::Index intercept_column() const;
};

DesignMatrix build_design(const PanelTensor& panel, int target, int period, const ModelConfig& config);
Eigen::VectorXd target_values(const PanelTensor& panel, int target, int period);

struct ConstantColumn {
    int variable;
    int period;  // -1 for time-invariant variables

    bool operator==(const ConstantColumn&) const = default;
};

struct VariableSummary {
    std::string name;
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    double zero_fraction = 0.0;
    bool constant = false;  // zero variance in every period
};

struct ValidationReport {
    std::vector<ConstantColumn> constant_columns;
    std::vector<VariableSummary> variables;
    double zero_fraction = 0.0;
};

ValidationReport validate_panel(const PanelTensor& panel);

}  // namespace dcm
