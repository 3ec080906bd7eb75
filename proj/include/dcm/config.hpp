#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace dcm {

enum class Role {
    Outcome,
    SurrogateNonEs,
    EsInteraction,
    StaticCovariate,
    Policy,
};

std::string_view to_string(Role role) noexcept;
Role parse_role(std::string_view text);

/// Outcomes and both surrogate families are simulated per period; covariates
/// and the policy indicator are fixed per customer.
inline bool is_dynamic(Role role) noexcept {
    return role == Role::Outcome || role == Role::SurrogateNonEs || role == Role::EsInteraction;
}

struct Variable {
    std::string name;
    Role role;

    bool operator==(const Variable&) const = default;
};

struct Group {
    std::string name;
    std::string kind;  // free-form tag: "channel", "product", "feature", ...
    std::vector<std::string> members;

    bool operator==(const Group&) const = default;
};

/// Regressor specification shared by every target whose role is listed in
/// `targets`.
struct RegressionBlock {
    std::vector<Role> targets;
    std::vector<Role> lagged;
    std::vector<Role> same_period;
    bool covariates = true;
    bool policy = false;

    bool operator==(const RegressionBlock&) const = default;
};

struct SamePeriodEdge {
    std::string from;
    std::string to;

    bool operator==(const SamePeriodEdge&) const = default;
};

struct ModelConfig {
    std::vector<Variable> variables;
    std::vector<Group> groups;
    int n_periods = 0;
    std::optional<int> lag_window;  // nullopt: full history
    bool same_period_enabled = false;
    std::vector<RegressionBlock> regression_blocks;
    std::optional<std::vector<SamePeriodEdge>> same_period_edges;
    std::vector<std::string> same_period_order;  // non-empty: generalized edges
    double ridge_lambda = 1e-6;
    bool fit_period_zero = true;
    bool pooled = false;
    bool allow_outcome_shocks = true;

    bool operator==(const ModelConfig&) const = default;

    std::size_t n_variables() const noexcept { return variables.size(); }
    std::optional<int> find_variable(std::string_view name) const;
    int variable_index(std::string_view name) const;  // throws UnknownVariable
    std::vector<int> indices_with_role(Role role) const;
    std::vector<int> dynamic_indices() const;
    std::optional<int> policy_index() const;

    const Group* find_group(std::string_view name) const;
    /// Resolves a variable name or a group name to variable indices.
    std::vector<int> resolve_target(std::string_view name) const;

    const RegressionBlock& block_for(Role role) const;

    /// Effective within-period edges as (source, sink) variable indices.
    std::vector<std::pair<int, int>> within_period_edges() const;
    /// Same-period sources of `target`, in declaration order.
    std::vector<int> same_period_sources(int target) const;
    /// Dynamic variables in the order they are evaluated inside one period.
    std::vector<int> evaluation_order() const;

    int first_lag_period(int t) const noexcept {
        return lag_window ? std::max(0, t - *lag_window) : 0;
    }
};

ModelConfig parse_config(std::string_view text);
ModelConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ModelConfig& config);
std::string serialize_config(const ModelConfig& config);
/// Hex SHA-256 of the canonical serialization.
std::string config_hash(const ModelConfig& config);

/// Throws ConstraintViolation naming the first offending within-period edge.
void validate_within_period_dag(const ModelConfig& config);

enum class ShockMode { Scale, Set, Add };

std::string_view to_string(ShockMode mode) noexcept;

struct ShockEntry {
    std::string target;  // variable or group name
    int first_period = 0;
    int last_period = 0;  // inclusive
    ShockMode mode = ShockMode::Set;
    double value = 0.0;

    bool operator==(const ShockEntry&) const = default;
};

struct ShockSpec {
    std::string label;
    std::vector<ShockEntry> entries;

    bool operator==(const ShockSpec&) const = default;
};

double apply_shock(ShockMode mode, double value, double current) noexcept;

/// Throws InvalidShock / ShockOnOutcome / UnknownVariable.
void validate_shock(const ShockSpec& shock, const ModelConfig& config);
/// Variables touched by any entry, sorted and unique.
std::vector<int> shocked_variables(const ShockSpec& shock, const ModelConfig& config);

/// Accepts `{"label":..., "entries":[...]}`; missing periods mean all periods
/// and a missing label is derived as `<target>:<mode>`.
ShockSpec shock_from_json(const nlohmann::json& doc, const ModelConfig& config);
nlohmann::json shock_to_json(const ShockSpec& shock);
/// A single scenario object, `{"scenarios":[...]}`, or a bare array.
std::vector<ShockSpec> parse_shocks(std::string_view text, const ModelConfig& config);
/// Splits a scenario file into one JSON document per scenario without
/// interpreting them.
std::vector<nlohmann::json> scenario_documents(std::string_view text);

}  // namespace dcm
