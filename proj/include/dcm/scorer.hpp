#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dcm/config.hpp"
#include "dcm/error.hpp"
#include "dcm/estimator.hpp"
#include "dcm/panel.hpp"

namespace dcm {

enum class ScoreMode {
    Deterministic,   // all structural noise set to zero
    ResidualReplay,  // each customer's training residuals added back
};

std::string_view to_string(ScoreMode mode) noexcept;
ScoreMode parse_score_mode(std::string_view text);

/// Simulated values for every customer, laid out [customer][period][variable]
/// over all config variables (static ones copied from the panel).
struct Trajectory {
    std::string label;
    std::size_t n_customers = 0;
    int n_periods = 0;
    std::size_t n_variables = 0;
    std::vector<double> values;

    double at(std::size_t customer, int period, int variable) const noexcept {
        return values[(customer * static_cast<std::size_t>(n_periods) + static_cast<std::size_t>(period)) *
                          n_variables +
                      static_cast<std::size_t>(variable)];
    }
};

/// Recursion over periods. Inside a period ES interactions are evaluated and
/// overridden first; every other variable then sees the overridden values.
Trajectory simulate_path(const CoefficientSet& coeffs, const PanelTensor& panel, const ShockSpec* shock,
                         ScoreMode mode = ScoreMode::Deterministic);

struct GroupRollup {
    std::string name;
    std::string kind;
    std::vector<double> factual;  // per period
    std::vector<double> counterfactual;
    std::vector<double> delta;
};

/// Aggregates over customers. Cells are [outcome][period]; delta is
/// factual - counterfactual cell by cell.
struct CounterfactualResult {
    std::string scenario;
    int n_periods = 0;
    std::vector<int> outcomes;
    std::vector<std::string> outcome_names;
    std::vector<double> factual;
    std::vector<double> counterfactual;
    std::vector<double> delta;
    std::vector<GroupRollup> groups;
    std::vector<int> shocked_variables;

    double factual_at(std::size_t outcome, int period) const noexcept { return factual[index(outcome, period)]; }
    double counterfactual_at(std::size_t outcome, int period) const noexcept {
        return counterfactual[index(outcome, period)];
    }
    double delta_at(std::size_t outcome, int period) const noexcept { return delta[index(outcome, period)]; }
    double total_delta() const noexcept;
    double total_factual() const noexcept;
    double total_counterfactual() const noexcept;
    const GroupRollup* find_group(std::string_view name) const noexcept;

private:
    std::size_t index(std::size_t outcome, int period) const noexcept {
        return outcome * static_cast<std::size_t>(n_periods) + static_cast<std::size_t>(period);
    }
};

/// Simulates the unshocked and shocked paths from identical inputs and
/// aggregates outcomes per outcome, period and config group.
CounterfactualResult score_counterfactual(const CoefficientSet& coeffs, const PanelTensor& panel,
                                          const ShockSpec& shock, ScoreMode mode = ScoreMode::Deterministic);

/// Outcome sums of a single path, [outcome][period], fixed reduction order.
std::vector<double> aggregate_outcomes(const CoefficientSet& coeffs, const PanelTensor& panel, const ShockSpec* shock,
                                       ScoreMode mode = ScoreMode::Deterministic);

struct BatchItem {
    std::string label;
    std::optional<CounterfactualResult> result;
    std::optional<ErrorKind> error_kind;
    std::string error_message;
};

/// Scores every scenario; a failing scenario is reported in its slot without
/// affecting the others. Repeated labels get a `#<index>` suffix.
std::vector<BatchItem> batch_score(const CoefficientSet& coeffs, const PanelTensor& panel,
                                   const std::vector<ShockSpec>& shocks, ScoreMode mode = ScoreMode::Deterministic);

/// Builds group rollups from per-outcome cells (used after CSV re-reads too).
void compute_group_rollups(CounterfactualResult& result, const ModelConfig& config);

/// `scenario,outcome,group,period,factual,counterfactual,delta`; group rows
/// carry outcome `*`, the all-outcome total carries `*` in both columns.
void write_results_csv(std::ostream& out, const std::vector<CounterfactualResult>& results);
std::vector<CounterfactualResult> read_results_csv(std::istream& in, const ModelConfig& config);

}  // namespace dcm
