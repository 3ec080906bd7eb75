#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dcm/config.hpp"
#include "dcm/scorer.hpp"

namespace dcm {

/// Group x scenario cells of summed deltas. `normalized` is empty until
/// normalize_table is applied; raw cells are always kept.
struct ValuationTable {
    std::vector<std::string> groups;
    std::vector<std::string> scenarios;
    std::vector<double> raw;         // [group][scenario]
    std::vector<double> normalized;  // same layout, 100 * raw / denominator
    std::optional<double> denominator;
    bool rows_partition = false;     // listed groups partition the outcomes
    bool scenarios_disjoint = false; // no variable shocked by two scenarios
    std::string model_hash;

    bool additive() const noexcept { return rows_partition && scenarios_disjoint; }
    double raw_at(std::size_t group, std::size_t scenario) const noexcept { return raw[group * scenarios.size() + scenario]; }
    double normalized_at(std::size_t group, std::size_t scenario) const noexcept {
        return normalized[group * scenarios.size() + scenario];
    }
};

/// Sums deltas over each group's outcome members and all periods. The name
/// `total` means every outcome unless a group of that name is declared.
ValuationTable aggregate_by_group(const std::vector<CounterfactualResult>& results, const ModelConfig& config,
                                  const std::vector<std::string>& groups);

/// Throws ZeroDenominator when `denominator` is 0 or not finite.
ValuationTable normalize_table(const ValuationTable& table, double denominator);

/// Sum of every scenario's total delta.
double grand_total(const std::vector<CounterfactualResult>& results);

/// `group,scenario,raw,normalized,additive`.
void write_valuation_csv(std::ostream& out, const ValuationTable& table);

}  // namespace dcm
