#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcm/config.hpp"
#include "dcm/estimator.hpp"
#include "dcm/panel.hpp"

namespace dcm {

inline constexpr int kExactPlayerLimit = 16;

struct Player {
    std::string name;
    std::vector<int> variables;
    ShockMode baseline_mode = ShockMode::Set;
    double baseline_value = 0.0;
};

/// Players hold disjoint, non-empty variable sets. `outcome_group` restricts
/// the characteristic function to the outcomes of one group.
struct PlayerSet {
    std::vector<Player> players;
    std::optional<std::string> outcome_group;

    std::size_t size() const noexcept { return players.size(); }
};

/// `{"players":[{"name", "group" | "variables", "baseline":{"mode","value"}}],
///   "outcome_group"?}`; a bare array of players is accepted too.
PlayerSet players_from_json(const nlohmann::json& doc, const ModelConfig& config);
PlayerSet parse_players(std::string_view text, const ModelConfig& config);

/// Shock putting every player outside `coalition` (bitmask) at baseline.
ShockSpec coalition_shock(const PlayerSet& players, std::uint64_t coalition, const ModelConfig& config);

/// F(coalition): aggregate outcome with non-members at baseline,
/// deterministic scoring.
double characteristic_value(const CoefficientSet& coeffs, const PanelTensor& panel, const PlayerSet& players,
                            std::uint64_t coalition);

using CoalitionValue = std::function<double(std::uint64_t)>;

/// Memoizing evaluator over the scorer; each coalition is scored once.
class CharacteristicCache {
public:
    CharacteristicCache(const CoefficientSet& coeffs, const PanelTensor& panel, const PlayerSet& players);

    double operator()(std::uint64_t coalition);
    std::size_t evaluations() const noexcept { return evaluations_; }
    /// Scores every coalition of a P-player game, coalitions in parallel.
    std::vector<double> all_coalitions();

private:
    const CoefficientSet& coeffs_;
    const PanelTensor& panel_;
    const PlayerSet& players_;
    std::vector<std::optional<double>> values_;  // indexed by mask when P <= limit
    std::vector<std::pair<std::uint64_t, double>> sparse_;
    std::size_t evaluations_ = 0;
};

struct AttributionResult {
    std::vector<std::string> players;
    std::vector<double> phi;
    std::vector<double> standard_errors;  // sampled only
    std::vector<double> standalone;       // F(all) - F(all without k)
    std::vector<std::pair<std::uint64_t, double>> characteristic_values;
    double grand_value = 0.0;             // F(all) - F(none)
    double efficiency_gap = 0.0;
    std::string method;                   // "exact" or "sampled"
    int permutations = 0;
};

/// `values` holds F for all 2^P coalitions indexed by bitmask.
AttributionResult shapley_exact(const PlayerSet& players, const std::vector<double>& values);

/// Two-player closed form: half the sum of player k's marginal gains with the
/// other player on and off. Returns {phi_1, phi_2}.
std::pair<double, double> shapley_two_player(double f_none, double f_first, double f_second, double f_both);

/// Permutation-sampling estimate with per-player standard errors.
AttributionResult shapley_sampled(const PlayerSet& players, const CoalitionValue& value, int permutations,
                                  std::uint64_t seed);

/// `player,phi,share,method,se`; share is phi over F(all) - F(none).
void write_shapley_csv(std::ostream& out, const AttributionResult& result);
/// `player,standalone_delta,share`.
void write_standalone_csv(std::ostream& out, const AttributionResult& result);
/// `coalition,members,value`.
void write_characteristic_csv(std::ostream& out, const AttributionResult& result);

}  // namespace dcm
