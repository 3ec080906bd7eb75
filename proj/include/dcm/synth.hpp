#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include <json.hpp>

#include "dcm/config.hpp"
#include "dcm/estimator.hpp"
#include "dcm/panel.hpp"

namespace dcm {

/// Shape, noise and truth-draw recipe of a synthetic economy.
struct SynthSpec {
    int n_customers = 1000;
    int n_periods = 6;
    int n_outcomes = 1;
    int n_non_es = 2;
    int n_es = 2;
    int n_covariates = 2;
    std::optional<int> lag_window = 2;
    bool same_period = true;
    bool fit_period_zero = true;
    bool include_policy = false;
    int n_channels = 1;
    int n_product_groups = 1;

    // structural noise scales (periods >= 1)
    double outcome_sd = 0.1;
    double non_es_sd = 0.1;
    double es_sd = 0.1;
    // period-0 dispersion; exogenous draws use initial_mean as their centre
    double initial_sd = 0.5;
    double initial_mean = 1.0;
    double covariate_mean = 1.0;
    double covariate_sd = 0.5;

    double spectral_cap = 0.9;
    double persistence = 0.5;
    double cross_sd = 0.15;
    double lag_decay = 0.5;
    double time_jitter = 0.1;
    double coef_sd = 0.3;  // covariates, policy, intercepts
    double delta_mean = 0.7;
    double gamma_mean = 0.3;
    double es_intercept = 0.5;
    double ridge_lambda = 0.0;
    std::uint64_t seed = 1;

    std::optional<CoefficientSet> truth;  // replaces the random draw

    bool operator==(const SynthSpec&) const = default;
};

SynthSpec synth_spec_from_json(const nlohmann::json& doc);
SynthSpec parse_synth_spec(std::string_view text);
nlohmann::json synth_spec_to_json(const SynthSpec& spec);

/// Variables y*, s*, e*, x* (+ d) with channel, product and feature groups.
ModelConfig synth_config(const SynthSpec& spec);

/// Largest spectral radius over periods of the companion form of the lagged
/// surrogate dynamics, with same-period ES feed-through folded in.
double transition_spectral_radius(const CoefficientSet& truth);

/// Seeded random truth meeting the spectral cap.
CoefficientSet draw_truth(const SynthSpec& spec, const ModelConfig& config);

struct SynthData {
    ModelConfig config;
    CoefficientSet truth;
    PanelTensor panel;
};

/// Forward-simulates the truth with noise. Throws UnstableSpec when the truth
/// violates the spectral cap.
SynthData generate_panel(const SynthSpec& spec);

/// Brute-force nested-loop recursion (deterministic) returning the aggregate
/// outcome delta factual - shocked. Shares no simulation code with the scorer.
double oracle_score(const CoefficientSet& truth, const PanelTensor& panel, const ShockSpec& shock);

}  // namespace dcm
