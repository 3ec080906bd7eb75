#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dcm/config.hpp"
#include "dcm/estimator.hpp"
#include "dcm/panel.hpp"
#include "dcm/synth.hpp"

namespace dcm::testing {

inline bool rel_close(double a, double b, double rel) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return std::abs(a - b) <= rel * scale;
}

/// Desk-scale economy used by most tests.
inline SynthSpec small_spec(std::uint64_t seed = 11) {
    SynthSpec s;
    s.n_customers = 200;
    s.n_periods = 5;
    s.n_outcomes = 2;
    s.n_non_es = 2;
    s.n_es = 2;
    s.n_covariates = 2;
    s.lag_window = 2;
    s.n_channels = 2;
    s.n_product_groups = 2;
    s.seed = seed;
    return s;
}

inline ShockSpec remove_group(const std::string& group, int n_periods, const std::string& label = "") {
    ShockSpec s;
    s.label = label.empty() ? group + ":off" : label;
    s.entries.push_back({group, 0, n_periods - 1, ShockMode::Set, 0.0});
    return s;
}

/// Zeroes every lagged or same-period coefficient whose source is `v`.
inline CoefficientSet silence_source(const CoefficientSet& truth, int v) {
    CoefficientSet out(truth.config());
    for (Equation e : truth.equations()) {
        for (std::size_t j = 0; j < e.columns.size(); ++j) {
            const Column& c = e.columns[j];
            if ((c.kind == ColumnKind::Lag || c.kind == ColumnKind::SamePeriod) && c.variable == v) e.coefficients[j] = 0.0;
        }
        out.add(std::move(e));
    }
    return out;
}

/// Makes variables `a` and `b` exchangeable: their equations mirror each
/// other and every other equation weighs them equally.
inline CoefficientSet symmetrize(const CoefficientSet& truth, int a, int b) {
    auto swap_var = [&](int v) { return v == a ? b : (v == b ? a : v); };
    CoefficientSet out(truth.config());
    for (Equation e : truth.equations()) {
        if (e.target == b) {
            const Equation* src = truth.find(a, e.period);
            for (std::size_t j = 0; j < e.columns.size(); ++j) {
                Column mirrored = e.columns[j];
                if (mirrored.variable >= 0) mirrored.variable = swap_var(mirrored.variable);
                e.coefficients[j] = src->coefficient(mirrored);
            }
        } else if (e.target != a) {
            for (std::size_t j = 0; j < e.columns.size(); ++j) {
                Column c = e.columns[j];
                if (c.variable != a) continue;
                Column other = c;
                other.variable = b;
                const double mean = 0.5 * (e.coefficient(c) + e.coefficient(other));
                e.coefficients[j] = mean;
                if (double* p = e.find(other)) *p = mean;
            }
        }
        out.add(std::move(e));
    }
    return out;
}

}  // namespace dcm::testing
