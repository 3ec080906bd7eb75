#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "dcm/config.hpp"
#include "dcm/panel.hpp"
#include "dcm/scorer.hpp"

namespace dcm {

struct BootstrapReport {
    std::string scenario;
    double point_estimate = 0.0;
    std::vector<double> replicates;
    double lower = 0.0;
    double upper = 0.0;
    double level = 0.95;
    std::uint64_t seed = 0;
};

/// Empirical quantile with linear interpolation between order statistics
/// (the usual "type 7" definition). `sorted` must be ascending.
double quantile_sorted(const std::vector<double>& sorted, double p);

/// Percentile interval at (1 - level)/2 and (1 + level)/2.
std::pair<double, double> percentile_interval(std::vector<double> values, double level);

/// Customer indices drawn with replacement for replicate `r`.
std::vector<std::size_t> resample_rows(std::size_t n, std::uint64_t seed, std::uint64_t r);

/// Resamples customers, refits and rescores R times. Each replicate derives
/// its own seed from (seed, index), so results do not depend on scheduling.
/// A failing replicate aborts with ReplicateFailed naming its index.
BootstrapReport bootstrap_value(const PanelTensor& panel, const ModelConfig& config, const ShockSpec& shock, int replicates,
                                double level, std::uint64_t seed, ScoreMode mode = ScoreMode::Deterministic);

/// `scenario,point,lower,upper,level,replicates,seed`.
void write_bootstrap_csv(std::ostream& out, const std::vector<BootstrapReport>& reports);
/// `scenario,replicate,value`.
void write_replicates_csv(std::ostream& out, const std::vector<BootstrapReport>& reports);

}  // namespace dcm
