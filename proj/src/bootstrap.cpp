#include "dcm/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <optional>
#include <ostream>
#include <random>
#include <tuple>

#include "dcm/error.hpp"
#include "dcm/estimator.hpp"
#include "dcm/format.hpp"

namespace dcm {

double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw Error(ErrorKind::InvalidArgument, "quantile of an empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

std::pair<double, double> percentile_interval(std::vector<double> values, double level) {
    if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::InvalidArgument, "level must lie in (0, 1)");
    std::sort(values.begin(), values.end());
    return {quantile_sorted(values, (1.0 - level) / 2.0), quantile_sorted(values, (1.0 + level) / 2.0)};
}

std::vector<std::size_t> resample_rows(std::size_t n, std::uint64_t seed, std::uint64_t r) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffULL), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(r & 0xffffffffULL), static_cast<std::uint32_t>(r >> 32)};
    std::mt19937_64 eng(seq);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> rows(n);
    for (auto& row : rows) row = pick(eng);
    return rows;
}

BootstrapReport bootstrap_value(const PanelTensor& panel, const ModelConfig& config, const ShockSpec& shock, int replicates,
                                double level, std::uint64_t seed, ScoreMode mode) {
    if (replicates < 2) throw Error(ErrorKind::InvalidArgument, "bootstrap needs at least 2 replicates");
    if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::InvalidArgument, "level must lie in (0, 1)");
    check_panel_matches(panel, config);
    validate_shock(shock, config);

    BootstrapReport report;
    report.scenario = shock.label;
    report.level = level;
    report.seed = seed;
    report.point_estimate = score_counterfactual(fit_dcm(panel, config), panel, shock, mode).total_delta();

    report.replicates.assign(static_cast<std::size_t>(replicates), 0.0);
    std::vector<std::optional<std::string>> failures(static_cast<std::size_t>(replicates));
#pragma omp parallel for schedule(dynamic)
    for (int r = 0; r < replicates; ++r) {
        try {
            const auto rows = resample_rows(panel.n_customers(), seed, static_cast<std::uint64_t>(r));
            const PanelTensor sample = panel.select_customers(rows);
            report.replicates[static_cast<std::size_t>(r)] =
                score_counterfactual(fit_dcm(sample, config), sample, shock, mode).total_delta();
        } catch (const std::exception& e) {
            failures[static_cast<std::size_t>(r)] = e.what();
        }
    }
    for (std::size_t r = 0; r < failures.size(); ++r) {
        if (failures[r]) throw Error(ErrorKind::ReplicateFailed, "replicate " + std::to_string(r) + ": " + *failures[r]);
    }
    std::tie(report.lower, report.upper) = percentile_interval(report.replicates, level);
    return report;
}

void write_bootstrap_csv(std::ostream& out, const std::vector<BootstrapReport>& reports) {
    out << "scenario,point,lower,upper,level,replicates,seed\n";
    for (const auto& r : reports) {
        out << r.scenario << ',' << format_double(r.point_estimate) << ',' << format_double(r.lower) << ','
            << format_double(r.upper) << ',' << format_double(r.level) << ',' << r.replicates.size() << ',' << r.seed
            << '\n';
    }
}

void write_replicates_csv(std::ostream& out, const std::vector<BootstrapReport>& reports) {
    out << "scenario,replicate,value\n";
    for (const auto& r : reports) {
        for (std::size_t i = 0; i < r.replicates.size(); ++i) {
            out << r.scenario << ',' << i << ',' << format_double(r.replicates[i]) << '\n';
        }
    }
}

}  // namespace dcm
