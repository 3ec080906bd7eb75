#include "dcm/report.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "dcm/error.hpp"
#include "dcm/format.hpp"

namespace dcm {

ValuationTable aggregate_by_group(const std::vector<CounterfactualResult>& results, const ModelConfig& config,
                                  const std::vector<std::string>& groups) {
    const auto outcomes = config.indices_with_role(Role::Outcome);
    ValuationTable table;
    table.groups = groups;
    for (const auto& r : results) table.scenarios.push_back(r.scenario);

    std::vector<std::vector<std::size_t>> members;  // positions in `outcomes`
    std::vector<int> cover(outcomes.size(), 0);
    for (const auto& name : groups) {
        std::vector<std::size_t> pos;
        const Group* g = config.find_group(name);
        if (g) {
            for (const auto& m : g->members) {
                const int v = config.variable_index(m);
                auto it = std::find(outcomes.begin(), outcomes.end(), v);
                if (it != outcomes.end()) pos.push_back(static_cast<std::size_t>(it - outcomes.begin()));
            }
            if (pos.empty()) throw Error(ErrorKind::InvalidArgument, "group '" + name + "' contains no outcome variable");
        } else if (name == "total") {
            for (std::size_t o = 0; o < outcomes.size(); ++o) pos.push_back(o);
        } else {
            throw Error(ErrorKind::UnknownGroup, "unknown group '" + name + "'");
        }
        for (auto o : pos) ++cover[o];
        members.push_back(std::move(pos));
    }
    table.rows_partition = !groups.empty() && std::all_of(cover.begin(), cover.end(), [](int c) { return c == 1; });

    std::vector<int> touched(config.variables.size(), 0);
    table.scenarios_disjoint = true;
    for (const auto& r : results) {
        for (int v : r.shocked_variables) {
            if (touched[static_cast<std::size_t>(v)]++ > 0) table.scenarios_disjoint = false;
        }
    }

    table.raw.assign(groups.size() * results.size(), 0.0);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (std::size_t s = 0; s < results.size(); ++s) {
            double sum = 0.0;
            for (auto o : members[g]) {
                for (int t = 0; t < results[s].n_periods; ++t) sum += results[s].delta_at(o, t);
            }
            table.raw[g * results.size() + s] = sum;
        }
    }
    return table;
}

ValuationTable normalize_table(const ValuationTable& table, double denominator) {
    if (denominator == 0.0 || !std::isfinite(denominator)) {
        throw Error(ErrorKind::ZeroDenominator, "normalization denominator must be finite and non-zero");
    }
    ValuationTable out = table;
    out.denominator = denominator;
    out.normalized.resize(table.raw.size());
    for (std::size_t i = 0; i < table.raw.size(); ++i) out.normalized[i] = 100.0 * table.raw[i] / denominator;
    return out;
}

double grand_total(const std::vector<CounterfactualResult>& results) {
    double total = 0.0;
    for (const auto& r : results) total += r.total_delta();
    return total;
}

void write_valuation_csv(std::ostream& out, const ValuationTable& table) {
    out << "group,scenario,raw,normalized,additive\n";
    for (std::size_t g = 0; g < table.groups.size(); ++g) {
        for (std::size_t s = 0; s < table.scenarios.size(); ++s) {
            out << table.groups[g] << ',' << table.scenarios[s] << ',' << format_double(table.raw_at(g, s)) << ',';
            if (!table.normalized.empty()) out << format_double(table.normalized_at(g, s));
            out << ',' << (table.additive() ? "true" : "false") << '\n';
        }
    }
}

}  // namespace dcm
