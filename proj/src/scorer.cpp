#include "dcm/scorer.hpp"

#include <charconv>
#include <exception>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "dcm/format.hpp"

namespace dcm {

std::string_view to_string(ScoreMode mode) noexcept {
    return mode == ScoreMode::Deterministic ? "deterministic" : "residual-replay";
}

ScoreMode parse_score_mode(std::string_view text) {
    if (text == "deterministic") return ScoreMode::Deterministic;
    if (text == "residual-replay") return ScoreMode::ResidualReplay;
    throw Error(ErrorKind::InvalidArgument, "unknown score mode '" + std::string(text) + "'");
}

namespace {

struct Term {
    std::size_t offset;  // into a [period][variable] block
    double coef;
};

struct CompiledEquation {
    bool present = false;
    double intercept = 0.0;
    std::vector<Term> terms;
};

using ShockOps = std::vector<std::pair<ShockMode, double>>;

/// Flattened view of a CoefficientSet plus one shock, ready for per-customer
/// recursion.
class Simulator {
public:
    Simulator(const CoefficientSet& coeffs, const PanelTensor& panel, const ShockSpec* shock, ScoreMode mode)
        : config_(coeffs.config()),
          panel_(panel),
          mode_(mode),
          n_vars_(config_.n_variables()),
          n_periods_(config_.n_periods),
          order_(config_.evaluation_order()),
          equations_(n_cells()),
          shocks_(n_cells()) {
        check_panel_matches(panel, config_);
        for (const auto& eq : coeffs.equations()) {
            CompiledEquation& ce = equations_[cell(eq.period, eq.target)];
            ce.present = true;
            for (std::size_t j = 0; j < eq.columns.size(); ++j) {
                const Column& col = eq.columns[j];
                switch (col.kind) {
                    case ColumnKind::Intercept: ce.intercept = eq.coefficients[j]; break;
                    case ColumnKind::Lag:
                    case ColumnKind::SamePeriod: ce.terms.push_back({cell(col.period, col.variable), eq.coefficients[j]}); break;
                    case ColumnKind::Covariate:
                    case ColumnKind::Policy: ce.terms.push_back({cell(eq.period, col.variable), eq.coefficients[j]}); break;
                }
            }
        }
        if (shock) {
            validate_shock(*shock, config_);
            for (const auto& entry : shock->entries) {
                for (int v : config_.resolve_target(entry.target)) {
                    for (int t = entry.first_period; t <= entry.last_period; ++t) {
                        shocks_[cell(t, v)].emplace_back(entry.mode, entry.value);
                    }
                }
            }
        }
    }

    std::size_t block_size() const noexcept { return n_cells(); }

    /// Fills `state` ([period][variable]) for one customer.
    void run(std::size_t customer, std::vector<double>& state, std::vector<char>& ready) const {
        const auto observed = panel_.customer_block(customer);
        std::fill(state.begin(), state.end(), 0.0);
        std::fill(ready.begin(), ready.end(), 0);
        for (std::size_t v = 0; v < n_vars_; ++v) {
            if (is_dynamic(config_.variables[v].role)) continue;
            for (int t = 0; t < n_periods_; ++t) {
                double x = observed[cell(t, static_cast<int>(v))];
                for (auto [m, a] : shocks_[cell(t, static_cast<int>(v))]) x = apply_shock(m, a, x);
                state[cell(t, static_cast<int>(v))] = x;
                ready[cell(t, static_cast<int>(v))] = 1;
            }
        }
        for (int t = 0; t < n_periods_; ++t) {
            for (int v : order_) {
                const std::size_t here = cell(t, v);
                const CompiledEquation& eq = equations_[here];
                double x;
                if (eq.present) {
                    x = eq.intercept;
                    for (const Term& term : eq.terms) {
                        if (!ready[term.offset]) {
                            throw Error(ErrorKind::OrderViolation, "'" + config_.variables[v].name + "' at period " +
                                                                       std::to_string(t) +
                                                                       " read a value before it was computed");
                        }
                        x += term.coef * state[term.offset];
                    }
                    if (mode_ == ScoreMode::ResidualReplay) {
                        double fitted = eq.intercept;
                        for (const Term& term : eq.terms) fitted += term.coef * observed[term.offset];
                        x += observed[here] - fitted;
                    }
                } else {
                    x = observed[here];
                }
                for (auto [m, a] : shocks_[here]) x = apply_shock(m, a, x);
                state[here] = x;
                ready[here] = 1;
            }
        }
    }

private:
    std::size_t n_cells() const noexcept { return static_cast<std::size_t>(n_periods_) * n_vars_; }
    std::size_t cell(int period, int variable) const noexcept {
        return static_cast<std::size_t>(period) * n_vars_ + static_cast<std::size_t>(variable);
    }

    const ModelConfig& config_;
    const PanelTensor& panel_;
    ScoreMode mode_;
    std::size_t n_vars_;
    int n_periods_;
    std::vector<int> order_;
    std::vector<CompiledEquation> equations_;
    std::vector<ShockOps> shocks_;
};

void rethrow_first(const std::vector<std::exception_ptr>& errors) {
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

/// Per-customer outcome sums for each simulator, reduced in customer order.
std::vector<std::vector<double>> outcome_sums(const std::vector<const Simulator*>& sims, const PanelTensor& panel,
                                              const std::vector<int>& outcomes) {
    const std::size_t n = panel.n_customers();
    const int periods = panel.n_periods();
    const std::size_t n_vars = panel.n_variables();
    const std::size_t width = outcomes.size() * static_cast<std::size_t>(periods);
    std::vector<std::vector<double>> per_customer(sims.size(), std::vector<double>(n * width, 0.0));
    std::vector<std::exception_ptr> errors(n);
    const auto n_signed = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel
    {
        std::vector<double> state(sims.empty() ? 0 : sims.front()->block_size());
        std::vector<char> ready(state.size());
#pragma omp for schedule(static)
        for (std::ptrdiff_t ci = 0; ci < n_signed; ++ci) {
            const auto c = static_cast<std::size_t>(ci);
            try {
                for (std::size_t s = 0; s < sims.size(); ++s) {
                    sims[s]->run(c, state, ready);
                    for (std::size_t o = 0; o < outcomes.size(); ++o) {
                        for (int t = 0; t < periods; ++t) {
                            per_customer[s][c * width + o * static_cast<std::size_t>(periods) + static_cast<std::size_t>(t)] =
                                state[static_cast<std::size_t>(t) * n_vars + static_cast<std::size_t>(outcomes[o])];
                        }
                    }
                }
            } catch (...) {
                errors[c] = std::current_exception();
            }
        }
    }
    rethrow_first(errors);
    std::vector<std::vector<double>> sums(sims.size(), std::vector<double>(width, 0.0));
    for (std::size_t s = 0; s < sims.size(); ++s) {
        for (std::size_t c = 0; c < n; ++c) {
            for (std::size_t k = 0; k < width; ++k) sums[s][k] += per_customer[s][c * width + k];
        }
    }
    return sums;
}

}  // namespace

Trajectory simulate_path(const CoefficientSet& coeffs, const PanelTensor& panel, const ShockSpec* shock, ScoreMode mode) {
    Simulator sim(coeffs, panel, shock, mode);
    Trajectory traj;
    traj.label = shock ? shock->label : std::string("factual");
    traj.n_customers = panel.n_customers();
    traj.n_periods = panel.n_periods();
    traj.n_variables = panel.n_variables();
    const std::size_t block = sim.block_size();
    traj.values.assign(traj.n_customers * block, 0.0);
    std::vector<std::exception_ptr> errors(traj.n_customers);
    const auto n_signed = static_cast<std::ptrdiff_t>(traj.n_customers);
#pragma omp parallel
    {
        std::vector<double> state(block);
        std::vector<char> ready(block);
#pragma omp for schedule(static)
        for (std::ptrdiff_t ci = 0; ci < n_signed; ++ci) {
            const auto c = static_cast<std::size_t>(ci);
            try {
                sim.run(c, state, ready);
                std::copy(state.begin(), state.end(), traj.values.begin() + static_cast<std::ptrdiff_t>(c * block));
            } catch (...) {
                errors[c] = std::current_exception();
            }
        }
    }
    rethrow_first(errors);
    return traj;
}

double CounterfactualResult::total_delta() const noexcept {
    double s = 0.0;
    for (double d : delta) s += d;
    return s;
}

double CounterfactualResult::total_factual() const noexcept {
    double s = 0.0;
    for (double d : factual) s += d;
    return s;
}

double CounterfactualResult::total_counterfactual() const noexcept {
    double s = 0.0;
    for (double d : counterfactual) s += d;
    return s;
}

const GroupRollup* CounterfactualResult::find_group(std::string_view name) const noexcept {
    for (const auto& g : groups) {
        if (g.name == name) return &g;
    }
    return nullptr;
}

void compute_group_rollups(CounterfactualResult& result, const ModelConfig& config) {
    result.groups.clear();
    for (const auto& g : config.groups) {
        std::vector<std::size_t> members;
        for (const auto& m : g.members) {
            const int v = config.variable_index(m);
            auto it = std::find(result.outcomes.begin(), result.outcomes.end(), v);
            if (it != result.outcomes.end()) members.push_back(static_cast<std::size_t>(it - result.outcomes.begin()));
        }
        if (members.empty()) continue;
        GroupRollup roll{g.name, g.kind, {}, {}, {}};
        for (int t = 0; t < result.n_periods; ++t) {
            double f = 0.0;
            double cf = 0.0;
            for (auto o : members) {
                f += result.factual_at(o, t);
                cf += result.counterfactual_at(o, t);
            }
            roll.factual.push_back(f);
            roll.counterfactual.push_back(cf);
            roll.delta.push_back(f - cf);
        }
        result.groups.push_back(std::move(roll));
    }
}

std::vector<double> aggregate_outcomes(const CoefficientSet& coeffs, const PanelTensor& panel, const ShockSpec* shock,
                                       ScoreMode mode) {
    Simulator sim(coeffs, panel, shock, mode);
    return outcome_sums({&sim}, panel, coeffs.config().indices_with_role(Role::Outcome)).front();
}

CounterfactualResult score_counterfactual(const CoefficientSet& coeffs, const PanelTensor& panel,
                                          const ShockSpec& shock, ScoreMode mode) {
    const ModelConfig& config = coeffs.config();
    Simulator factual(coeffs, panel, nullptr, mode);
    Simulator shocked(coeffs, panel, &shock, mode);
    CounterfactualResult result;
    result.scenario = shock.label;
    result.n_periods = config.n_periods;
    result.outcomes = config.indices_with_role(Role::Outcome);
    for (int o : result.outcomes) result.outcome_names.push_back(config.variables[o].name);
    result.shocked_variables = shocked_variables(shock, config);
    auto sums = outcome_sums({&factual, &shocked}, panel, result.outcomes);
    result.factual = std::move(sums[0]);
    result.counterfactual = std::move(sums[1]);
    result.delta.resize(result.factual.size());
    for (std::size_t k = 0; k < result.delta.size(); ++k) result.delta[k] = result.factual[k] - result.counterfactual[k];
    compute_group_rollups(result, config);
    return result;
}

std::vector<BatchItem> batch_score(const CoefficientSet& coeffs, const PanelTensor& panel,
                                   const std::vector<ShockSpec>& shocks, ScoreMode mode) {
    std::map<std::string, int> counts;
    for (const auto& s : shocks) ++counts[s.label];
    std::vector<BatchItem> out;
    out.reserve(shocks.size());
    for (std::size_t i = 0; i < shocks.size(); ++i) {
        ShockSpec shock = shocks[i];
        if (counts[shock.label] > 1) shock.label += "#" + std::to_string(i);
        BatchItem item;
        item.label = shock.label;
        try {
            item.result = score_counterfactual(coeffs, panel, shock, mode);
        } catch (const Error& e) {
            item.error_kind = e.kind();
            item.error_message = e.what();
        }
        out.push_back(std::move(item));
    }
    return out;
}

void write_results_csv(std::ostream& out, const std::vector<CounterfactualResult>& results) {
    out << "scenario,outcome,group,period,factual,counterfactual,delta\n";
    auto row = [&](const std::string& scenario, const std::string& outcome, const std::string& group, int t, double f,
                   double cf, double d) {
        out << scenario << ',' << outcome << ',' << group << ',' << t << ',' << format_double(f) << ','
            << format_double(cf) << ',' << format_double(d) << '\n';
    };
    for (const auto& r : results) {
        for (std::size_t o = 0; o < r.outcomes.size(); ++o) {
            for (int t = 0; t < r.n_periods; ++t) {
                row(r.scenario, r.outcome_names[o], "", t, r.factual_at(o, t), r.counterfactual_at(o, t), r.delta_at(o, t));
            }
        }
        for (const auto& g : r.groups) {
            for (int t = 0; t < r.n_periods; ++t) {
                const auto ut = static_cast<std::size_t>(t);
                row(r.scenario, "*", g.name, t, g.factual[ut], g.counterfactual[ut], g.delta[ut]);
            }
        }
        for (int t = 0; t < r.n_periods; ++t) {
            double f = 0.0;
            double cf = 0.0;
            for (std::size_t o = 0; o < r.outcomes.size(); ++o) {
                f += r.factual_at(o, t);
                cf += r.counterfactual_at(o, t);
            }
            row(r.scenario, "*", "*", t, f, cf, f - cf);
        }
    }
}

std::vector<CounterfactualResult> read_results_csv(std::istream& in, const ModelConfig& config) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("scenario,outcome,group,period,factual,counterfactual,delta", 0) != 0) {
        throw Error(ErrorKind::ParseError, "results file must start with the standard header");
    }
    const auto outcomes = config.indices_with_role(Role::Outcome);
    std::vector<CounterfactualResult> results;
    std::map<std::string, std::size_t> by_label;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) f.push_back(field);
        if (!line.empty() && line.back() == ',') f.emplace_back();
        if (f.size() != 7) throw Error(ErrorKind::ParseError, "results line " + std::to_string(line_no) + " has " + std::to_string(f.size()) + " fields");
        if (f[1] == "*") continue;
        auto [it, inserted] = by_label.try_emplace(f[0], results.size());
        if (inserted) {
            CounterfactualResult r;
            r.scenario = f[0];
            r.n_periods = config.n_periods;
            r.outcomes = outcomes;
            for (int o : outcomes) r.outcome_names.push_back(config.variables[o].name);
            const std::size_t cells = outcomes.size() * static_cast<std::size_t>(config.n_periods);
            r.factual.assign(cells, 0.0);
            r.counterfactual.assign(cells, 0.0);
            r.delta.assign(cells, 0.0);
            results.push_back(std::move(r));
        }
        CounterfactualResult& r = results[it->second];
        const int v = config.variable_index(f[1]);
        auto pos = std::find(outcomes.begin(), outcomes.end(), v);
        if (pos == outcomes.end()) throw Error(ErrorKind::ParseError, "'" + f[1] + "' is not an outcome");
        int t = -1;
        std::from_chars(f[3].data(), f[3].data() + f[3].size(), t);
        if (t < 0 || t >= config.n_periods) throw Error(ErrorKind::PeriodOutOfRange, "bad period on results line " + std::to_string(line_no));
        const std::size_t k = static_cast<std::size_t>(pos - outcomes.begin()) * static_cast<std::size_t>(config.n_periods) +
                              static_cast<std::size_t>(t);
        auto num = [&](const std::string& s) {
            double x = 0.0;
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
            if (ec != std::errc() || p != s.data() + s.size()) {
                throw Error(ErrorKind::ParseError, "bad number '" + s + "' on results line " + std::to_string(line_no));
            }
            return x;
        };
        r.factual[k] = num(f[4]);
        r.counterfactual[k] = num(f[5]);
        r.delta[k] = num(f[6]);
    }
    for (auto& r : results) compute_group_rollups(r, config);
    return results;
}

}  // namespace dcm
