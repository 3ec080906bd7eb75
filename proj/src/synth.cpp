#include "dcm/synth.hpp"

#include <cmath>
#include <functional>
#include <random>

#include <Eigen/Eigenvalues>

#include "dcm/error.hpp"

namespace dcm {

using nlohmann::json;

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffULL), static_cast<std::uint32_t>(seed >> 32), stream};
    return std::mt19937_64(seq);
}

void require(bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorKind::InvalidConfig, "synth spec: " + what);
}

// ---------------------------------------------------------------------------
// Naive recursion used by both the generator and the oracle. Deliberately
// plain: dense tables, linear searches, no precompilation.

struct NaiveTerm {
    Column column;
    double coef;
};

struct NaiveEquation {
    bool present = false;
    std::vector<NaiveTerm> terms;
};

struct NaiveModel {
    const ModelConfig* config = nullptr;
    std::vector<std::vector<NaiveEquation>> eq;  // [period][variable]
    std::vector<int> order;
};

int naive_rank(Role r) {
    if (r == Role::EsInteraction) return 0;
    if (r == Role::SurrogateNonEs) return 1;
    return 2;
}

NaiveModel naive_model(const CoefficientSet& truth) {
    const ModelConfig& cfg = truth.config();
    NaiveModel m;
    m.config = &cfg;
    m.eq.assign(static_cast<std::size_t>(cfg.n_periods), std::vector<NaiveEquation>(cfg.variables.size()));
    for (const Equation& e : truth.equations()) {
        NaiveEquation& ne = m.eq[static_cast<std::size_t>(e.period)][static_cast<std::size_t>(e.target)];
        ne.present = true;
        for (std::size_t j = 0; j < e.columns.size(); ++j) ne.terms.push_back({e.columns[j], e.coefficients[j]});
    }
    // pick repeatedly the first ready variable by (role rank, declaration)
    const auto edges = cfg.within_period_edges();
    std::vector<bool> done(cfg.variables.size(), false);
    for (;;) {
        int pick = -1;
        for (int rank = 0; rank < 3 && pick < 0; ++rank) {
            for (int v = 0; v < static_cast<int>(cfg.variables.size()) && pick < 0; ++v) {
                const Role r = cfg.variables[static_cast<std::size_t>(v)].role;
                if (!is_dynamic(r) || done[static_cast<std::size_t>(v)] || naive_rank(r) != rank) continue;
                bool ready = true;
                for (auto [from, to] : edges) {
                    if (to == v && !done[static_cast<std::size_t>(from)]) ready = false;
                }
                if (ready) pick = v;
            }
        }
        if (pick < 0) break;
        done[static_cast<std::size_t>(pick)] = true;
        m.order.push_back(pick);
    }
    return m;
}

double shocked_value(const ModelConfig& cfg, const ShockSpec* shock, int v, int t, double x) {
    if (!shock) return x;
    for (const ShockEntry& e : shock->entries) {
        if (t < e.first_period || t > e.last_period) continue;
        bool hit = false;
        for (const Group& g : cfg.groups) {
            if (g.name != e.target) continue;
            for (const std::string& member : g.members) hit = hit || member == cfg.variables[static_cast<std::size_t>(v)].name;
        }
        hit = hit || cfg.variables[static_cast<std::size_t>(v)].name == e.target;
        if (!hit) continue;
        if (e.mode == ShockMode::Scale) x = x * e.value;
        else if (e.mode == ShockMode::Set) x = e.value;
        else x = x + e.value;
    }
    return x;
}

/// One customer's path as table[period][variable]. `statics` holds static
/// values by variable, `initial` the period-0 values used where no
/// equation exists, `noise(v, t)` the structural disturbance.
std::vector<std::vector<double>> naive_path(const NaiveModel& m, const std::vector<double>& statics,
                                            const std::vector<double>& initial, const ShockSpec* shock,
                                            const std::function<double(int, int)>& noise) {
    const ModelConfig& cfg = *m.config;
    const std::size_t nv = cfg.variables.size();
    std::vector<std::vector<double>> table(static_cast<std::size_t>(cfg.n_periods), std::vector<double>(nv, 0.0));
    for (int t = 0; t < cfg.n_periods; ++t) {
        for (std::size_t v = 0; v < nv; ++v) {
            if (!is_dynamic(cfg.variables[v].role)) {
                table[static_cast<std::size_t>(t)][v] = shocked_value(cfg, shock, static_cast<int>(v), t, statics[v]);
            }
        }
    }
    for (int t = 0; t < cfg.n_periods; ++t) {
        auto& row = table[static_cast<std::size_t>(t)];
        for (int v : m.order) {
            const NaiveEquation& e = m.eq[static_cast<std::size_t>(t)][static_cast<std::size_t>(v)];
            double x = 0.0;
            if (e.present) {
                for (const NaiveTerm& term : e.terms) {
                    double input = 1.0;
                    if (term.column.kind == ColumnKind::Lag) {
                        input = table[static_cast<std::size_t>(term.column.period)][static_cast<std::size_t>(term.column.variable)];
                    } else if (term.column.kind != ColumnKind::Intercept) {
                        input = row[static_cast<std::size_t>(term.column.variable)];
                    }
                    x += term.coef * input;
                }
                x += noise(v, t);
            } else {
                x = initial[static_cast<std::size_t>(v)];
            }
            row[static_cast<std::size_t>(v)] = shocked_value(cfg, shock, v, t, x);
        }
    }
    return table;
}

// ---------------------------------------------------------------------------

void scale_lags(CoefficientSet& truth, double factor) {
    std::vector<Equation> eqs = truth.equations();
    CoefficientSet scaled(truth.config());
    for (Equation& e : eqs) {
        for (std::size_t j = 0; j < e.columns.size(); ++j) {
            if (e.columns[j].kind == ColumnKind::Lag) e.coefficients[j] *= factor;
        }
        scaled.add(std::move(e));
    }
    truth = std::move(scaled);
}

FitDiagnostics truth_diagnostics() {
    FitDiagnostics d;
    d.solver = "truth";
    return d;
}

}  // namespace

SynthSpec synth_spec_from_json(const json& doc) {
    if (!doc.is_object()) throw Error(ErrorKind::ParseError, "synth spec must be an object");
    static const char* const known[] = {
        "n_customers", "n_periods", "n_outcomes", "n_non_es", "n_es", "n_covariates", "lag_window", "same_period",
        "fit_period_zero", "include_policy", "n_channels", "n_product_groups", "outcome_sd", "non_es_sd", "es_sd",
        "initial_sd", "initial_mean", "covariate_mean", "covariate_sd", "spectral_cap", "persistence", "cross_sd",
        "lag_decay", "time_jitter", "coef_sd", "delta_mean", "gamma_mean", "es_intercept", "ridge_lambda", "seed",
        "truth"};
    for (const auto& [key, _] : doc.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw Error(ErrorKind::ParseError, "unknown key '" + key + "' in synth spec");
    }
    SynthSpec s;
    try {
        auto get = [&](const char* key, auto& field) {
            if (doc.contains(key)) field = doc.at(key).get<std::remove_reference_t<decltype(field)>>();
        };
        get("n_customers", s.n_customers);
        get("n_periods", s.n_periods);
        get("n_outcomes", s.n_outcomes);
        get("n_non_es", s.n_non_es);
        get("n_es", s.n_es);
        get("n_covariates", s.n_covariates);
        if (doc.contains("lag_window")) {
            const json& lw = doc.at("lag_window");
            if (lw.is_null() || (lw.is_string() && lw.get<std::string>() == "inf")) s.lag_window.reset();
            else s.lag_window = lw.get<int>();
        }
        get("same_period", s.same_period);
        get("fit_period_zero", s.fit_period_zero);
        get("include_policy", s.include_policy);
        get("n_channels", s.n_channels);
        get("n_product_groups", s.n_product_groups);
        get("outcome_sd", s.outcome_sd);
        get("non_es_sd", s.non_es_sd);
        get("es_sd", s.es_sd);
        get("initial_sd", s.initial_sd);
        get("initial_mean", s.initial_mean);
        get("covariate_mean", s.covariate_mean);
        get("covariate_sd", s.covariate_sd);
        get("spectral_cap", s.spectral_cap);
        get("persistence", s.persistence);
        get("cross_sd", s.cross_sd);
        get("lag_decay", s.lag_decay);
        get("time_jitter", s.time_jitter);
        get("coef_sd", s.coef_sd);
        get("delta_mean", s.delta_mean);
        get("gamma_mean", s.gamma_mean);
        get("es_intercept", s.es_intercept);
        get("ridge_lambda", s.ridge_lambda);
        get("seed", s.seed);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("synth spec: ") + e.what());
    }
    if (doc.contains("truth")) s.truth = artifact_from_json(doc.at("truth"));
    require(s.n_customers >= 1, "n_customers must be >= 1");
    require(s.n_periods >= 1, "n_periods must be >= 1");
    require(s.n_outcomes >= 1, "n_outcomes must be >= 1");
    require(s.n_non_es >= 0 && s.n_es >= 0 && s.n_covariates >= 0, "variable counts must be >= 0");
    require(!s.lag_window || *s.lag_window >= 1, "lag_window must be >= 1");
    require(s.n_channels >= 1 && s.n_product_groups >= 1, "group counts must be >= 1");
    for (double sd : {s.outcome_sd, s.non_es_sd, s.es_sd, s.initial_sd, s.covariate_sd}) {
        require(std::isfinite(sd) && sd >= 0.0, "noise scales must be finite and >= 0");
    }
    require(s.spectral_cap > 0.0, "spectral_cap must be positive");
    return s;
}

SynthSpec parse_synth_spec(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::ParseError, std::string("synth spec: ") + e.what());
    }
    return synth_spec_from_json(doc);
}

json synth_spec_to_json(const SynthSpec& s) {
    json doc = {{"n_customers", s.n_customers},
                {"n_periods", s.n_periods},
                {"n_outcomes", s.n_outcomes},
                {"n_non_es", s.n_non_es},
                {"n_es", s.n_es},
                {"n_covariates", s.n_covariates},
                {"lag_window", s.lag_window ? json(*s.lag_window) : json(nullptr)},
                {"same_period", s.same_period},
                {"fit_period_zero", s.fit_period_zero},
                {"include_policy", s.include_policy},
                {"n_channels", s.n_channels},
                {"n_product_groups", s.n_product_groups},
                {"outcome_sd", s.outcome_sd},
                {"non_es_sd", s.non_es_sd},
                {"es_sd", s.es_sd},
                {"initial_sd", s.initial_sd},
                {"initial_mean", s.initial_mean},
                {"covariate_mean", s.covariate_mean},
                {"covariate_sd", s.covariate_sd},
                {"spectral_cap", s.spectral_cap},
                {"persistence", s.persistence},
                {"cross_sd", s.cross_sd},
                {"lag_decay", s.lag_decay},
                {"time_jitter", s.time_jitter},
                {"coef_sd", s.coef_sd},
                {"delta_mean", s.delta_mean},
                {"gamma_mean", s.gamma_mean},
                {"es_intercept", s.es_intercept},
                {"ridge_lambda", s.ridge_lambda},
                {"seed", s.seed}};
    if (s.truth) doc["truth"] = artifact_to_json(*s.truth);
    return doc;
}

ModelConfig synth_config(const SynthSpec& spec) {
    json doc;
    json vars = json::array();
    auto add = [&](const std::string& prefix, int count, const char* role) {
        for (int i = 0; i < count; ++i) vars.push_back({{"name", prefix + std::to_string(i)}, {"role", role}});
    };
    add("y", spec.n_outcomes, "outcome");
    add("s", spec.n_non_es, "surrogate_non_es");
    add("e", spec.n_es, "es_interaction");
    add("x", spec.n_covariates, "static_covariate");
    if (spec.include_policy) vars.push_back({{"name", "d"}, {"role", "policy"}});
    doc["variables"] = vars;

    json groups = json::array();
    for (int k = 0; k < spec.n_channels; ++k) {
        std::vector<std::string> members;
        for (int j = k; j < spec.n_es; j += spec.n_channels) members.push_back("e" + std::to_string(j));
        if (!members.empty()) groups.push_back({{"name", "channel" + std::to_string(k)}, {"kind", "channel"}, {"members", members}});
    }
    for (int k = 0; k < spec.n_product_groups; ++k) {
        std::vector<std::string> members;
        for (int j = k; j < spec.n_outcomes; j += spec.n_product_groups) members.push_back("y" + std::to_string(j));
        if (!members.empty()) groups.push_back({{"name", "product" + std::to_string(k)}, {"kind", "product"}, {"members", members}});
    }
    if (spec.n_es > 0) {
        std::vector<std::string> members;
        for (int j = 0; j < spec.n_es; ++j) members.push_back("e" + std::to_string(j));
        groups.push_back({{"name", "es_all"}, {"kind", "feature"}, {"members", members}});
    }
    doc["groups"] = groups;
    doc["n_periods"] = spec.n_periods;
    doc["lag_window"] = spec.lag_window ? json(*spec.lag_window) : json(nullptr);
    doc["same_period_enabled"] = spec.same_period;

    json lagged = json::array();
    if (spec.n_non_es > 0) lagged.push_back("surrogate_non_es");
    if (spec.n_es > 0) lagged.push_back("es_interaction");
    json mediated = json::array({"outcome"});
    if (spec.n_non_es > 0) mediated.push_back("surrogate_non_es");
    json blocks = json::array();
    json first = {{"targets", mediated}, {"lagged", lagged}, {"covariates", true}, {"policy", spec.include_policy}};
    if (spec.same_period && spec.n_es > 0) first["same_period"] = json::array({"es_interaction"});
    blocks.push_back(first);
    if (spec.n_es > 0) {
        blocks.push_back({{"targets", json::array({"es_interaction"})},
                          {"lagged", lagged},
                          {"covariates", true},
                          {"policy", spec.include_policy}});
    }
    doc["regression_blocks"] = blocks;
    doc["ridge_lambda"] = spec.ridge_lambda;
    doc["fit_period_zero"] = spec.fit_period_zero;
    return config_from_json(doc);
}

double transition_spectral_radius(const CoefficientSet& truth) {
    const ModelConfig& cfg = truth.config();
    std::vector<int> surrogates;
    for (int v : cfg.evaluation_order()) {
        if (cfg.variables[static_cast<std::size_t>(v)].role != Role::Outcome) surrogates.push_back(v);
    }
    const auto m = static_cast<Eigen::Index>(surrogates.size());
    if (m == 0) return 0.0;
    auto pos = [&](int v) -> Eigen::Index {
        for (Eigen::Index i = 0; i < m; ++i) {
            if (surrogates[static_cast<std::size_t>(i)] == v) return i;
        }
        return -1;
    };
    double radius = 0.0;
    for (int t = 1; t < cfg.n_periods; ++t) {
        const int depth = t - cfg.first_lag_period(t);
        if (depth <= 0) continue;
        // rows in evaluation order so same-period sources are already folded
        Eigen::MatrixXd lag = Eigen::MatrixXd::Zero(m, m * depth);
        for (Eigen::Index i = 0; i < m; ++i) {
            const Equation* eq = truth.find(surrogates[static_cast<std::size_t>(i)], t);
            if (!eq) continue;
            for (std::size_t j = 0; j < eq->columns.size(); ++j) {
                const Column& c = eq->columns[j];
                if (c.kind == ColumnKind::Lag) {
                    const Eigen::Index src = pos(c.variable);
                    if (src >= 0) lag(i, (t - c.period - 1) * m + src) += eq->coefficients[j];
                } else if (c.kind == ColumnKind::SamePeriod) {
                    const Eigen::Index src = pos(c.variable);
                    if (src >= 0) lag.row(i) += eq->coefficients[j] * lag.row(src);
                }
            }
        }
        Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(m * depth, m * depth);
        companion.topRows(m) = lag;
        if (depth > 1) companion.bottomLeftCorner(m * (depth - 1), m * (depth - 1)).setIdentity();
        Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
        radius = std::max(radius, solver.eigenvalues().cwiseAbs().maxCoeff());
    }
    return radius;
}

CoefficientSet draw_truth(const SynthSpec& spec, const ModelConfig& config) {
    auto eng = make_engine(spec.seed, 1);
    std::normal_distribution<double> z(0.0, 1.0);
    CoefficientSet truth(config);
    const int first = config.fit_period_zero ? 0 : 1;
    for (int v : config.dynamic_indices()) {
        const Role role = config.variables[static_cast<std::size_t>(v)].role;
        for (int t = first; t < config.n_periods; ++t) {
            Equation eq;
            eq.target = v;
            eq.period = t;
            eq.columns = design_columns(config, v, t);
            eq.diagnostics = truth_diagnostics();
            for (const Column& c : eq.columns) {
                double coef = 0.0;
                switch (c.kind) {
                    case ColumnKind::Lag: {
                        const int k = t - c.period;
                        const double base = c.variable == v ? spec.persistence : spec.cross_sd * z(eng);
                        coef = base * std::pow(spec.lag_decay, k - 1) * (1.0 + spec.time_jitter * z(eng));
                        break;
                    }
                    case ColumnKind::SamePeriod: {
                        const double mean = role == Role::Outcome ? spec.delta_mean : spec.gamma_mean;
                        coef = std::abs(mean * (1.0 + spec.time_jitter * z(eng)));
                        break;
                    }
                    case ColumnKind::Intercept:
                        coef = role == Role::EsInteraction ? spec.es_intercept + 0.1 * spec.coef_sd * z(eng)
                                                           : spec.coef_sd * z(eng);
                        break;
                    case ColumnKind::Covariate:
                    case ColumnKind::Policy: coef = spec.coef_sd * z(eng); break;
                }
                eq.coefficients.push_back(coef);
            }
            truth.add(std::move(eq));
        }
    }
    for (int guard = 0; transition_spectral_radius(truth) >= spec.spectral_cap; ++guard) {
        if (guard > 1000) throw Error(ErrorKind::UnstableSpec, "could not rescale the random truth below the spectral cap");
        scale_lags(truth, 0.9);
    }
    return truth;
}

SynthData generate_panel(const SynthSpec& spec) {
    SynthData out;
    if (spec.truth) {
        out.truth = *spec.truth;
        out.config = out.truth.config();
        const double radius = transition_spectral_radius(out.truth);
        if (radius >= spec.spectral_cap) {
            throw Error(ErrorKind::UnstableSpec, "transition spectral radius " + std::to_string(radius) +
                                                     " exceeds the cap " + std::to_string(spec.spectral_cap));
        }
    } else {
        out.config = synth_config(spec);
        out.truth = draw_truth(spec, out.config);
    }
    const ModelConfig& cfg = out.config;
    std::vector<std::string> ids;
    for (int c = 0; c < spec.n_customers; ++c) ids.push_back("c" + std::to_string(c));
    out.panel = PanelTensor(cfg.variables, cfg.n_periods, ids);

    const NaiveModel model = naive_model(out.truth);
    auto eng = make_engine(spec.seed, 2);
    std::normal_distribution<double> z(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    auto role_sd = [&](Role r) {
        if (r == Role::Outcome) return spec.outcome_sd;
        if (r == Role::SurrogateNonEs) return spec.non_es_sd;
        return spec.es_sd;
    };
    const std::size_t nv = cfg.variables.size();
    for (std::size_t c = 0; c < ids.size(); ++c) {
        std::vector<double> statics(nv, 0.0);
        std::vector<double> initial(nv, 0.0);
        for (std::size_t v = 0; v < nv; ++v) {
            const Role r = cfg.variables[v].role;
            if (r == Role::StaticCovariate) statics[v] = spec.covariate_mean + spec.covariate_sd * z(eng);
            else if (r == Role::Policy) statics[v] = coin(eng) ? 1.0 : 0.0;
        }
        for (std::size_t v = 0; v < nv; ++v) {
            if (is_dynamic(cfg.variables[v].role)) initial[v] = spec.initial_mean + spec.initial_sd * z(eng);
        }
        auto noise = [&](int v, int t) {
            const double sd = t == 0 ? spec.initial_sd : role_sd(cfg.variables[static_cast<std::size_t>(v)].role);
            return sd == 0.0 ? 0.0 : sd * z(eng);
        };
        const auto table = naive_path(model, statics, initial, nullptr, noise);
        for (std::size_t v = 0; v < nv; ++v) {
            if (!is_dynamic(cfg.variables[v].role)) {
                out.panel.set_static(c, static_cast<int>(v), statics[v]);
                continue;
            }
            for (int t = 0; t < cfg.n_periods; ++t) {
                out.panel.set_value(c, t, static_cast<int>(v), table[static_cast<std::size_t>(t)][v]);
            }
        }
    }
    return out;
}

double oracle_score(const CoefficientSet& truth, const PanelTensor& panel, const ShockSpec& shock) {
    const ModelConfig& cfg = truth.config();
    check_panel_matches(panel, cfg);
    validate_shock(shock, cfg);
    const NaiveModel model = naive_model(truth);
    const std::size_t nv = cfg.variables.size();
    auto no_noise = [](int, int) { return 0.0; };
    double total = 0.0;
    for (std::size_t c = 0; c < panel.n_customers(); ++c) {
        std::vector<double> statics(nv, 0.0);
        std::vector<double> initial(nv, 0.0);
        for (std::size_t v = 0; v < nv; ++v) {
            statics[v] = panel.value(c, 0, static_cast<int>(v));
            initial[v] = panel.value(c, 0, static_cast<int>(v));
        }
        const auto factual = naive_path(model, statics, initial, nullptr, no_noise);
        const auto shocked = naive_path(model, statics, initial, &shock, no_noise);
        for (int t = 0; t < cfg.n_periods; ++t) {
            for (std::size_t v = 0; v < nv; ++v) {
                if (cfg.variables[v].role != Role::Outcome) continue;
                total += factual[static_cast<std::size_t>(t)][v] - shocked[static_cast<std::size_t>(t)][v];
            }
        }
    }
    return total;
}

}  // namespace dcm
