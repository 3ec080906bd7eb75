#include "dcm/config.hpp"

#include <cmath>
#include <queue>
#include <set>
#include <tuple>

#include "dcm/error.hpp"
#include "dcm/hash.hpp"

namespace dcm {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                         std::string_view where) {
    if (!obj.is_object()) throw Error(ErrorKind::ParseError, std::string(where) + " must be an object");
    for (const auto& [key, _] : obj.items()) {
        bool known = false;
        for (auto a : allowed) known = known || key == a;
        if (!known) {
            throw Error(ErrorKind::ParseError,
                        "unknown key '" + key + "' in " + std::string(where));
        }
    }
}

template <typename T>
T get_field(const json& obj, const char* key, std::string_view where) {
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError,
                    std::string(where) + "." + key + ": " + e.what());
    }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback, std::string_view where) {
    if (!obj.contains(key)) return fallback;
    return get_field<T>(obj, key, where);
}

int role_rank(Role role) {
    switch (role) {
        case Role::EsInteraction: return 0;
        case Role::SurrogateNonEs: return 1;
        case Role::Outcome: return 2;
        default: return 3;
    }
}

std::vector<Role> parse_roles(const json& arr, std::string_view where) {
    if (!arr.is_array()) throw Error(ErrorKind::ParseError, std::string(where) + " must be an array");
    std::vector<Role> roles;
    for (const auto& r : arr) {
        if (!r.is_string()) throw Error(ErrorKind::ParseError, std::string(where) + " entries must be strings");
        roles.push_back(parse_role(r.get<std::string>()));
    }
    return roles;
}

json roles_to_json(const std::vector<Role>& roles) {
    json arr = json::array();
    for (Role r : roles) arr.push_back(std::string(to_string(r)));
    return arr;
}

bool contains_role(const std::vector<Role>& roles, Role role) {
    return std::find(roles.begin(), roles.end(), role) != roles.end();
}

std::vector<RegressionBlock> default_blocks(bool same_period) {
    const std::vector<Role> lagged{Role::SurrogateNonEs, Role::EsInteraction};
    if (!same_period) {
        return {RegressionBlock{{Role::Outcome, Role::SurrogateNonEs, Role::EsInteraction}, lagged, {}, true, false}};
    }
    return {
        RegressionBlock{{Role::Outcome, Role::SurrogateNonEs}, lagged, {Role::EsInteraction}, true, false},
        RegressionBlock{{Role::EsInteraction}, lagged, {}, true, false},
    };
}

std::vector<std::pair<int, int>> block_edges(const ModelConfig& config) {
    std::vector<std::pair<int, int>> edges;
    for (int v : config.dynamic_indices()) {
        const auto& block = config.block_for(config.variables[v].role);
        for (int u = 0; u < static_cast<int>(config.n_variables()); ++u) {
            if (contains_role(block.same_period, config.variables[u].role)) edges.emplace_back(u, v);
        }
    }
    return edges;
}

std::vector<std::pair<int, int>> explicit_edges(const ModelConfig& config) {
    std::vector<std::pair<int, int>> edges;
    if (!config.same_period_edges) return edges;
    for (const auto& e : *config.same_period_edges) {
        edges.emplace_back(config.variable_index(e.from), config.variable_index(e.to));
    }
    return edges;
}

void check_edges(const ModelConfig& config, const std::vector<std::pair<int, int>>& edges) {
    const bool generalized = !config.same_period_order.empty();
    auto order_pos = [&](int v) -> std::ptrdiff_t {
        auto it = std::find(config.same_period_order.begin(), config.same_period_order.end(),
                            config.variables[v].name);
        return it == config.same_period_order.end() ? -1 : it - config.same_period_order.begin();
    };
    for (auto [u, v] : edges) {
        const auto& src = config.variables[u];
        const auto& dst = config.variables[v];
        const std::string name = src.name + " -> " + dst.name;
        auto fail = [&](const std::string& why) {
            throw Error(ErrorKind::ConstraintViolation, "within-period edge " + name + ": " + why);
        };
        if (!config.same_period_enabled) fail("same-period effects are disabled");
        if (!is_dynamic(src.role) || !is_dynamic(dst.role)) fail("endpoints must be outcomes or surrogates");
        if (src.role == Role::Outcome) fail("outcomes cannot cause other variables");
        if (!generalized) {
            if (src.role != Role::EsInteraction) fail("only ES interactions may act within a period");
            if (dst.role == Role::EsInteraction) fail("ES interactions cannot cause ES interactions within a period");
        } else {
            auto pu = order_pos(u);
            auto pv = order_pos(v);
            if (pu < 0 || pv < 0) fail("endpoint missing from same_period_order");
            if (pu >= pv) fail("edge runs against the declared same_period_order");
        }
    }
}

void validate_config(const ModelConfig& c) {
    if (c.variables.empty()) throw Error(ErrorKind::InvalidConfig, "no variables declared");
    std::set<std::string> names;
    int n_policy = 0;
    for (const auto& v : c.variables) {
        if (v.name.empty() || v.name == "customer_id" || v.name == "period") {
            throw Error(ErrorKind::InvalidConfig, "invalid variable name '" + v.name + "'");
        }
        if (v.name.find_first_of(",\"\n\r") != std::string::npos) {
            throw Error(ErrorKind::InvalidConfig, "variable name '" + v.name + "' contains a reserved character");
        }
        if (!names.insert(v.name).second) throw Error(ErrorKind::InvalidConfig, "duplicate variable '" + v.name + "'");
        if (v.role == Role::Policy) ++n_policy;
    }
    if (n_policy > 1) throw Error(ErrorKind::InvalidConfig, "at most one policy variable is supported");
    if (c.dynamic_indices().empty()) throw Error(ErrorKind::InvalidConfig, "no outcome or surrogate variables");
    if (c.n_periods < 1) throw Error(ErrorKind::InvalidConfig, "n_periods must be >= 1");
    if (c.lag_window && *c.lag_window < 1) throw Error(ErrorKind::InvalidConfig, "lag_window must be >= 1");
    if (!(c.ridge_lambda >= 0.0) || !std::isfinite(c.ridge_lambda)) {
        throw Error(ErrorKind::InvalidConfig, "ridge_lambda must be finite and non-negative");
    }
    if (c.pooled && !c.lag_window) throw Error(ErrorKind::InvalidConfig, "pooled mode requires a finite lag_window");

    std::set<std::string> group_names;
    for (const auto& g : c.groups) {
        if (g.name.empty() || names.count(g.name)) {
            throw Error(ErrorKind::InvalidConfig, "group name '" + g.name + "' is empty or clashes with a variable");
        }
        if (!group_names.insert(g.name).second) throw Error(ErrorKind::InvalidConfig, "duplicate group '" + g.name + "'");
        std::set<std::string> seen;
        for (const auto& m : g.members) {
            if (!names.count(m)) {
                throw Error(ErrorKind::GroupReferencesUnknownVariable,
                            "group '" + g.name + "' references unknown variable '" + m + "'");
            }
            if (!seen.insert(m).second) {
                throw Error(ErrorKind::InvalidConfig, "group '" + g.name + "' lists '" + m + "' twice");
            }
        }
    }

    for (const auto& b : c.regression_blocks) {
        for (Role r : b.targets) {
            if (!is_dynamic(r)) throw Error(ErrorKind::InvalidConfig, "regression block targets must be dynamic roles");
        }
        for (Role r : b.lagged) {
            if (r != Role::SurrogateNonEs && r != Role::EsInteraction) {
                throw Error(ErrorKind::InvalidConfig,
                            "lagged regressors must be surrogate roles, got " + std::string(to_string(r)));
            }
        }
        for (Role r : b.same_period) {
            if (r == Role::Outcome) {
                throw Error(ErrorKind::ConstraintViolation, "outcomes cannot act within a period");
            }
            if (r != Role::SurrogateNonEs && r != Role::EsInteraction) {
                throw Error(ErrorKind::InvalidConfig,
                            "same-period regressors must be surrogate roles, got " + std::string(to_string(r)));
            }
        }
        if (b.policy && !c.policy_index()) throw Error(ErrorKind::InvalidConfig, "block requests policy but none declared");
        if (!b.same_period.empty() && !c.same_period_enabled) {
            throw Error(ErrorKind::ConstraintViolation,
                        "regression block lists same-period regressors while same_period_enabled is false");
        }
    }
    for (Role r : {Role::Outcome, Role::SurrogateNonEs, Role::EsInteraction}) {
        int matches = 0;
        for (const auto& b : c.regression_blocks) matches += contains_role(b.targets, r) ? 1 : 0;
        const bool present = !c.indices_with_role(r).empty();
        if (matches > 1 || (present && matches == 0)) {
            throw Error(ErrorKind::InvalidConfig, "exactly one regression block must match role " +
                                                      std::string(to_string(r)));
        }
    }

    std::set<std::string> order_seen;
    for (const auto& n : c.same_period_order) {
        auto idx = c.find_variable(n);
        if (!idx || !is_dynamic(c.variables[*idx].role)) {
            throw Error(ErrorKind::InvalidConfig, "same_period_order entry '" + n + "' is not a dynamic variable");
        }
        if (!order_seen.insert(n).second) throw Error(ErrorKind::InvalidConfig, "same_period_order repeats '" + n + "'");
    }
    if (!c.same_period_order.empty() && !c.same_period_enabled) {
        throw Error(ErrorKind::InvalidConfig, "same_period_order given while same_period_enabled is false");
    }
    validate_within_period_dag(c);
    (void)c.evaluation_order();
}

}  // namespace

std::string_view to_string(Role role) noexcept {
    switch (role) {
        case Role::Outcome: return "outcome";
        case Role::SurrogateNonEs: return "surrogate_non_es";
        case Role::EsInteraction: return "es_interaction";
        case Role::StaticCovariate: return "static_covariate";
        case Role::Policy: return "policy";
    }
    return "unknown";
}

Role parse_role(std::string_view text) {
    for (Role r : {Role::Outcome, Role::SurrogateNonEs, Role::EsInteraction, Role::StaticCovariate, Role::Policy}) {
        if (text == to_string(r)) return r;
    }
    throw Error(ErrorKind::UnknownRole, "unknown role '" + std::string(text) + "'");
}

std::optional<int> ModelConfig::find_variable(std::string_view name) const {
    for (std::size_t i = 0; i < variables.size(); ++i) {
        if (variables[i].name == name) return static_cast<int>(i);
    }
    return std::nullopt;
}

int ModelConfig::variable_index(std::string_view name) const {
    if (auto i = find_variable(name)) return *i;
    throw Error(ErrorKind::UnknownVariable, "unknown variable '" + std::string(name) + "'");
}

std::vector<int> ModelConfig::indices_with_role(Role role) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < variables.size(); ++i) {
        if (variables[i].role == role) out.push_back(static_cast<int>(i));
    }
    return out;
}

std::vector<int> ModelConfig::dynamic_indices() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < variables.size(); ++i) {
        if (is_dynamic(variables[i].role)) out.push_back(static_cast<int>(i));
    }
    return out;
}

std::optional<int> ModelConfig::policy_index() const {
    auto p = indices_with_role(Role::Policy);
    if (p.empty()) return std::nullopt;
    return p.front();
}

const Group* ModelConfig::find_group(std::string_view name) const {
    for (const auto& g : groups) {
        if (g.name == name) return &g;
    }
    return nullptr;
}

std::vector<int> ModelConfig::resolve_target(std::string_view name) const {
    if (auto v = find_variable(name)) return {*v};
    if (const Group* g = find_group(name)) {
        std::vector<int> out;
        for (const auto& m : g->members) out.push_back(variable_index(m));
        return out;
    }
    throw Error(ErrorKind::UnknownVariable, "'" + std::string(name) + "' is neither a variable nor a group");
}

const RegressionBlock& ModelConfig::block_for(Role role) const {
    for (const auto& b : regression_blocks) {
        if (contains_role(b.targets, role)) return b;
    }
    throw Error(ErrorKind::InvalidConfig, "no regression block for role " + std::string(to_string(role)));
}

std::vector<std::pair<int, int>> ModelConfig::within_period_edges() const {
    if (!same_period_enabled) return {};
    auto edges = same_period_edges ? explicit_edges(*this) : block_edges(*this);
    std::sort(edges.begin(), edges.end(), [](auto a, auto b) { return std::tie(a.second, a.first) < std::tie(b.second, b.first); });
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

std::vector<int> ModelConfig::same_period_sources(int target) const {
    std::vector<int> out;
    for (auto [u, v] : within_period_edges()) {
        if (v == target) out.push_back(u);
    }
    return out;
}

std::vector<int> ModelConfig::evaluation_order() const {
    const auto dyn = dynamic_indices();
    const auto edges = within_period_edges();
    std::vector<int> indegree(variables.size(), 0);
    for (auto [u, v] : edges) ++indegree[v];
    auto key = [&](int v) { return std::make_pair(role_rank(variables[v].role), v); };
    auto cmp = [&](int a, int b) { return key(a) > key(b); };
    std::priority_queue<int, std::vector<int>, decltype(cmp)> ready(cmp);
    for (int v : dyn) {
        if (indegree[v] == 0) ready.push(v);
    }
    std::vector<int> order;
    while (!ready.empty()) {
        int v = ready.top();
        ready.pop();
        order.push_back(v);
        for (auto [a, b] : edges) {
            if (a == v && --indegree[b] == 0) ready.push(b);
        }
    }
    if (order.size() != dyn.size()) throw Error(ErrorKind::ConstraintViolation, "within-period edges contain a cycle");
    return order;
}

void validate_within_period_dag(const ModelConfig& config) {
    if (config.same_period_edges) check_edges(config, explicit_edges(config));
    check_edges(config, block_edges(config));
}

ModelConfig config_from_json(const json& doc) {
    reject_unknown_keys(doc,
                        {"variables", "groups", "n_periods", "lag_window", "same_period_enabled",
                         "regression_blocks", "same_period_edges", "same_period_order", "ridge_lambda",
                         "fit_period_zero", "pooled", "allow_outcome_shocks"},
                        "config");
    ModelConfig c;
    const json& vars = doc.contains("variables") ? doc.at("variables") : json();
    if (!vars.is_array()) throw Error(ErrorKind::ParseError, "config.variables must be an array");
    for (const auto& v : vars) {
        reject_unknown_keys(v, {"name", "role"}, "variable");
        c.variables.push_back({get_field<std::string>(v, "name", "variable"),
                               parse_role(get_field<std::string>(v, "role", "variable"))});
    }
    if (doc.contains("groups")) {
        if (!doc.at("groups").is_array()) throw Error(ErrorKind::ParseError, "config.groups must be an array");
        for (const auto& g : doc.at("groups")) {
            reject_unknown_keys(g, {"name", "kind", "members"}, "group");
            c.groups.push_back({get_field<std::string>(g, "name", "group"), get_or<std::string>(g, "kind", "", "group"),
                                get_field<std::vector<std::string>>(g, "members", "group")});
        }
    }
    c.n_periods = get_field<int>(doc, "n_periods", "config");
    if (doc.contains("lag_window")) {
        const json& lw = doc.at("lag_window");
        if (lw.is_null() || (lw.is_string() && lw.get<std::string>() == "inf")) {
            c.lag_window.reset();
        } else if (lw.is_number_integer()) {
            c.lag_window = lw.get<int>();
        } else {
            throw Error(ErrorKind::ParseError, "config.lag_window must be an integer, null or \"inf\"");
        }
    }
    c.same_period_enabled = get_or<bool>(doc, "same_period_enabled", false, "config");
    c.ridge_lambda = get_or<double>(doc, "ridge_lambda", 1e-6, "config");
    c.fit_period_zero = get_or<bool>(doc, "fit_period_zero", true, "config");
    c.pooled = get_or<bool>(doc, "pooled", false, "config");
    c.allow_outcome_shocks = get_or<bool>(doc, "allow_outcome_shocks", true, "config");
    if (doc.contains("regression_blocks")) {
        const json& blocks = doc.at("regression_blocks");
        if (!blocks.is_array()) throw Error(ErrorKind::ParseError, "config.regression_blocks must be an array");
        for (const auto& b : blocks) {
            reject_unknown_keys(b, {"targets", "lagged", "same_period", "covariates", "policy"}, "regression block");
            RegressionBlock block;
            block.targets = parse_roles(b.at("targets"), "regression block targets");
            block.lagged = b.contains("lagged") ? parse_roles(b.at("lagged"), "regression block lagged")
                                                : std::vector<Role>{Role::SurrogateNonEs, Role::EsInteraction};
            if (b.contains("same_period")) block.same_period = parse_roles(b.at("same_period"), "regression block same_period");
            block.covariates = get_or<bool>(b, "covariates", true, "regression block");
            block.policy = get_or<bool>(b, "policy", false, "regression block");
            c.regression_blocks.push_back(std::move(block));
        }
    } else {
        c.regression_blocks = default_blocks(c.same_period_enabled);
    }
    if (doc.contains("same_period_edges")) {
        std::vector<SamePeriodEdge> edges;
        for (const auto& e : doc.at("same_period_edges")) {
            reject_unknown_keys(e, {"from", "to"}, "same-period edge");
            edges.push_back({get_field<std::string>(e, "from", "edge"), get_field<std::string>(e, "to", "edge")});
        }
        c.same_period_edges = std::move(edges);
    }
    if (doc.contains("same_period_order")) {
        c.same_period_order = get_field<std::vector<std::string>>(doc, "same_period_order", "config");
    }
    validate_config(c);
    return c;
}

ModelConfig parse_config(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::ParseError, std::string("config: ") + e.what());
    }
    return config_from_json(doc);
}

json config_to_json(const ModelConfig& c) {
    json doc;
    doc["variables"] = json::array();
    for (const auto& v : c.variables) doc["variables"].push_back({{"name", v.name}, {"role", to_string(v.role)}});
    doc["groups"] = json::array();
    for (const auto& g : c.groups) doc["groups"].push_back({{"name", g.name}, {"kind", g.kind}, {"members", g.members}});
    doc["n_periods"] = c.n_periods;
    doc["lag_window"] = c.lag_window ? json(*c.lag_window) : json(nullptr);
    doc["same_period_enabled"] = c.same_period_enabled;
    doc["regression_blocks"] = json::array();
    for (const auto& b : c.regression_blocks) {
        doc["regression_blocks"].push_back({{"targets", roles_to_json(b.targets)},
                                            {"lagged", roles_to_json(b.lagged)},
                                            {"same_period", roles_to_json(b.same_period)},
                                            {"covariates", b.covariates},
                                            {"policy", b.policy}});
    }
    if (c.same_period_edges) {
        json edges = json::array();
        for (const auto& e : *c.same_period_edges) edges.push_back({{"from", e.from}, {"to", e.to}});
        doc["same_period_edges"] = edges;
    }
    if (!c.same_period_order.empty()) doc["same_period_order"] = c.same_period_order;
    doc["ridge_lambda"] = c.ridge_lambda;
    doc["fit_period_zero"] = c.fit_period_zero;
    doc["pooled"] = c.pooled;
    doc["allow_outcome_shocks"] = c.allow_outcome_shocks;
    return doc;
}

std::string serialize_config(const ModelConfig& config) { return config_to_json(config).dump(); }

std::string config_hash(const ModelConfig& config) { return sha256_hex(serialize_config(config)); }

// ---------------------------------------------------------------------------
// Shocks

std::string_view to_string(ShockMode mode) noexcept {
    switch (mode) {
        case ShockMode::Scale: return "scale";
        case ShockMode::Set: return "set";
        case ShockMode::Add: return "add";
    }
    return "unknown";
}

double apply_shock(ShockMode mode, double value, double current) noexcept {
    switch (mode) {
        case ShockMode::Scale: return current * value;
        case ShockMode::Set: return value;
        case ShockMode::Add: return current + value;
    }
    return current;
}

void validate_shock(const ShockSpec& shock, const ModelConfig& config) {
    for (const auto& e : shock.entries) {
        const auto vars = config.resolve_target(e.target);
        if (e.first_period < 0 || e.last_period >= config.n_periods || e.first_period > e.last_period) {
            throw Error(ErrorKind::InvalidShock, "shock on '" + e.target + "' has periods [" +
                                                     std::to_string(e.first_period) + ", " +
                                                     std::to_string(e.last_period) + "] outside [0, " +
                                                     std::to_string(config.n_periods - 1) + "]");
        }
        if (!std::isfinite(e.value)) throw Error(ErrorKind::InvalidShock, "shock on '" + e.target + "' has a non-finite value");
        for (int v : vars) {
            const auto& var = config.variables[v];
            if (var.role == Role::StaticCovariate) {
                throw Error(ErrorKind::InvalidShock, "static covariate '" + var.name + "' cannot be shocked");
            }
            if (var.role == Role::Outcome && !config.allow_outcome_shocks) {
                throw Error(ErrorKind::ShockOnOutcome, "config forbids shocking outcome '" + var.name + "'");
            }
        }
    }
}

std::vector<int> shocked_variables(const ShockSpec& shock, const ModelConfig& config) {
    std::vector<int> out;
    for (const auto& e : shock.entries) {
        auto vars = config.resolve_target(e.target);
        out.insert(out.end(), vars.begin(), vars.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

ShockSpec shock_from_json(const json& doc, const ModelConfig& config) {
    reject_unknown_keys(doc, {"label", "entries"}, "shock");
    ShockSpec shock;
    if (!doc.contains("entries") || !doc.at("entries").is_array()) {
        throw Error(ErrorKind::ParseError, "shock.entries must be an array");
    }
    std::string derived;
    for (const auto& e : doc.at("entries")) {
        reject_unknown_keys(e, {"target", "periods", "period", "mode", "value"}, "shock entry");
        ShockEntry entry;
        entry.target = get_field<std::string>(e, "target", "shock entry");
        entry.first_period = 0;
        entry.last_period = config.n_periods - 1;
        if (e.contains("period")) {
            entry.first_period = entry.last_period = get_field<int>(e, "period", "shock entry");
        } else if (e.contains("periods")) {
            const json& p = e.at("periods");
            if (p.is_string() && p.get<std::string>() == "all") {
                // defaults already cover every period
            } else if (p.is_array() && p.size() == 2 && p[0].is_number_integer() && p[1].is_number_integer()) {
                entry.first_period = p[0].get<int>();
                entry.last_period = p[1].get<int>();
            } else {
                throw Error(ErrorKind::ParseError, "shock entry periods must be [first, last] or \"all\"");
            }
        }
        const auto mode = get_field<std::string>(e, "mode", "shock entry");
        if (mode == "scale") {
            entry.mode = ShockMode::Scale;
        } else if (mode == "set") {
            entry.mode = ShockMode::Set;
        } else if (mode == "add") {
            entry.mode = ShockMode::Add;
        } else {
            throw Error(ErrorKind::ParseError, "unknown shock mode '" + mode + "'");
        }
        entry.value = get_or<double>(e, "value", 0.0, "shock entry");
        if (!derived.empty()) derived += "+";
        derived += entry.target + ":" +
                   (entry.mode == ShockMode::Set && entry.value == 0.0 ? std::string("off") : mode);
        shock.entries.push_back(std::move(entry));
    }
    shock.label = get_or<std::string>(doc, "label", derived.empty() ? std::string("none") : derived, "shock");
    validate_shock(shock, config);
    return shock;
}

json shock_to_json(const ShockSpec& shock) {
    json doc;
    doc["label"] = shock.label;
    doc["entries"] = json::array();
    for (const auto& e : shock.entries) {
        doc["entries"].push_back({{"target", e.target},
                                  {"periods", {e.first_period, e.last_period}},
                                  {"mode", to_string(e.mode)},
                                  {"value", e.value}});
    }
    return doc;
}

std::vector<json> scenario_documents(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::ParseError, std::string("shock file: ") + e.what());
    }
    if (doc.is_object() && doc.contains("scenarios")) {
        reject_unknown_keys(doc, {"scenarios"}, "shock file");
        doc = doc.at("scenarios");
        if (!doc.is_array()) throw Error(ErrorKind::ParseError, "shock file: scenarios must be an array");
    }
    if (doc.is_array()) return doc.get<std::vector<json>>();
    return {doc};
}

std::vector<ShockSpec> parse_shocks(std::string_view text, const ModelConfig& config) {
    std::vector<ShockSpec> out;
    for (const auto& s : scenario_documents(text)) out.push_back(shock_from_json(s, config));
    return out;
}

}  // namespace dcm
