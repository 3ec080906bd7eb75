#include "dcm/pipeline.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include "dcm/bootstrap.hpp"
#include "dcm/config.hpp"
#include "dcm/estimator.hpp"
#include "dcm/hash.hpp"
#include "dcm/panel.hpp"
#include "dcm/report.hpp"
#include "dcm/scorer.hpp"
#include "dcm/shapley.hpp"
#include "dcm/synth.hpp"

namespace dcm {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::ConfigMismatch: return kExitConfigMismatch;
        case ErrorKind::EmptyDesign:
        case ErrorKind::SingularSystem:
        case ErrorKind::InsufficientRows:
        case ErrorKind::UnstableSpec:
        case ErrorKind::ReplicateFailed:
        case ErrorKind::OrderViolation: return kExitNumerical;
        default: return kExitInput;
    }
}

namespace {

struct Options {
    std::string config;
    std::string panel;
    std::string model;
    std::string shock;
    std::string players;
    std::string spec;
    std::string out;
    std::string truth;
    std::string config_out;
    std::string results;
    std::string groups;
    std::string denominator = "grand";
    std::string mode = "deterministic";
    std::string out_dir = ".";
    int replicates = 200;
    double level = 0.95;
    std::uint64_t seed = 0;
    int permutations = 0;
};

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw Error(ErrorKind::IoError, "write failed for '" + path.string() + "'");
}

class Manifest {
public:
    explicit Manifest(const std::string& command) {
        doc_["command"] = command;
        doc_["versions"] = {{"dcm", kVersion},
                            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                          std::to_string(EIGEN_MINOR_VERSION)},
                            {"cli11", CLI11_VERSION},
                            {"compiler", __VERSION__}};
        doc_["inputs"] = json::object();
        doc_["outputs"] = json::object();
    }

    void input(const std::string& key, const std::string& path) {
        doc_["inputs"][key] = {{"path", path}, {"sha256", sha256_file(path)}};
    }
    void output(const std::string& key, const fs::path& path) {
        doc_["outputs"][key] = {{"path", path.string()}, {"sha256", sha256_file(path)}};
        written_.push_back(path.string());
    }
    json& operator[](const std::string& key) { return doc_[key]; }
    const std::vector<std::string>& written() const noexcept { return written_; }

    void write(const fs::path& dir) const { write_text(dir / "manifest.json", doc_.dump(2) + "\n"); }

private:
    json doc_;
    std::vector<std::string> written_;
};

void write_output(Manifest& manifest, const std::string& key, const fs::path& path, const std::string& text) {
    write_text(path, text);
    manifest.output(key, path);
}

ModelConfig load_config(const Options& o, Manifest& manifest) {
    if (o.config.empty()) throw Error(ErrorKind::InvalidArgument, "--config is required");
    manifest.input("config", o.config);
    ModelConfig cfg = parse_config(read_text(o.config));
    manifest["config_hash"] = config_hash(cfg);
    return cfg;
}

CoefficientSet load_model(const Options& o, Manifest& manifest) {
    if (o.model.empty()) throw Error(ErrorKind::InvalidArgument, "--model is required");
    manifest.input("model", o.model);
    CoefficientSet coeffs = load_artifact(o.model);
    if (!o.config.empty()) {
        manifest.input("config", o.config);
        coeffs.check_config(parse_config(read_text(o.config)));
    }
    manifest["config_hash"] = coeffs.config_hash();
    return coeffs;
}

PanelTensor load_panel(const Options& o, const ModelConfig& cfg, Manifest& manifest) {
    if (o.panel.empty()) throw Error(ErrorKind::InvalidArgument, "--panel is required");
    manifest.input("panel", o.panel);
    return ingest_panel(o.panel, cfg);
}

std::vector<ShockSpec> load_shocks(const Options& o, const ModelConfig& cfg, Manifest& manifest) {
    if (o.shock.empty()) throw Error(ErrorKind::InvalidArgument, "--shock is required");
    manifest.input("shock", o.shock);
    auto shocks = parse_shocks(read_text(o.shock), cfg);
    json labels = json::array();
    for (const auto& s : shocks) labels.push_back(s.label);
    manifest["scenarios"] = labels;
    return shocks;
}

json validation_json(const ValidationReport& rep, const ModelConfig& cfg) {
    json doc;
    doc["constant_columns"] = json::array();
    for (const auto& c : rep.constant_columns) {
        doc["constant_columns"].push_back({{"variable", cfg.variables[static_cast<std::size_t>(c.variable)].name},
                                           {"period", c.period < 0 ? json(nullptr) : json(c.period)}});
    }
    doc["zero_fraction"] = rep.zero_fraction;
    doc["variables"] = json::array();
    for (const auto& v : rep.variables) {
        doc["variables"].push_back({{"name", v.name},
                                    {"min", v.min},
                                    {"max", v.max},
                                    {"mean", v.mean},
                                    {"zero_fraction", v.zero_fraction},
                                    {"constant", v.constant}});
    }
    return doc;
}

int cmd_train(const Options& o, Manifest& manifest) {
    const ModelConfig cfg = load_config(o, manifest);
    const PanelTensor panel = load_panel(o, cfg, manifest);
    const fs::path dir(o.out_dir);
    write_output(manifest, "validation", dir / "validation.json", validation_json(validate_panel(panel), cfg).dump(2) + "\n");
    const CoefficientSet coeffs = fit_dcm(panel, cfg);
    const fs::path model = o.model.empty() ? dir / "model.json" : fs::path(o.model);
    save_artifact(coeffs, model);
    manifest.output("model", model);
    manifest["equations"] = coeffs.equations().size();
    manifest["customers"] = panel.n_customers();
    return kExitOk;
}

int cmd_score(const Options& o, Manifest& manifest) {
    const CoefficientSet coeffs = load_model(o, manifest);
    const PanelTensor panel = load_panel(o, coeffs.config(), manifest);
    const auto shocks = load_shocks(o, coeffs.config(), manifest);
    if (shocks.size() != 1) {
        throw Error(ErrorKind::InvalidArgument, "score takes exactly one scenario (got " + std::to_string(shocks.size()) +
                                                    "); use batch-score");
    }
    const ScoreMode mode = parse_score_mode(o.mode);
    manifest["mode"] = std::string(to_string(mode));
    const auto result = score_counterfactual(coeffs, panel, shocks.front(), mode);
    std::ostringstream csv;
    write_results_csv(csv, {result});
    write_output(manifest, "results", fs::path(o.out_dir) / "results.csv", csv.str());
    manifest["total_delta"] = result.total_delta();
    return kExitOk;
}

int cmd_batch_score(const Options& o, Manifest& manifest) {
    const CoefficientSet coeffs = load_model(o, manifest);
    const PanelTensor panel = load_panel(o, coeffs.config(), manifest);
    if (o.shock.empty()) throw Error(ErrorKind::InvalidArgument, "--shock is required");
    manifest.input("shock", o.shock);
    const ScoreMode mode = parse_score_mode(o.mode);
    manifest["mode"] = std::string(to_string(mode));

    // a malformed scenario fails in its own slot, like a scoring failure
    const auto docs = scenario_documents(read_text(o.shock));
    std::vector<ShockSpec> shocks;
    std::vector<std::size_t> slot;
    std::vector<BatchItem> items(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) {
        try {
            shocks.push_back(shock_from_json(docs[i], coeffs.config()));
            slot.push_back(i);
        } catch (const Error& e) {
            const json& d = docs[i];
            items[i].label = d.is_object() && d.contains("label") && d.at("label").is_string()
                                 ? d.at("label").get<std::string>()
                                 : "scenario#" + std::to_string(i);
            items[i].error_kind = e.kind();
            items[i].error_message = e.what();
        }
    }
    auto scored = batch_score(coeffs, panel, shocks, mode);
    for (std::size_t k = 0; k < scored.size(); ++k) items[slot[k]] = std::move(scored[k]);
    std::vector<CounterfactualResult> ok;
    json errors = json::array();
    json labels = json::array();
    for (const auto& item : items) {
        labels.push_back(item.label);
        if (item.result) {
            ok.push_back(*item.result);
        } else {
            errors.push_back({{"scenario", item.label},
                              {"kind", std::string(to_string(*item.error_kind))},
                              {"message", item.error_message}});
        }
    }
    manifest["scenarios"] = labels;
    std::ostringstream csv;
    write_results_csv(csv, ok);
    write_output(manifest, "results", fs::path(o.out_dir) / "results.csv", csv.str());
    manifest["failed_scenarios"] = errors.size();
    if (!errors.empty()) {
        write_output(manifest, "errors", fs::path(o.out_dir) / "errors.json", errors.dump(2) + "\n");
        return kExitPartial;
    }
    return kExitOk;
}

int cmd_shapley(const Options& o, Manifest& manifest) {
    const CoefficientSet coeffs = load_model(o, manifest);
    const PanelTensor panel = load_panel(o, coeffs.config(), manifest);
    if (o.players.empty()) throw Error(ErrorKind::InvalidArgument, "--players is required");
    manifest.input("players", o.players);
    const PlayerSet players = parse_players(read_text(o.players), coeffs.config());
    CharacteristicCache cache(coeffs, panel, players);
    AttributionResult result;
    if (o.permutations > 0 || players.size() > static_cast<std::size_t>(kExactPlayerLimit)) {
        const int m = o.permutations > 0 ? o.permutations : 1000;
        result = shapley_sampled(players, [&](std::uint64_t mask) { return cache(mask); }, m, o.seed);
        manifest["seed"] = o.seed;
    } else {
        result = shapley_exact(players, cache.all_coalitions());
    }
    const fs::path dir(o.out_dir);
    std::ostringstream phi;
    write_shapley_csv(phi, result);
    write_output(manifest, "shapley", dir / "shapley.csv", phi.str());
    std::ostringstream standalone;
    write_standalone_csv(standalone, result);
    write_output(manifest, "standalone", dir / "standalone.csv", standalone.str());
    std::ostringstream values;
    write_characteristic_csv(values, result);
    write_output(manifest, "characteristic", dir / "characteristic.csv", values.str());
    manifest["method"] = result.method;
    manifest["scorer_runs"] = cache.evaluations();
    manifest["efficiency_gap"] = result.efficiency_gap;
    return kExitOk;
}

int cmd_bootstrap(const Options& o, Manifest& manifest) {
    const ModelConfig cfg = load_config(o, manifest);
    const PanelTensor panel = load_panel(o, cfg, manifest);
    const auto shocks = load_shocks(o, cfg, manifest);
    const ScoreMode mode = parse_score_mode(o.mode);
    manifest["seed"] = o.seed;
    manifest["replicates"] = o.replicates;
    manifest["level"] = o.level;
    manifest["mode"] = std::string(to_string(mode));
    std::vector<BootstrapReport> reports;
    for (const auto& shock : shocks) reports.push_back(bootstrap_value(panel, cfg, shock, o.replicates, o.level, o.seed, mode));
    const fs::path dir(o.out_dir);
    std::ostringstream summary;
    write_bootstrap_csv(summary, reports);
    write_output(manifest, "bootstrap", dir / "bootstrap.csv", summary.str());
    std::ostringstream reps;
    write_replicates_csv(reps, reports);
    write_output(manifest, "replicates", dir / "replicates.csv", reps.str());
    return kExitOk;
}

int cmd_synth(const Options& o, Manifest& manifest) {
    if (o.spec.empty()) throw Error(ErrorKind::InvalidArgument, "--spec is required");
    manifest.input("spec", o.spec);
    const SynthSpec spec = parse_synth_spec(read_text(o.spec));
    const SynthData data = generate_panel(spec);
    const fs::path dir(o.out_dir);
    std::ostringstream panel;
    write_panel(panel, data.panel);
    write_output(manifest, "panel", o.out.empty() ? dir / "panel.csv" : fs::path(o.out), panel.str());
    write_output(manifest, "truth", o.truth.empty() ? dir / "truth.json" : fs::path(o.truth),
                 artifact_to_json(data.truth).dump(1) + "\n");
    write_output(manifest, "config", o.config_out.empty() ? dir / "config.json" : fs::path(o.config_out),
                 config_to_json(data.config).dump(2) + "\n");
    manifest["seed"] = spec.seed;
    manifest["config_hash"] = config_hash(data.config);
    return kExitOk;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

int cmd_report(const Options& o, Manifest& manifest) {
    const ModelConfig cfg = load_config(o, manifest);
    if (!o.model.empty()) load_model(o, manifest);
    if (o.results.empty()) throw Error(ErrorKind::InvalidArgument, "--results is required");
    manifest.input("results", o.results);
    std::istringstream in(read_text(o.results));
    const auto results = read_results_csv(in, cfg);

    std::vector<std::string> groups = split_list(o.groups);
    if (groups.empty()) {
        for (const auto& g : cfg.groups) {
            for (const auto& m : g.members) {
                if (cfg.variables[static_cast<std::size_t>(cfg.variable_index(m))].role == Role::Outcome) {
                    groups.push_back(g.name);
                    break;
                }
            }
        }
        groups.push_back("total");
    }
    ValuationTable table = aggregate_by_group(results, cfg, groups);
    if (o.denominator != "none") {
        double denom = 0.0;
        if (o.denominator == "grand") {
            denom = grand_total(results);
        } else {
            try {
                std::size_t used = 0;
                denom = std::stod(o.denominator, &used);
                if (used != o.denominator.size()) throw std::invalid_argument("trailing characters");
            } catch (const std::exception&) {
                throw Error(ErrorKind::InvalidArgument, "--denominator must be 'grand', 'none' or a number");
            }
        }
        table = normalize_table(table, denom);
        manifest["denominator"] = denom;
    }
    std::ostringstream csv;
    write_valuation_csv(csv, table);
    write_output(manifest, "report", fs::path(o.out_dir) / "report.csv", csv.str());
    manifest["additive"] = table.additive();
    json labels = json::array();
    for (const auto& s : table.scenarios) labels.push_back(s);
    manifest["scenarios"] = labels;
    return kExitOk;
}

json error_json(const std::string& command, const std::string& kind, const std::string& message, int code) {
    return {{"command", command}, {"error", {{"kind", kind}, {"message", message}}}, {"exit_code", code}};
}

}  // namespace

int run_pipeline(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dynamic causal model: train, score and attribute customer-level value", "dcm"};
    app.require_subcommand(1);
    Options o;

    auto add_out_dir = [&](CLI::App* sub) { sub->add_option("--out-dir", o.out_dir, "directory for outputs and manifest"); };
    auto add_mode = [&](CLI::App* sub) {
        sub->add_option("--mode", o.mode, "deterministic | residual-replay")->check(CLI::IsMember({"deterministic", "residual-replay"}));
    };

    CLI::App* train = app.add_subcommand("train", "fit all structural equations from a panel");
    train->add_option("--config", o.config, "model config JSON")->required();
    train->add_option("--panel", o.panel, "panel CSV")->required();
    train->add_option("--model", o.model, "artifact output path (default <out-dir>/model.json)");
    add_out_dir(train);

    CLI::App* score = app.add_subcommand("score", "score one shock scenario");
    score->add_option("--model", o.model, "trained artifact")->required();
    score->add_option("--panel", o.panel, "panel CSV")->required();
    score->add_option("--shock", o.shock, "scenario JSON")->required();
    score->add_option("--config", o.config, "config JSON; must match the artifact");
    add_mode(score);
    add_out_dir(score);

    CLI::App* batch = app.add_subcommand("batch-score", "score a list of scenarios");
    batch->add_option("--model", o.model, "trained artifact")->required();
    batch->add_option("--panel", o.panel, "panel CSV")->required();
    batch->add_option("--shock", o.shock, "scenario list JSON")->required();
    batch->add_option("--config", o.config, "config JSON; must match the artifact");
    add_mode(batch);
    add_out_dir(batch);

    CLI::App* shap = app.add_subcommand("shapley", "Shapley attribution across players");
    shap->add_option("--model", o.model, "trained artifact")->required();
    shap->add_option("--panel", o.panel, "panel CSV")->required();
    shap->add_option("--players", o.players, "players JSON")->required();
    shap->add_option("--config", o.config, "config JSON; must match the artifact");
    shap->add_option("--permutations", o.permutations, "sample this many permutations instead of exact enumeration")
        ->check(CLI::NonNegativeNumber);
    shap->add_option("--seed", o.seed, "seed for permutation sampling");
    add_out_dir(shap);

    CLI::App* boot = app.add_subcommand("bootstrap", "customer bootstrap interval of scenario values");
    boot->add_option("--config", o.config, "model config JSON")->required();
    boot->add_option("--panel", o.panel, "panel CSV")->required();
    boot->add_option("--shock", o.shock, "scenario JSON")->required();
    boot->add_option("--replicates", o.replicates, "replicate count")->check(CLI::Range(2, 1000000));
    boot->add_option("--level", o.level, "confidence level in (0,1)");
    boot->add_option("--seed", o.seed, "master seed");
    add_mode(boot);
    add_out_dir(boot);

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic panel with known truth");
    synth->add_option("--spec", o.spec, "synth spec JSON")->required();
    synth->add_option("--out", o.out, "panel CSV output (default <out-dir>/panel.csv)");
    synth->add_option("--truth", o.truth, "truth artifact output (default <out-dir>/truth.json)");
    synth->add_option("--config-out", o.config_out, "config output (default <out-dir>/config.json)");
    add_out_dir(synth);

    CLI::App* report = app.add_subcommand("report", "valuation table by group");
    report->add_option("--config", o.config, "model config JSON")->required();
    report->add_option("--results", o.results, "results CSV from score or batch-score")->required();
    report->add_option("--groups", o.groups, "comma-separated group names (default: outcome groups + total)");
    report->add_option("--denominator", o.denominator, "grand | none | <number>");
    report->add_option("--model", o.model, "artifact, recorded for provenance");
    add_out_dir(report);

    std::vector<const char*> argv{"dcm"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        const std::string command = app.get_subcommands().empty() ? "" : app.get_subcommands().front()->get_name();
        err << error_json(command, "UsageError", e.what(), kExitUsage).dump() << '\n';
        return kExitUsage;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    Manifest manifest(command);
    int code = kExitOk;
    json failure;
    try {
        fs::create_directories(o.out_dir);
        if (command == "train") code = cmd_train(o, manifest);
        else if (command == "score") code = cmd_score(o, manifest);
        else if (command == "batch-score") code = cmd_batch_score(o, manifest);
        else if (command == "shapley") code = cmd_shapley(o, manifest);
        else if (command == "bootstrap") code = cmd_bootstrap(o, manifest);
        else if (command == "synth") code = cmd_synth(o, manifest);
        else code = cmd_report(o, manifest);
    } catch (const Error& e) {
        code = exit_code_for(e.kind());
        failure = error_json(command, std::string(to_string(e.kind())), e.what(), code);
    } catch (const fs::filesystem_error& e) {
        code = kExitInput;
        failure = error_json(command, "IoError", e.what(), code);
    } catch (const std::exception& e) {
        code = kExitInternal;
        failure = error_json(command, "Internal", e.what(), code);
    }
    manifest["exit_code"] = code;
    manifest["status"] = failure.is_null() ? (code == kExitOk ? "ok" : "partial") : "error";
    if (!failure.is_null()) {
        manifest["error"] = failure["error"];
        err << failure.dump() << '\n';
    }
    try {
        manifest.write(o.out_dir);
    } catch (const std::exception& e) {
        if (failure.is_null()) {
            err << error_json(command, "IoError", e.what(), kExitInput).dump() << '\n';
            return kExitInput;
        }
    }
    if (failure.is_null()) {
        out << json{{"command", command}, {"status", code == kExitOk ? "ok" : "partial"}, {"outputs", manifest.written()}}.dump()
            << '\n';
    }
    return code;
}

}  // namespace dcm
