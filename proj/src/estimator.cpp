#include "dcm/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <sstream>
#include <tuple>
#include <utility>

#include "dcm/error.hpp"

namespace dcm {

using nlohmann::json;

namespace {

// Pivots below this fraction of the largest pivot count as zero.
constexpr double kRankTolerance = 1e-10;
// Reciprocal condition below which the Cholesky path hands over to QR.
constexpr double kMinRcond = 1e-13;

double condition_from_r(const Eigen::MatrixXd& r, Eigen::Index rank) {
    if (rank == 0) return std::numeric_limits<double>::infinity();
    const double hi = std::abs(r(0, 0));
    const double lo = std::abs(r(rank - 1, rank - 1));
    return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
}

Eigen::Index qr_rank(const Eigen::MatrixXd& x) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(kRankTolerance);
    return qr.rank();
}

// Intercept first, then design order: a column is reported when it adds no
// rank to the columns kept before it.
std::vector<std::string> dependent_columns(const DesignMatrix& design) {
    std::vector<Eigen::Index> order;
    const Eigen::Index icpt = design.intercept_column();
    if (icpt >= 0) order.push_back(icpt);
    for (Eigen::Index j = 0; j < design.x.cols(); ++j) {
        if (j != icpt) order.push_back(j);
    }
    std::vector<Eigen::Index> kept;
    std::vector<std::string> dependent;
    for (Eigen::Index j : order) {
        Eigen::MatrixXd sub(design.x.rows(), static_cast<Eigen::Index>(kept.size()) + 1);
        for (std::size_t k = 0; k < kept.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = design.x.col(kept[k]);
        sub.col(sub.cols() - 1) = design.x.col(j);
        if (qr_rank(sub) == sub.cols()) {
            kept.push_back(j);
        } else {
            dependent.push_back(static_cast<std::size_t>(j) < design.names.size()
                                    ? design.names[static_cast<std::size_t>(j)]
                                    : "column " + std::to_string(j));
        }
    }
    return dependent;
}

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out += ", ";
        out += p;
    }
    return out;
}

}  // namespace

FitResult fit_target(const DesignMatrix& design, const Eigen::VectorXd& targets, double lambda) {
    const Eigen::MatrixXd& x = design.x;
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    if (n < 1 || p < 1) throw Error(ErrorKind::InvalidArgument, "design must have at least one row and one column");
    if (targets.size() != n) throw Error(ErrorKind::InvalidArgument, "target vector length differs from design rows");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error(ErrorKind::InvalidArgument, "lambda must be finite and >= 0");
    const Eigen::Index icpt = design.intercept_column();

    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
    gram = gram.selfadjointView<Eigen::Lower>();
    for (Eigen::Index j = 0; j < p; ++j) {
        if (j != icpt) gram(j, j) += lambda;
    }

    FitResult result;
    FitDiagnostics& diag = result.diagnostics;
    diag.n_rows = static_cast<std::size_t>(n);

    auto solve_qr = [&](const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
        qr.setThreshold(kRankTolerance);
        if (qr.rank() < p) {
            throw Error(ErrorKind::SingularSystem, "rank-deficient design (rank " + std::to_string(qr.rank()) + " of " +
                                                       std::to_string(p) + "); dependent columns: " +
                                                       join(dependent_columns(design)));
        }
        diag.condition = condition_from_r(qr.matrixR(), p);
        return Eigen::VectorXd(qr.solve(b));
    };

    if (lambda == 0.0) {
        result.coefficients = solve_qr(x, targets);
        diag.solver = "qr";
    } else {
        Eigen::LLT<Eigen::MatrixXd> llt(gram);
        const double rcond = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
        if (rcond > kMinRcond) {
            result.coefficients = llt.solve(x.transpose() * targets);
            diag.condition = std::sqrt(1.0 / rcond);
            diag.solver = "cholesky";
        } else {
            const Eigen::Index penalized = icpt >= 0 ? p - 1 : p;
            Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + penalized, p);
            a.topRows(n) = x;
            Eigen::Index row = n;
            for (Eigen::Index j = 0; j < p; ++j) {
                if (j != icpt) a(row++, j) = std::sqrt(lambda);
            }
            Eigen::VectorXd b = Eigen::VectorXd::Zero(n + penalized);
            b.head(n) = targets;
            result.coefficients = solve_qr(a, b);
            diag.solver = "qr-fallback";
        }
    }

    const Eigen::VectorXd residuals = targets - x * result.coefficients;
    const double rss = residuals.squaredNorm();
    const double tss = (targets.array() - targets.mean()).matrix().squaredNorm();
    const double dof = n > p ? static_cast<double>(n - p) : 1.0;
    diag.residual_variance = rss / dof;
    diag.r_squared = tss > 0.0 ? 1.0 - rss / tss : (rss == 0.0 ? 1.0 : 0.0);

    const Eigen::MatrixXd inv = gram.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
    diag.std_errors.resize(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) {
        const double v = inv(j, j) * diag.residual_variance;
        diag.std_errors[static_cast<std::size_t>(j)] = std::isfinite(v) && v > 0.0 ? std::sqrt(v) : 0.0;
    }
    if (!std::isfinite(diag.condition)) diag.condition = std::numeric_limits<double>::max();
    return result;
}

// ---------------------------------------------------------------------------

double Equation::coefficient(const Column& column) const noexcept {
    for (std::size_t j = 0; j < columns.size(); ++j) {
        if (columns[j] == column) return coefficients[j];
    }
    return 0.0;
}

double* Equation::find(const Column& column) noexcept {
    for (std::size_t j = 0; j < columns.size(); ++j) {
        if (columns[j] == column) return &coefficients[j];
    }
    return nullptr;
}

CoefficientSet::CoefficientSet(ModelConfig config)
    : config_(std::move(config)),
      config_hash_(dcm::config_hash(config_)),
      pooled_(config_.pooled),
      slot_(config_.n_variables() * static_cast<std::size_t>(config_.n_periods), -1) {}

void CoefficientSet::add(Equation equation) {
    if (equation.target < 0 || equation.target >= static_cast<int>(config_.n_variables()) || equation.period < 0 ||
        equation.period >= config_.n_periods) {
        throw Error(ErrorKind::InvalidArgument, "equation key out of range");
    }
    if (equation.coefficients.size() != equation.columns.size()) {
        throw Error(ErrorKind::InvalidArgument, "equation has mismatched columns and coefficients");
    }
    for (double c : equation.coefficients) {
        if (!std::isfinite(c)) {
            throw Error(ErrorKind::NonFiniteValue, "non-finite coefficient for '" +
                                                       config_.variables[equation.target].name + "' period " +
                                                       std::to_string(equation.period));
        }
    }
    const auto key = static_cast<std::size_t>(equation.target) * static_cast<std::size_t>(config_.n_periods) +
                     static_cast<std::size_t>(equation.period);
    if (slot_[key] >= 0) {
        equations_[static_cast<std::size_t>(slot_[key])] = std::move(equation);
    } else {
        slot_[key] = static_cast<int>(equations_.size());
        equations_.push_back(std::move(equation));
    }
}

const Equation* CoefficientSet::find(int target, int period) const noexcept {
    if (target < 0 || period < 0 || target >= static_cast<int>(config_.n_variables()) || period >= config_.n_periods) {
        return nullptr;
    }
    const int s = slot_[static_cast<std::size_t>(target) * static_cast<std::size_t>(config_.n_periods) +
                        static_cast<std::size_t>(period)];
    return s < 0 ? nullptr : &equations_[static_cast<std::size_t>(s)];
}

Equation* CoefficientSet::find(int target, int period) noexcept {
    return const_cast<Equation*>(std::as_const(*this).find(target, period));
}

double CoefficientSet::lag_coeff(int target, int period, int source, int source_period) const noexcept {
    const Equation* eq = find(target, period);
    return eq ? eq->coefficient({ColumnKind::Lag, source, source_period}) : 0.0;
}

double CoefficientSet::same_period_coeff(int target, int period, int source) const noexcept {
    const Equation* eq = find(target, period);
    return eq ? eq->coefficient({ColumnKind::SamePeriod, source, period}) : 0.0;
}

double CoefficientSet::covariate_coeff(int target, int period, int covariate) const noexcept {
    const Equation* eq = find(target, period);
    return eq ? eq->coefficient({ColumnKind::Covariate, covariate, -1}) : 0.0;
}

double CoefficientSet::policy_coeff(int target, int period) const noexcept {
    const Equation* eq = find(target, period);
    auto p = config_.policy_index();
    return eq && p ? eq->coefficient({ColumnKind::Policy, *p, -1}) : 0.0;
}

double CoefficientSet::intercept(int target, int period) const noexcept {
    const Equation* eq = find(target, period);
    return eq ? eq->coefficient({ColumnKind::Intercept, -1, -1}) : 0.0;
}

void CoefficientSet::check_config(const ModelConfig& config) const {
    const std::string other = dcm::config_hash(config);
    if (other != config_hash_) {
        throw Error(ErrorKind::ConfigMismatch, "model was trained with config " + config_hash_.substr(0, 12) +
                                                   " but scoring uses config " + other.substr(0, 12));
    }
}

bool CoefficientSet::operator==(const CoefficientSet& other) const {
    if (config_hash_ != other.config_hash_ || pooled_ != other.pooled_ ||
        equations_.size() != other.equations_.size()) {
        return false;
    }
    for (const auto& eq : equations_) {
        const Equation* o = other.find(eq.target, eq.period);
        if (!o || !(*o == eq)) return false;
    }
    return true;
}

double max_abs_difference(const CoefficientSet& a, const CoefficientSet& b) {
    double worst = 0.0;
    for (const auto& eq : a.equations()) {
        const Equation* other = b.find(eq.target, eq.period);
        if (!other || other->columns != eq.columns) {
            throw Error(ErrorKind::InvalidArgument, "coefficient sets have different equation structure");
        }
        for (std::size_t j = 0; j < eq.coefficients.size(); ++j) {
            worst = std::max(worst, std::abs(eq.coefficients[j] - other->coefficients[j]));
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------

namespace {

struct FitJob {
    int target;
    std::vector<int> periods;  // more than one: pooled
};

std::vector<Equation> run_job(const PanelTensor& panel, const ModelConfig& config, const FitJob& job) {
    const auto& name = config.variables[job.target].name;
    std::vector<DesignMatrix> designs;
    for (int t : job.periods) designs.push_back(build_design(panel, job.target, t, config));

    const Eigen::Index n = static_cast<Eigen::Index>(panel.n_customers());
    const Eigen::Index p = designs.front().x.cols();
    const Eigen::Index rows = n * static_cast<Eigen::Index>(designs.size());
    if (rows <= p) {
        throw Error(ErrorKind::InsufficientRows, "target '" + name + "' period " + std::to_string(job.periods.front()) +
                                                     ": " + std::to_string(rows) + " rows for " + std::to_string(p) +
                                                     " columns");
    }

    DesignMatrix stacked;
    Eigen::VectorXd y(rows);
    if (designs.size() == 1) {
        stacked = designs.front();
        y = target_values(panel, job.target, job.periods.front());
    } else {
        stacked.target = job.target;
        stacked.period = job.periods.front();
        stacked.columns = designs.front().columns;
        stacked.names = designs.front().names;
        stacked.x.resize(rows, p);
        for (std::size_t k = 0; k < designs.size(); ++k) {
            const auto off = static_cast<Eigen::Index>(k) * n;
            stacked.x.middleRows(off, n) = designs[k].x;
            y.segment(off, n) = target_values(panel, job.target, job.periods[k]);
        }
    }

    FitResult fit;
    try {
        fit = fit_target(stacked, y, config.ridge_lambda);
    } catch (const Error& e) {
        throw Error(e.kind(), "target '" + name + "' period " + std::to_string(job.periods.front()) + ": " + e.what());
    }

    std::vector<Equation> out;
    for (std::size_t k = 0; k < designs.size(); ++k) {
        Equation eq;
        eq.target = job.target;
        eq.period = job.periods[k];
        eq.columns = designs[k].columns;
        eq.coefficients.assign(fit.coefficients.data(), fit.coefficients.data() + fit.coefficients.size());
        eq.diagnostics = fit.diagnostics;
        out.push_back(std::move(eq));
    }
    return out;
}

}  // namespace

CoefficientSet fit_dcm(const PanelTensor& panel, const ModelConfig& config) {
    check_panel_matches(panel, config);
    std::vector<FitJob> jobs;
    const int first = config.fit_period_zero ? 0 : 1;
    for (int v : config.dynamic_indices()) {
        FitJob pooled{v, {}};
        for (int t = first; t < config.n_periods; ++t) {
            if (config.pooled && t >= *config.lag_window) {
                pooled.periods.push_back(t);
            } else {
                jobs.push_back({v, {t}});
            }
        }
        if (!pooled.periods.empty()) jobs.push_back(std::move(pooled));
    }

    std::vector<std::vector<Equation>> results(jobs.size());
    std::vector<std::exception_ptr> errors(jobs.size());
    const auto n_jobs = static_cast<std::ptrdiff_t>(jobs.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t j = 0; j < n_jobs; ++j) {
        try {
            results[static_cast<std::size_t>(j)] = run_job(panel, config, jobs[static_cast<std::size_t>(j)]);
        } catch (...) {
            errors[static_cast<std::size_t>(j)] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    CoefficientSet coeffs(config);
    std::vector<Equation> all;
    for (auto& r : results) {
        for (auto& eq : r) all.push_back(std::move(eq));
    }
    std::sort(all.begin(), all.end(), [](const Equation& a, const Equation& b) {
        return std::tie(a.target, a.period) < std::tie(b.target, b.period);
    });
    for (auto& eq : all) coeffs.add(std::move(eq));
    return coeffs;
}

// ---------------------------------------------------------------------------
// Artifact

json artifact_to_json(const CoefficientSet& coeffs) {
    const ModelConfig& config = coeffs.config();
    json doc;
    doc["format"] = "dcm-model";
    doc["version"] = 1;
    doc["config_hash"] = coeffs.config_hash();
    doc["config"] = config_to_json(config);
    doc["pooled"] = coeffs.pooled();
    json eqs = json::array();
    for (const auto& eq : coeffs.equations()) {
        json terms = json::array();
        const bool has_se = eq.diagnostics.std_errors.size() == eq.columns.size();
        for (std::size_t j = 0; j < eq.columns.size(); ++j) {
            const Column& col = eq.columns[j];
            json term;
            term["kind"] = to_string(col.kind);
            if (col.kind != ColumnKind::Intercept) term["source"] = config.variables[col.variable].name;
            if (col.kind == ColumnKind::Lag || col.kind == ColumnKind::SamePeriod) term["period"] = col.period;
            term["coef"] = eq.coefficients[j];
            if (has_se) term["se"] = eq.diagnostics.std_errors[j];
            terms.push_back(std::move(term));
        }
        eqs.push_back({{"target", config.variables[eq.target].name},
                       {"period", eq.period},
                       {"terms", std::move(terms)},
                       {"diagnostics",
                        {{"residual_variance", eq.diagnostics.residual_variance},
                         {"r_squared", eq.diagnostics.r_squared},
                         {"condition", eq.diagnostics.condition},
                         {"n_rows", eq.diagnostics.n_rows},
                         {"solver", eq.diagnostics.solver}}}});
    }
    doc["equations"] = std::move(eqs);
    return doc;
}

CoefficientSet artifact_from_json(const json& doc) {
    try {
        if (doc.at("format").get<std::string>() != "dcm-model" || doc.at("version").get<int>() != 1) {
            throw Error(ErrorKind::ParseError, "not a dcm-model v1 artifact");
        }
        ModelConfig config = config_from_json(doc.at("config"));
        CoefficientSet coeffs(config);
        if (coeffs.config_hash() != doc.at("config_hash").get<std::string>()) {
            throw Error(ErrorKind::ConfigMismatch, "artifact config hash does not match its embedded config");
        }
        coeffs.set_pooled(doc.at("pooled").get<bool>());
        for (const auto& e : doc.at("equations")) {
            Equation eq;
            eq.target = config.variable_index(e.at("target").get<std::string>());
            eq.period = e.at("period").get<int>();
            bool has_se = true;
            for (const auto& term : e.at("terms")) {
                Column col;
                col.kind = parse_column_kind(term.at("kind").get<std::string>());
                if (col.kind != ColumnKind::Intercept) col.variable = config.variable_index(term.at("source").get<std::string>());
                if (col.kind == ColumnKind::Lag || col.kind == ColumnKind::SamePeriod) col.period = term.at("period").get<int>();
                eq.columns.push_back(col);
                eq.coefficients.push_back(term.at("coef").get<double>());
                if (term.contains("se")) {
                    eq.diagnostics.std_errors.push_back(term.at("se").get<double>());
                } else {
                    has_se = false;
                }
            }
            if (!has_se) eq.diagnostics.std_errors.clear();
            if (eq.columns != design_columns(config, eq.target, eq.period)) {
                throw Error(ErrorKind::ParseError, "artifact equation for '" + config.variables[eq.target].name +
                                                       "' period " + std::to_string(eq.period) +
                                                       " does not match the config's regression structure");
            }
            const json& d = e.at("diagnostics");
            eq.diagnostics.residual_variance = d.at("residual_variance").get<double>();
            eq.diagnostics.r_squared = d.at("r_squared").get<double>();
            eq.diagnostics.condition = d.at("condition").get<double>();
            eq.diagnostics.n_rows = d.at("n_rows").get<std::size_t>();
            eq.diagnostics.solver = d.at("solver").get<std::string>();
            coeffs.add(std::move(eq));
        }
        return coeffs;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("malformed model artifact: ") + e.what());
    }
}

void save_artifact(const CoefficientSet& coeffs, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
    out << artifact_to_json(coeffs).dump(1) << '\n';
}

CoefficientSet load_artifact(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open model " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::ParseError, std::string("model artifact: ") + e.what());
    }
    return artifact_from_json(doc);
}

}  // namespace dcm
