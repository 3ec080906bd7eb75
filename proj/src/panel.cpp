#include "dcm/panel.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <unordered_map>

#include "dcm/error.hpp"
#include "dcm/format.hpp"

namespace dcm {

PanelTensor::PanelTensor(std::vector<Variable> variables, int n_periods, std::vector<std::string> customer_ids)
    : variables_(std::move(variables)),
      n_periods_(n_periods),
      customer_ids_(std::move(customer_ids)),
      values_(customer_ids_.size() * static_cast<std::size_t>(n_periods_) * variables_.size(), 0.0) {}

void PanelTensor::set_static(std::size_t customer, int variable, double v) noexcept {
    for (int t = 0; t < n_periods_; ++t) set_value(customer, t, variable, v);
}

PanelTensor PanelTensor::select_customers(std::span<const std::size_t> rows) const {
    std::vector<std::string> ids;
    ids.reserve(rows.size());
    for (auto r : rows) ids.push_back(customer_ids_.at(r));
    PanelTensor out(variables_, n_periods_, std::move(ids));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto src = customer_block(rows[i]);
        std::copy(src.begin(), src.end(), out.values_.begin() + static_cast<std::ptrdiff_t>(out.offset(i, 0, 0)));
    }
    return out;
}

void check_panel_matches(const PanelTensor& panel, const ModelConfig& config) {
    if (panel.variables() != config.variables || panel.n_periods() != config.n_periods) {
        throw Error(ErrorKind::ConfigMismatch, "panel variables or period count differ from the model config");
    }
}

namespace {

std::vector<std::string_view> split_row(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        auto field = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
        while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
        while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
            field.remove_suffix(1);
        }
        out.push_back(field);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string at_row(std::size_t line_no) { return " (line " + std::to_string(line_no) + ")"; }

double parse_cell(std::string_view text, std::size_t line_no, std::string_view column) {
    if (text.empty()) return 0.0;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        // from_chars rejects a leading '+'; accept it like strtod would.
        if (text.front() == '+') return parse_cell(text.substr(1), line_no, column);
        throw Error(ErrorKind::ParseError,
                    "cannot parse '" + std::string(text) + "' in column " + std::string(column) + at_row(line_no));
    }
    if (!std::isfinite(v)) {
        throw Error(ErrorKind::NonFiniteValue,
                    "non-finite value '" + std::string(text) + "' in column " + std::string(column) + at_row(line_no));
    }
    return v;
}

}  // namespace

PanelTensor read_panel(std::istream& in, const ModelConfig& config) {
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, "panel file is empty");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const auto header = split_row(line);
    if (header.size() < 2 || header[0] != "customer_id" || header[1] != "period") {
        throw Error(ErrorKind::ParseError, "panel header must start with customer_id,period" + at_row(1));
    }
    const std::size_t n_vars = config.n_variables();
    std::vector<int> column_var(header.size(), -1);
    std::vector<bool> seen(n_vars, false);
    for (std::size_t j = 2; j < header.size(); ++j) {
        auto idx = config.find_variable(header[j]);
        if (!idx) throw Error(ErrorKind::UnknownVariable, "header column '" + std::string(header[j]) + "' is not declared" + at_row(1));
        if (seen[*idx]) throw Error(ErrorKind::ParseError, "header repeats '" + std::string(header[j]) + "'" + at_row(1));
        seen[*idx] = true;
        column_var[j] = *idx;
    }
    for (std::size_t v = 0; v < n_vars; ++v) {
        if (!seen[v]) throw Error(ErrorKind::MissingVariable, "declared variable '" + config.variables[v].name + "' missing from header");
    }

    struct Row {
        std::size_t line_no;
        int period;
        std::vector<double> cells;
    };
    std::vector<std::string> ids;
    std::unordered_map<std::string, std::size_t> id_index;
    std::vector<std::map<int, Row>> rows;

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_row(line);
        if (fields.size() != header.size()) {
            throw Error(ErrorKind::ParseError, "expected " + std::to_string(header.size()) + " fields, got " +
                                                   std::to_string(fields.size()) + at_row(line_no));
        }
        const std::string id(fields[0]);
        if (id.empty()) throw Error(ErrorKind::ParseError, "empty customer_id" + at_row(line_no));
        int period = -1;
        auto [ptr, ec] = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), period);
        if (ec != std::errc() || ptr != fields[1].data() + fields[1].size()) {
            throw Error(ErrorKind::ParseError, "bad period '" + std::string(fields[1]) + "'" + at_row(line_no));
        }
        if (period < 0 || period >= config.n_periods) {
            throw Error(ErrorKind::PeriodOutOfRange, "period " + std::to_string(period) + " outside [0, " +
                                                         std::to_string(config.n_periods - 1) + "]" + at_row(line_no));
        }
        Row row{line_no, period, std::vector<double>(n_vars, 0.0)};
        for (std::size_t j = 2; j < fields.size(); ++j) {
            row.cells[column_var[j]] = parse_cell(fields[j], line_no, header[j]);
        }
        auto [it, inserted] = id_index.try_emplace(id, ids.size());
        if (inserted) {
            ids.push_back(id);
            rows.emplace_back();
        }
        auto& per_customer = rows[it->second];
        if (per_customer.count(period)) {
            throw Error(ErrorKind::DuplicateCell, "duplicate row for customer '" + id + "' period " +
                                                      std::to_string(period) + at_row(line_no));
        }
        per_customer.emplace(period, std::move(row));
    }

    PanelTensor panel(config.variables, config.n_periods, ids);
    for (std::size_t c = 0; c < ids.size(); ++c) {
        const Row* first = nullptr;
        for (const auto& [period, row] : rows[c]) {
            for (std::size_t v = 0; v < n_vars; ++v) {
                const Role role = config.variables[v].role;
                if (is_dynamic(role)) {
                    panel.set_value(c, period, static_cast<int>(v), row.cells[v]);
                } else if (!first) {
                    panel.set_static(c, static_cast<int>(v), row.cells[v]);
                } else if (first->cells[v] != row.cells[v]) {
                    throw Error(ErrorKind::StaticNotInvariant, "'" + config.variables[v].name + "' changes over time for customer '" +
                                                                   ids[c] + "'" + at_row(row.line_no));
                }
            }
            if (!first) first = &row;
        }
        if (auto p = config.policy_index()) {
            double d = panel.static_value(c, *p);
            if (d != 0.0 && d != 1.0) {
                throw Error(ErrorKind::ParseError, "policy must be 0 or 1 for customer '" + ids[c] + "'" + at_row(first->line_no));
            }
        }
    }
    return panel;
}

PanelTensor ingest_panel(const std::filesystem::path& path, const ModelConfig& config) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open panel " + path.string());
    return read_panel(in, config);
}

void write_panel(std::ostream& out, const PanelTensor& panel) {
    out << "customer_id,period";
    for (const auto& v : panel.variables()) out << ',' << v.name;
    out << '\n';
    for (std::size_t c = 0; c < panel.n_customers(); ++c) {
        for (int t = 0; t < panel.n_periods(); ++t) {
            out << panel.customer_ids()[c] << ',' << t;
            for (std::size_t v = 0; v < panel.n_variables(); ++v) {
                out << ',' << format_double(panel.value(c, t, static_cast<int>(v)));
            }
            out << '\n';
        }
    }
}

void write_panel(const std::filesystem::path& path, const PanelTensor& panel) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
    write_panel(out, panel);
}

std::string_view to_string(ColumnKind kind) noexcept {
    switch (kind) {
        case ColumnKind::Lag: return "lag";
        case ColumnKind::Covariate: return "covariate";
        case ColumnKind::Policy: return "policy";
        case ColumnKind::SamePeriod: return "same_period";
        case ColumnKind::Intercept: return "intercept";
    }
    return "unknown";
}

ColumnKind parse_column_kind(std::string_view text) {
    for (ColumnKind k : {ColumnKind::Lag, ColumnKind::Covariate, ColumnKind::Policy, ColumnKind::SamePeriod,
                         ColumnKind::Intercept}) {
        if (text == to_string(k)) return k;
    }
    throw Error(ErrorKind::ParseError, "unknown column kind '" + std::string(text) + "'");
}

std::string column_name(const Column& column, const ModelConfig& config) {
    switch (column.kind) {
        case ColumnKind::Lag:
            return config.variables[column.variable].name + "[" + std::to_string(column.period) + "]";
        case ColumnKind::SamePeriod:
            return config.variables[column.variable].name + "[" + std::to_string(column.period) + "]*";
        case ColumnKind::Covariate:
        case ColumnKind::Policy:
            return config.variables[column.variable].name;
        case ColumnKind::Intercept:
            return "intercept";
    }
    return "?";
}

std::vector<Column> design_columns(const ModelConfig& config, int target, int period) {
    if (target < 0 || target >= static_cast<int>(config.n_variables()) ||
        !is_dynamic(config.variables[target].role)) {
        throw Error(ErrorKind::InvalidArgument, "design target must be an outcome or surrogate");
    }
    if (period < 0 || period >= config.n_periods) {
        throw Error(ErrorKind::InvalidArgument, "design period " + std::to_string(period) + " out of range");
    }
    const auto& block = config.block_for(config.variables[target].role);
    std::vector<Column> cols;
    for (std::size_t u = 0; u < config.n_variables(); ++u) {
        const Role role = config.variables[u].role;
        if (std::find(block.lagged.begin(), block.lagged.end(), role) == block.lagged.end()) continue;
        for (int s = config.first_lag_period(period); s < period; ++s) {
            cols.push_back({ColumnKind::Lag, static_cast<int>(u), s});
        }
    }
    if (block.covariates) {
        for (int k : config.indices_with_role(Role::StaticCovariate)) cols.push_back({ColumnKind::Covariate, k, -1});
    }
    if (block.policy) {
        if (auto p = config.policy_index()) cols.push_back({ColumnKind::Policy, *p, -1});
    }
    for (int u : config.same_period_sources(target)) {
        if (u == target) {
            throw Error(ErrorKind::TargetIsRegressor,
                        "'" + config.variables[target].name + "' would appear on its own right-hand side");
        }
        cols.push_back({ColumnKind::SamePeriod, u, period});
    }
    if (period == 0 && cols.empty()) {
        throw Error(ErrorKind::EmptyDesign, "period-0 design for '" + config.variables[target].name +
                                                "' has no regressors besides the intercept");
    }
    cols.push_back({ColumnKind::Intercept, -1, -1});
    return cols;
}

Eigen::Index DesignMatrix::intercept_column() const {
    for (std::size_t j = 0; j < columns.size(); ++j) {
        if (columns[j].kind == ColumnKind::Intercept) return static_cast<Eigen::Index>(j);
    }
    return -1;
}

DesignMatrix build_design(const PanelTensor& panel, int target, int period, const ModelConfig& config) {
    check_panel_matches(panel, config);
    DesignMatrix d;
    d.target = target;
    d.period = period;
    d.columns = design_columns(config, target, period);
    const auto n = static_cast<Eigen::Index>(panel.n_customers());
    d.x.resize(n, static_cast<Eigen::Index>(d.columns.size()));
    for (std::size_t j = 0; j < d.columns.size(); ++j) {
        const Column& col = d.columns[j];
        d.names.push_back(column_name(col, config));
        const auto jj = static_cast<Eigen::Index>(j);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(i);
            switch (col.kind) {
                case ColumnKind::Lag:
                case ColumnKind::SamePeriod: d.x(i, jj) = panel.value(c, col.period, col.variable); break;
                case ColumnKind::Covariate:
                case ColumnKind::Policy: d.x(i, jj) = panel.static_value(c, col.variable); break;
                case ColumnKind::Intercept: d.x(i, jj) = 1.0; break;
            }
        }
    }
    return d;
}

Eigen::VectorXd target_values(const PanelTensor& panel, int target, int period) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(panel.n_customers()));
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = panel.value(static_cast<std::size_t>(i), period, target);
    return y;
}

ValidationReport validate_panel(const PanelTensor& panel) {
    ValidationReport report;
    const std::size_t n = panel.n_customers();
    std::size_t zeros_total = 0;
    std::size_t cells_total = 0;
    for (std::size_t v = 0; v < panel.n_variables(); ++v) {
        const int vi = static_cast<int>(v);
        const bool dynamic = is_dynamic(panel.variables()[v].role);
        const int periods = dynamic ? panel.n_periods() : 1;
        VariableSummary summary;
        summary.name = panel.variables()[v].name;
        summary.min = std::numeric_limits<double>::infinity();
        summary.max = -std::numeric_limits<double>::infinity();
        summary.constant = true;
        double sum = 0.0;
        std::size_t zeros = 0;
        for (int t = 0; t < periods; ++t) {
            bool constant = true;
            for (std::size_t c = 0; c < n; ++c) {
                const double x = panel.value(c, t, vi);
                summary.min = std::min(summary.min, x);
                summary.max = std::max(summary.max, x);
                sum += x;
                zeros += x == 0.0 ? 1 : 0;
                constant = constant && x == panel.value(0, t, vi);
            }
            if (constant) report.constant_columns.push_back({vi, dynamic ? t : -1});
            summary.constant = summary.constant && constant;
        }
        const std::size_t cells = n * static_cast<std::size_t>(periods);
        if (cells == 0) {
            summary.min = summary.max = 0.0;
        } else {
            summary.mean = sum / static_cast<double>(cells);
            summary.zero_fraction = static_cast<double>(zeros) / static_cast<double>(cells);
        }
        zeros_total += zeros;
        cells_total += cells;
        report.variables.push_back(std::move(summary));
    }
    report.zero_fraction = cells_total ? static_cast<double>(zeros_total) / static_cast<double>(cells_total) : 0.0;
    return report;
}

}  // namespace dcm
