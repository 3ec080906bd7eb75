#include "dcm/shapley.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <ostream>
#include <random>

#include "dcm/error.hpp"
#include "dcm/format.hpp"
#include "dcm/scorer.hpp"

namespace dcm {

using nlohmann::json;

namespace {

double binomial(int n, int k) {
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return r;
}

std::string members_label(const AttributionResult& r, std::uint64_t mask) {
    std::string s;
    for (std::size_t k = 0; k < r.players.size(); ++k) {
        if (!(mask >> k & 1U)) continue;
        if (!s.empty()) s += '+';
        s += r.players[k];
    }
    return s.empty() ? "{}" : s;
}

std::uint64_t full_mask(std::size_t p) { return p >= 64 ? ~0ULL : (1ULL << p) - 1; }

double share_of(double phi, double total) { return total != 0.0 ? phi / total : 0.0; }

}  // namespace

PlayerSet players_from_json(const json& doc, const ModelConfig& config) {
    const json* list = &doc;
    PlayerSet set;
    if (doc.is_object()) {
        for (const auto& [key, _] : doc.items()) {
            if (key != "players" && key != "outcome_group") {
                throw Error(ErrorKind::ParseError, "unknown key '" + key + "' in players file");
            }
        }
        if (!doc.contains("players")) throw Error(ErrorKind::InvalidPlayers, "players file has no 'players' list");
        list = &doc.at("players");
        if (doc.contains("outcome_group")) {
            const std::string g = doc.at("outcome_group").get<std::string>();
            if (!config.find_group(g)) throw Error(ErrorKind::UnknownGroup, "unknown outcome group '" + g + "'");
            set.outcome_group = g;
        }
    }
    if (!list->is_array() || list->empty()) throw Error(ErrorKind::InvalidPlayers, "players must be a non-empty array");
    std::vector<int> owner(config.variables.size(), -1);
    for (const auto& p : *list) {
        if (!p.is_object()) throw Error(ErrorKind::InvalidPlayers, "each player must be an object");
        for (const auto& [key, _] : p.items()) {
            if (key != "name" && key != "group" && key != "variables" && key != "baseline") {
                throw Error(ErrorKind::ParseError, "unknown key '" + key + "' in player");
            }
        }
        Player player;
        try {
            if (p.contains("group") == p.contains("variables")) {
                throw Error(ErrorKind::InvalidPlayers, "a player needs exactly one of 'group' or 'variables'");
            }
            if (p.contains("group")) {
                const std::string g = p.at("group").get<std::string>();
                const Group* group = config.find_group(g);
                if (!group) throw Error(ErrorKind::UnknownGroup, "unknown group '" + g + "'");
                for (const auto& m : group->members) player.variables.push_back(config.variable_index(m));
                player.name = p.value("name", g);
            } else {
                for (const auto& m : p.at("variables")) player.variables.push_back(config.variable_index(m.get<std::string>()));
                player.name = p.at("name").get<std::string>();
            }
            if (p.contains("baseline")) {
                const json& b = p.at("baseline");
                const std::string mode = b.value("mode", std::string("set"));
                if (mode == "set") player.baseline_mode = ShockMode::Set;
                else if (mode == "scale") player.baseline_mode = ShockMode::Scale;
                else if (mode == "add") player.baseline_mode = ShockMode::Add;
                else throw Error(ErrorKind::InvalidPlayers, "unknown baseline mode '" + mode + "'");
                player.baseline_value = b.value("value", 0.0);
            }
        } catch (const json::exception& e) {
            throw Error(ErrorKind::ParseError, std::string("player: ") + e.what());
        }
        if (player.variables.empty()) throw Error(ErrorKind::InvalidPlayers, "player '" + player.name + "' has no variables");
        const int index = static_cast<int>(set.players.size());
        for (int v : player.variables) {
            if (owner[static_cast<std::size_t>(v)] >= 0) {
                throw Error(ErrorKind::InvalidPlayers, "players '" + set.players[static_cast<std::size_t>(owner[static_cast<std::size_t>(v)])].name +
                                                           "' and '" + player.name + "' share variable '" +
                                                           config.variables[static_cast<std::size_t>(v)].name + "'");
            }
            owner[static_cast<std::size_t>(v)] = index;
        }
        for (const auto& other : set.players) {
            if (other.name == player.name) throw Error(ErrorKind::InvalidPlayers, "duplicate player name '" + player.name + "'");
        }
        set.players.push_back(std::move(player));
    }
    if (set.players.size() >= 64) throw Error(ErrorKind::TooManyPlayers, "at most 63 players are supported");
    // every baseline must be a valid shock
    validate_shock(coalition_shock(set, 0, config), config);
    return set;
}

PlayerSet parse_players(std::string_view text, const ModelConfig& config) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::ParseError, std::string("players: ") + e.what());
    }
    return players_from_json(doc, config);
}

ShockSpec coalition_shock(const PlayerSet& players, std::uint64_t coalition, const ModelConfig& config) {
    ShockSpec shock;
    shock.label = "coalition:" + std::to_string(coalition);
    for (std::size_t k = 0; k < players.size(); ++k) {
        if (coalition >> k & 1U) continue;
        const Player& p = players.players[k];
        for (int v : p.variables) {
            shock.entries.push_back({config.variables[static_cast<std::size_t>(v)].name, 0, config.n_periods - 1,
                                     p.baseline_mode, p.baseline_value});
        }
    }
    return shock;
}

double characteristic_value(const CoefficientSet& coeffs, const PanelTensor& panel, const PlayerSet& players,
                            std::uint64_t coalition) {
    const ModelConfig& config = coeffs.config();
    const ShockSpec shock = coalition_shock(players, coalition, config);
    const auto cells = aggregate_outcomes(coeffs, panel, shock.entries.empty() ? nullptr : &shock);
    const auto outcomes = config.indices_with_role(Role::Outcome);
    std::vector<bool> keep(outcomes.size(), true);
    if (players.outcome_group) {
        const Group* g = config.find_group(*players.outcome_group);
        if (!g) throw Error(ErrorKind::UnknownGroup, "unknown outcome group '" + *players.outcome_group + "'");
        for (std::size_t o = 0; o < outcomes.size(); ++o) {
            const std::string& name = config.variables[static_cast<std::size_t>(outcomes[o])].name;
            keep[o] = std::find(g->members.begin(), g->members.end(), name) != g->members.end();
        }
    }
    double total = 0.0;
    for (std::size_t o = 0; o < outcomes.size(); ++o) {
        if (!keep[o]) continue;
        for (int t = 0; t < config.n_periods; ++t) total += cells[o * static_cast<std::size_t>(config.n_periods) + static_cast<std::size_t>(t)];
    }
    return total;
}

CharacteristicCache::CharacteristicCache(const CoefficientSet& coeffs, const PanelTensor& panel, const PlayerSet& players)
    : coeffs_(coeffs), panel_(panel), players_(players) {
    if (players.size() <= static_cast<std::size_t>(kExactPlayerLimit)) values_.resize(std::size_t{1} << players.size());
}

double CharacteristicCache::operator()(std::uint64_t coalition) {
    if (!values_.empty()) {
        auto& slot = values_[coalition];
        if (!slot) {
            slot = characteristic_value(coeffs_, panel_, players_, coalition);
            ++evaluations_;
        }
        return *slot;
    }
    for (const auto& [mask, v] : sparse_) {
        if (mask == coalition) return v;
    }
    const double v = characteristic_value(coeffs_, panel_, players_, coalition);
    ++evaluations_;
    sparse_.emplace_back(coalition, v);
    return v;
}

std::vector<double> CharacteristicCache::all_coalitions() {
    if (players_.size() > static_cast<std::size_t>(kExactPlayerLimit)) {
        throw Error(ErrorKind::TooManyPlayers, std::to_string(players_.size()) + " players exceed the exact limit of " +
                                                   std::to_string(kExactPlayerLimit) + "; use permutation sampling");
    }
    const auto n = static_cast<std::ptrdiff_t>(values_.size());
    std::vector<std::exception_ptr> errors(values_.size());
    std::size_t fresh = 0;
    for (const auto& v : values_) fresh += v ? 0 : 1;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t m = 0; m < n; ++m) {
        auto& slot = values_[static_cast<std::size_t>(m)];
        if (slot) continue;
        try {
            slot = characteristic_value(coeffs_, panel_, players_, static_cast<std::uint64_t>(m));
        } catch (...) {
            errors[static_cast<std::size_t>(m)] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    evaluations_ += fresh;
    std::vector<double> out;
    out.reserve(values_.size());
    for (const auto& v : values_) out.push_back(*v);
    return out;
}

AttributionResult shapley_exact(const PlayerSet& players, const std::vector<double>& values) {
    const std::size_t p = players.size();
    if (p == 0) throw Error(ErrorKind::InvalidPlayers, "no players");
    if (p > static_cast<std::size_t>(kExactPlayerLimit)) {
        throw Error(ErrorKind::TooManyPlayers, std::to_string(p) + " players exceed the exact limit of " +
                                                   std::to_string(kExactPlayerLimit) + "; use permutation sampling");
    }
    if (values.size() != (std::size_t{1} << p)) throw Error(ErrorKind::InvalidArgument, "need F for all 2^P coalitions");
    AttributionResult r;
    r.method = "exact";
    const std::uint64_t all = full_mask(p);
    for (std::size_t k = 0; k < p; ++k) {
        r.players.push_back(players.players[k].name);
        const std::uint64_t bit = 1ULL << k;
        double sum = 0.0;
        for (std::uint64_t c = 0; c <= all; ++c) {
            if (c & bit) continue;
            const int size = std::popcount(c);
            sum += (values[c | bit] - values[c]) / binomial(static_cast<int>(p) - 1, size);
        }
        r.phi.push_back(sum * (1.0 / static_cast<double>(p)));
        r.standard_errors.push_back(0.0);
        r.standalone.push_back(values[all] - values[all & ~bit]);
    }
    for (std::uint64_t c = 0; c <= all; ++c) r.characteristic_values.emplace_back(c, values[c]);
    r.grand_value = values[all] - values[0];
    double total = 0.0;
    for (double f : r.phi) total += f;
    r.efficiency_gap = std::abs(total - r.grand_value);
    return r;
}

std::pair<double, double> shapley_two_player(double f_none, double f_first, double f_second, double f_both) {
    // V_k,1: other player on; V_k,2: other player off
    const double v11 = f_both - f_second;
    const double v12 = f_first - f_none;
    const double v21 = f_both - f_first;
    const double v22 = f_second - f_none;
    return {(v12 + v11) * 0.5, (v22 + v21) * 0.5};
}

AttributionResult shapley_sampled(const PlayerSet& players, const CoalitionValue& value, int permutations,
                                  std::uint64_t seed) {
    const std::size_t p = players.size();
    if (p == 0) throw Error(ErrorKind::InvalidPlayers, "no players");
    if (permutations < 1) throw Error(ErrorKind::InvalidArgument, "permutations must be >= 1");
    std::vector<std::pair<std::uint64_t, double>> seen;
    auto f = [&](std::uint64_t mask) {
        for (const auto& [m, v] : seen) {
            if (m == mask) return v;
        }
        const double v = value(mask);
        seen.emplace_back(mask, v);
        return v;
    };
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffULL), static_cast<std::uint32_t>(seed >> 32)};
    std::mt19937_64 eng(seq);
    std::vector<std::size_t> order(p);
    std::vector<double> mean(p, 0.0);
    std::vector<double> m2(p, 0.0);
    for (int m = 1; m <= permutations; ++m) {
        for (std::size_t i = 0; i < p; ++i) order[i] = i;
        for (std::size_t i = p; i > 1; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i - 1);
            std::swap(order[i - 1], order[pick(eng)]);
        }
        std::uint64_t mask = 0;
        double prev = f(mask);
        for (std::size_t k : order) {
            mask |= 1ULL << k;
            const double cur = f(mask);
            const double gain = cur - prev;
            const double d = gain - mean[k];
            mean[k] += d / m;
            m2[k] += d * (gain - mean[k]);
            prev = cur;
        }
    }
    AttributionResult r;
    r.method = "sampled";
    r.permutations = permutations;
    const std::uint64_t all = full_mask(p);
    const double f_all = f(all);
    for (std::size_t k = 0; k < p; ++k) {
        r.players.push_back(players.players[k].name);
        r.phi.push_back(mean[k]);
        const double var = permutations > 1 ? m2[k] / (permutations - 1) : 0.0;
        r.standard_errors.push_back(std::sqrt(var / permutations));
        r.standalone.push_back(f_all - f(all & ~(1ULL << k)));
    }
    r.grand_value = f_all - f(0);
    double total = 0.0;
    for (double x : r.phi) total += x;
    r.efficiency_gap = std::abs(total - r.grand_value);
    std::sort(seen.begin(), seen.end());
    r.characteristic_values = std::move(seen);
    return r;
}

void write_shapley_csv(std::ostream& out, const AttributionResult& r) {
    out << "player,phi,share,method,se\n";
    for (std::size_t k = 0; k < r.players.size(); ++k) {
        out << r.players[k] << ',' << format_double(r.phi[k]) << ',' << format_double(share_of(r.phi[k], r.grand_value))
            << ',' << r.method << ',' << format_double(r.standard_errors[k]) << '\n';
    }
}

void write_standalone_csv(std::ostream& out, const AttributionResult& r) {
    out << "player,standalone_delta,share\n";
    for (std::size_t k = 0; k < r.players.size(); ++k) {
        out << r.players[k] << ',' << format_double(r.standalone[k]) << ','
            << format_double(share_of(r.standalone[k], r.grand_value)) << '\n';
    }
}

void write_characteristic_csv(std::ostream& out, const AttributionResult& r) {
    out << "coalition,members,value\n";
    for (const auto& [mask, v] : r.characteristic_values) {
        out << mask << ',' << members_label(r, mask) << ',' << format_double(v) << '\n';
    }
}

}  // namespace dcm
