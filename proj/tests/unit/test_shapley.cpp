#include <doctest.h>

#include <sstream>

#include "dcm/error.hpp"
#include "dcm/scorer.hpp"
#include "dcm/shapley.hpp"
#include "dcm/synth.hpp"
#include "support/fixtures.hpp"

using namespace dcm;

namespace {

ErrorKind players_error(const char* text, const ModelConfig& c) {
    try {
        parse_players(text, c);
    } catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::IoError;
}

}  // namespace

TEST_CASE("player parsing") {
    const auto c = synth_config(testing::small_spec());
    const auto p = parse_players(R"({"players":[{"name":"a","group":"channel0"},{"name":"b","variables":["e1"],
                                      "baseline":{"mode":"scale","value":0.5}}],"outcome_group":"product0"})", c);
    REQUIRE(p.size() == 2);
    CHECK(p.players[1].baseline_mode == ShockMode::Scale);
    CHECK(p.outcome_group == "product0");
    CHECK(parse_players(R"([{"name":"a","group":"channel0"}])", c).size() == 1);

    CHECK(players_error(R"([{"name":"a","group":"es_all"},{"name":"b","group":"channel0"}])", c) == ErrorKind::InvalidPlayers);
    CHECK(players_error(R"([{"name":"a","group":"channel0"},{"name":"a","group":"channel1"}])", c) == ErrorKind::InvalidPlayers);
    CHECK(players_error(R"([{"name":"a","group":"nope"}])", c) == ErrorKind::UnknownGroup);
    CHECK(players_error(R"({"players":[{"name":"a","group":"channel0"}],"outcome_group":"nope"})", c) == ErrorKind::UnknownGroup);

    auto big = testing::small_spec();
    big.n_es = 64;
    const auto bc = synth_config(big);
    std::string many = "[";
    for (int k = 0; k < 64; ++k) many += (k ? "," : "") + std::string(R"({"name":"p)") + std::to_string(k) + R"(","variables":["e)" + std::to_string(k) + R"("]})";
    many += "]";
    CHECK(players_error(many.c_str(), bc) == ErrorKind::TooManyPlayers);
}

TEST_CASE("characteristic values at the extremes") {
    const auto data = generate_panel(testing::small_spec(41));
    const auto players = parse_players(R"([{"name":"c0","group":"channel0"},{"name":"c1","group":"channel1"}])", data.config);
    const auto all_off = testing::remove_group("es_all", data.config.n_periods);
    const auto r = score_counterfactual(data.truth, data.panel, all_off);
    CHECK(characteristic_value(data.truth, data.panel, players, 0b11) == doctest::Approx(r.total_factual()).epsilon(1e-12));
    CHECK(characteristic_value(data.truth, data.panel, players, 0b00) ==
          doctest::Approx(r.total_counterfactual()).epsilon(1e-12));
}

TEST_CASE("single player gets the whole value") {
    const auto data = generate_panel(testing::small_spec(42));
    const auto players = parse_players(R"([{"name":"es","group":"es_all"}])", data.config);
    CharacteristicCache cache(data.truth, data.panel, players);
    const auto values = cache.all_coalitions();
    const auto exact = shapley_exact(players, values);
    CHECK(exact.phi[0] == values[1] - values[0]);
    CHECK(exact.method == "exact");
    const auto sampled = shapley_sampled(players, std::ref(cache), 7, 1);
    CHECK(sampled.phi[0] == values[1] - values[0]);
}

TEST_CASE("two-player closed form equals enumeration") {
    const std::vector<double> v{1.0, 4.0, 2.5, 9.0};
    PlayerSet p;
    p.players = {{"a", {0}}, {"b", {1}}};
    const auto exact = shapley_exact(p, v);
    const auto [a, b] = shapley_two_player(v[0], v[1], v[2], v[3]);
    CHECK(exact.phi[0] == doctest::Approx(a).epsilon(1e-15));
    CHECK(exact.phi[1] == doctest::Approx(b).epsilon(1e-15));
    CHECK(a + b == doctest::Approx(v[3] - v[0]));
    CHECK(exact.standalone[0] == v[3] - v[2]);
}

TEST_CASE("efficiency and symmetry on a synthetic economy") {
    auto s = testing::small_spec(43);
    s.n_es = 3;
    s.n_channels = 3;
    const auto data = generate_panel(s);
    const auto players =
        parse_players(R"([{"name":"a","group":"channel0"},{"name":"b","group":"channel1"},{"name":"c","group":"channel2"}])",
                      data.config);
    CharacteristicCache cache(data.truth, data.panel, players);
    const auto values = cache.all_coalitions();
    CHECK(cache.evaluations() == 8);
    const auto r = shapley_exact(players, values);
    double sum = 0.0;
    for (double x : r.phi) sum += x;
    CHECK(std::abs(sum - r.grand_value) <= 1e-9 * std::abs(r.grand_value));
    CHECK(r.efficiency_gap <= 1e-9 * std::abs(r.grand_value));
}

TEST_CASE("additive game: phi equals standalone value") {
    PlayerSet p;
    p.players = {{"a", {0}}, {"b", {1}}, {"c", {2}}};
    const double w[3] = {1.5, -2.0, 4.0};
    std::vector<double> v(8);
    for (std::uint64_t m = 0; m < 8; ++m)
        for (int k = 0; k < 3; ++k)
            if (m >> k & 1) v[m] += w[k];
    const auto r = shapley_exact(p, v);
    for (int k = 0; k < 3; ++k) CHECK(r.phi[static_cast<std::size_t>(k)] == doctest::Approx(w[k]).epsilon(1e-14));
}

TEST_CASE("sampling is seeded and converges") {
    PlayerSet p;
    p.players = {{"a", {0}}, {"b", {1}}, {"c", {2}}};
    auto f = [](std::uint64_t m) { return double(m & 1) + 2.0 * double(m >> 1 & 1) * double(m >> 2 & 1); };
    const auto one = shapley_sampled(p, f, 1, 5);
    const auto again = shapley_sampled(p, f, 1, 5);
    CHECK(one.phi == again.phi);
    std::vector<double> v(8);
    for (std::uint64_t m = 0; m < 8; ++m) v[m] = f(m);
    const auto exact = shapley_exact(p, v);
    const auto many = shapley_sampled(p, f, 20000, 9);
    CHECK(many.method == "sampled");
    CHECK(many.permutations == 20000);
    for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(many.phi[k] - exact.phi[k]) < 3.0 * many.standard_errors[k] + 1e-12);
}

TEST_CASE("attribution CSV headers") {
    PlayerSet p;
    p.players = {{"a", {0}}, {"b", {1}}};
    const auto r = shapley_exact(p, {0.0, 1.0, 2.0, 3.0});
    std::ostringstream a, b, c;
    write_shapley_csv(a, r);
    write_standalone_csv(b, r);
    write_characteristic_csv(c, r);
    CHECK(a.str().rfind("player,phi,share,method,se\n", 0) == 0);
    CHECK(b.str().rfind("player,standalone_delta,share\n", 0) == 0);
    CHECK(c.str().rfind("coalition,members,value\n", 0) == 0);
}
