#include <doctest.h>

#include "helpers.hpp"
#include "smartgen/rng.hpp"
#include "smartgen/segment.hpp"

using namespace smartgen;
using testing::seq;

namespace {

SplitConfig hours(int dt, int t, int grace = -1) {
    SplitConfig c;
    c.dt_max = Minutes{dt * 60};
    c.t_max = Minutes{t * 60};
    c.grace = Minutes{(grace < 0 ? 2 * dt : grace) * 60};
    return c;
}

BehaviorSequence random_sequence(Rng& rng, std::size_t n) {
    BehaviorSequence s{"r", Origin::raw, {}};
    Timestamp t = testing::at("2022-01-01 00:00");
    for (std::size_t i = 0; i < n; ++i) {
        t += Minutes{static_cast<int>(rng.below(12 * 60))};
        s.behaviors.push_back({t, "Light", rng.bernoulli(0.5) ? "switch_on" : "switch_off"});
    }
    return s;
}

std::vector<Behavior> flatten(const std::vector<BehaviorSequence>& parts) {
    std::vector<Behavior> out;
    for (const auto& p : parts) out.insert(out.end(), p.behaviors.begin(), p.behaviors.end());
    return out;
}

} // namespace

TEST_CASE("gap above dt_max starts a new sequence") {
    const auto raw = seq("raw", {"2022-01-01 00:00 Light:switch_on", "2022-01-01 07:00 Light:switch_off"});
    const auto parts = split(raw, hours(6, 24));
    REQUIRE(parts.size() == 2);
    CHECK(parts[0].id == "raw-0");
    CHECK(parts[1].id == "raw-1");
    CHECK(parts[1].origin == Origin::segmented);
}

TEST_CASE("gap equal to dt_max stays together") {
    const auto raw = seq("raw", {"2022-01-01 00:00 Light:switch_on", "2022-01-01 06:00 Light:switch_off"});
    CHECK(split(raw, hours(6, 24)).size() == 1);
}

TEST_CASE("duration above t_max starts a new sequence") {
    std::vector<std::string> entries;
    for (int h = 0; h <= 30; h += 5) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "2022-01-0%d %02d:00 Light:switch_on", 1 + h / 24, h % 24);
        entries.push_back(buf);
    }
    // 0,5,...,20 fit in 24 h; 25 and 30 start the next sequence.
    const auto parts = split(seq("raw", entries), hours(6, 24));
    REQUIRE(parts.size() == 2);
    CHECK(parts[0].size() == 5);
    CHECK(parts[1].size() == 2);
}

TEST_CASE("semantic override keeps an open pair together") {
    auto cfg = hours(6, 24, 18);
    cfg.pairing = {{"WaterValve", "open", "close"}};
    const auto raw = seq("raw", {"2022-01-01 00:00 WaterValve:open", "2022-01-01 07:00 WaterValve:close"});
    const auto r = split_detailed(raw, cfg);
    REQUIRE(r.sequences.size() == 1);
    REQUIRE(r.forced_appends.size() == 1);
    CHECK(r.forced_appends[0] == std::pair<std::size_t, std::size_t>{0, 1});
}

TEST_CASE("semantic_check cases") {
    auto cfg = hours(6, 24, 18);
    cfg.pairing = {{"WaterValve", "open", "close"}};
    const auto open = seq("c", {"2022-01-01 10:00 WaterValve:open"});
    const Behavior close{testing::at("2022-01-01 10:05"), "WaterValve", "close"};
    CHECK(semantic_check(open, close, cfg));
    // Outside the grace window.
    const Behavior late{testing::at("2022-01-02 05:00"), "WaterValve", "close"};
    CHECK_FALSE(semantic_check(open, late, cfg));
    // Already closed.
    const auto closed = seq("c", {"2022-01-01 10:00 WaterValve:open", "2022-01-01 10:01 WaterValve:close"});
    CHECK_FALSE(semantic_check(closed, close, cfg));
    // Not a closer.
    CHECK_FALSE(semantic_check(open, Behavior{close.timestamp, "WaterValve", "open"}, cfg));
    CHECK_FALSE(semantic_check(open, Behavior{close.timestamp, "Light", "close"}, cfg));
    CHECK_THROWS_AS(semantic_check(BehaviorSequence{}, close, cfg), ContractError);
}

TEST_CASE("config validation") {
    CHECK_THROWS_AS(hours(0, 24).validate(), ConfigError);
    CHECK_THROWS_AS(hours(30, 24).validate(), ConfigError);
    CHECK_THROWS_AS(hours(9, 24, 5).validate(), ConfigError);
    auto cfg = hours(9, 24);
    cfg.pairing = {{"Blind", "open", "open"}};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("unsorted or empty input is rejected") {
    CHECK_THROWS_AS(split(BehaviorSequence{"x", Origin::raw, {}}, SplitConfig{}), ContractError);
    const auto unsorted = seq("x", {"2022-01-01 10:00 Light:switch_on", "2022-01-01 09:00 Light:switch_off"});
    CHECK_THROWS_AS(split(unsorted, SplitConfig{}), ContractError);
}

TEST_CASE("partition property and monotone refinement on random input") {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const auto raw = random_sequence(rng, 1 + rng.below(80));
        const auto cfg = hours(9, 24);
        const auto parts = split(raw, cfg);
        CHECK(flatten(parts) == raw.behaviors);
        for (const auto& p : parts) {
            REQUIRE_FALSE(p.empty());
            CHECK(p.behaviors.back().timestamp - p.behaviors.front().timestamp <= cfg.t_max);
            for (std::size_t i = 1; i < p.size(); ++i)
                CHECK(p.behaviors[i].timestamp - p.behaviors[i - 1].timestamp <= cfg.dt_max);
        }
        CHECK(split(raw, hours(6, 24)).size() >= parts.size());
    }
}

TEST_CASE("split_dataset counts forced appends") {
    auto cfg = hours(6, 24, 18);
    cfg.pairing = {{"WaterValve", "open", "close"}};
    const auto ds = testing::dataset(
        {seq("a", {"2022-01-01 00:00 WaterValve:open", "2022-01-01 07:00 WaterValve:close"}),
         seq("b", {"2022-01-01 00:00 Light:switch_on", "2022-01-01 07:00 Light:switch_off"})});
    std::size_t forced = 0;
    const auto out = split_dataset(ds, cfg, &forced);
    CHECK(out.size() == 3);
    CHECK(forced == 1);
    CHECK(out.sequences[0].id == "a-0");
    CHECK(out.sequences[2].id == "b-1");
}

TEST_CASE("pair rule text") {
    const auto rules = parse_pair_rules(" WaterValve:open/close ; Blind:open/close;");
    REQUIRE(rules.size() == 2);
    CHECK(rules[1].device == "Blind");
    CHECK(rules[0].closer == "close");
    CHECK(format_pair_rules(rules) == "WaterValve:open/close; Blind:open/close");
    CHECK(parse_pair_rules("").empty());
    CHECK_THROWS_AS(parse_pair_rules("WaterValve-open"), ConfigError);
}
