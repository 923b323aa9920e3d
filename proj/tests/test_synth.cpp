#include <doctest.h>

#include "helpers.hpp"
#include "smartgen/graph.hpp"
#include "smartgen/synth.hpp"

using namespace smartgen;
using testing::seq;

namespace {

Dataset sample() {
    return testing::dataset({seq("a", {"2022-01-03 06:30 Light:switch_on", "2022-01-03 06:32 Heater:switch_on"}),
                             seq("b", {"2022-01-03 18:00 Television:switch_on"})});
}

ContextTransition winter_to_summer() { return {TransitionKind::ST, "winter", "summer"}; }

} // namespace

TEST_CASE("prompt carries every section and the inputs") {
    const auto cat = bundled_catalog("FR");
    const auto hints = top_k_hints(transition_matrix(build_graph(sample())), 5);
    const auto p = assemble_prompt(winter_to_summer(), sample(), cat, hints);
    for (const char* heading : {"## Role", "## Task Background", "## CoT Task Definition", "## Requirements"})
        CHECK(p.system_text.find(heading) != std::string::npos);
    CHECK(p.system_text.find("6. The final generated behavior sequences set is in the format of <seq") !=
          std::string::npos);
    CHECK(p.user_text.find("The original environment is winter.") != std::string::npos);
    CHECK(p.user_text.find("The new environment is summer.") != std::string::npos);
    CHECK(p.user_text.find("[2022-01-03 06:32, Heater:switch_on]") != std::string::npos);
    CHECK(p.user_text.find("Sequence 2:") != std::string::npos);
    CHECK(p.user_text.find("AirConditioner:") != std::string::npos);
    CHECK(p.user_text.find("After Light:switch_on the user often does Heater:switch_on (1 times).") !=
          std::string::npos);
    CHECK(p.temperature == doctest::Approx(0.7));
    CHECK(p == assemble_prompt(winter_to_summer(), sample(), cat, hints));

    const auto no_hints = assemble_prompt(winter_to_summer(), sample(), cat, HintSet{});
    CHECK(no_hints.user_text.find("Frequent habits") == std::string::npos);

    CHECK_THROWS_AS(assemble_prompt(winter_to_summer(), testing::dataset({}), cat, hints), ContractError);
    CHECK_THROWS_AS(assemble_prompt({TransitionKind::ST, "winter", "winter"}, sample(), cat, hints), ContractError);
}

TEST_CASE("prompt contents parse back") {
    const auto cat = bundled_catalog("FR");
    const auto p = assemble_prompt(winter_to_summer(), sample(), cat, HintSet{});
    const auto pc = parse_prompt(p);
    CHECK(pc.e_ori == "winter");
    CHECK(pc.e_new == "summer");
    REQUIRE(pc.sequences.size() == 2);
    CHECK(pc.sequences.sequences[0].behaviors == sample().sequences[0].behaviors);
    CHECK(pc.sequences.sequences[1].behaviors == sample().sequences[1].behaviors);
}

TEST_CASE("chunking") {
    std::vector<BehaviorSequence> seqs;
    for (int i = 0; i < 7; ++i) seqs.push_back(seq(std::to_string(i), {"2022-01-03 06:30 Light:switch_on"}));
    const auto chunks = chunk_dataset(testing::dataset(seqs), 3);
    REQUIRE(chunks.size() == 3);
    CHECK(chunks[2].size() == 1);
    CHECK(chunks[1].sequences[0].id == "3");
    CHECK_THROWS_AS(chunk_dataset(testing::dataset(seqs), 0), ConfigError);
}

TEST_CASE("rendered blocks parse back unchanged") {
    const auto cat = bundled_catalog("FR");
    const auto text = render_seq_block(sample());
    CHECK(text.rfind("<seq [['2022-01-03 06:30, Light, Light:switch_on', ", 0) == 0);
    const auto r = parse_response("Sure.\n" + text + "\nDone.", cat);
    CHECK(r.report.marker_found);
    CHECK(r.report.dropped.empty());
    REQUIRE(r.dataset.size() == 2);
    CHECK(r.dataset.sequences[0].id == "syn-0");
    CHECK(r.dataset.sequences[1].id == "syn-1");
    CHECK(r.dataset.sequences[0].origin == Origin::synthetic);
    CHECK(r.dataset.sequences[0].behaviors == sample().sequences[0].behaviors);
    CHECK(r.dataset.catalog_id == "FR");
}

TEST_CASE("invalid entries are dropped with a reason") {
    const auto cat = bundled_catalog("FR");
    const std::string raw =
        "<seq [['2022-08-04 18:30, Light, Light:switch_on', '2022-08-04 18:31, Jetpack, Jetpack:fly', "
        "'2022-08-04 18:32, Light, Light:explode', 'yesterday, Light, Light:switch_off', 'just words', "
        "\"07:15, Fan, Fan:switch_on\", stray], ['2022-08-04 19:00, Oven, Light:switch_on']] seq>";
    const auto r = parse_response(raw, cat, ParseOptions{"x", "2022-08-05", ""});
    REQUIRE(r.dataset.size() == 1);
    const auto& s = r.dataset.sequences[0];
    CHECK(s.id == "x-0");
    REQUIRE(s.size() == 2);
    CHECK(format_timestamp(s.behaviors[0].timestamp) == "2022-08-04 18:30");
    CHECK(format_timestamp(s.behaviors[1].timestamp) == "2022-08-05 07:15");
    std::map<std::string, int> reasons;
    for (const auto& d : r.report.dropped) reasons[d.reason]++;
    CHECK(reasons["unknown device"] == 1);
    CHECK(reasons["action/device mismatch"] == 2);
    CHECK(reasons["bad timestamp"] == 1);
    CHECK(reasons["malformed entry"] == 2);
}

TEST_CASE("missing markers and empty output") {
    const auto cat = bundled_catalog("FR");
    CHECK_THROWS_AS(parse_response("no block here", cat), ParseError);
    CHECK_THROWS_AS(parse_response("seq> then <seq", cat), ParseError);
    CHECK_THROWS_AS(parse_response("<seq [] seq>", cat), EmptyOutputError);
    CHECK_THROWS_AS(parse_response("<seq [['2022-08-04 18:31, Jetpack, Jetpack:fly']] seq>", cat), EmptyOutputError);
    // An unterminated list still yields what was read.
    const auto r = parse_response("<seq [['2022-08-04 18:30, Light, Light:switch_on' seq>", cat);
    CHECK(r.dataset.size() == 1);
}
