#include <doctest.h>

#include "helpers.hpp"

using namespace smartgen;
using testing::at;
using testing::seq;

TEST_CASE("timestamps round-trip and reject malformed text") {
    CHECK(format_timestamp(at("2022-08-04 18:30")) == "2022-08-04 18:30");
    CHECK(parse_timestamp("2022-08-04T18:30") == parse_timestamp("2022-08-04 18:30"));
    CHECK(hour_of_day(at("2022-08-04 18:30")) == 18);
    CHECK_FALSE(parse_timestamp("2022-02-30 10:00"));
    CHECK_FALSE(parse_timestamp("2022-01-01 24:00"));
    CHECK_FALSE(parse_timestamp("2022-01-01 10:00:00"));
    CHECK_FALSE(parse_timestamp("yesterday"));
    // 2022-01-01 00:00 UTC is 18993 days after the epoch.
    CHECK(at("2022-01-01 00:00").time_since_epoch().count() == 18993LL * 24 * 60);
}

TEST_CASE("split_token") {
    CHECK(split_token("Light:switch_on") == std::pair<std::string, std::string>{"Light", "switch_on"});
    CHECK(split_token("switch_on") == std::pair<std::string, std::string>{"", "switch_on"});
}

TEST_CASE("behavior log parsing sorts rows and reports bad ones") {
    const std::string log = "timestamp,device,action\n"
                            "2022-01-01 10:05,Light,Light:switch_off\n"
                            "2022-01-01 10:00,Light,switch_on\n"
                            "not a time,Light,switch_on\n"
                            "2022-01-01 10:03,Heater,Light:switch_on\n"
                            "2022-01-01 10:04,Heater\n";
    const auto r = parse_behavior_log(log, "raw-0", "FR");
    REQUIRE(r.dataset.size() == 1);
    const auto& s = r.dataset.sequences[0];
    REQUIRE(s.size() == 2);
    CHECK(s.behaviors[0].token() == "Light:switch_on");
    CHECK(s.behaviors[1].token() == "Light:switch_off");
    REQUIRE(r.row_errors.size() == 3);
    CHECK(r.row_errors[0].line == 4);
    CHECK(r.row_errors[1].line == 5);
    CHECK(r.row_errors[2].line == 6);
    CHECK(r.dataset.catalog_id == "FR");
}

TEST_CASE("behavior log errors") {
    CHECK_THROWS_AS(parse_behavior_log("2022-01-01 10:00,Light,switch_on\n"), FormatError);
    CHECK_THROWS_AS(parse_behavior_log("timestamp,device,action\nbad,row,x\n"), ContractError);
}

TEST_CASE("equal timestamps keep file order") {
    const auto r = parse_behavior_log("timestamp,device,action\n"
                                      "2022-01-01 10:00,Light,switch_on\n"
                                      "2022-01-01 10:00,Blind,open\n"
                                      "2022-01-01 09:00,Fan,switch_on\n");
    const auto& b = r.dataset.sequences[0].behaviors;
    CHECK(b[0].device == "Fan");
    CHECK(b[1].device == "Light");
    CHECK(b[2].device == "Blind");
}

TEST_CASE("serialize then parse is the identity") {
    const auto s = seq("raw-0", {"2022-01-01 10:00 Light:switch_on", "2022-01-01 11:30 Blind:open"});
    const auto back = parse_behavior_log(serialize_behavior_log(s)).dataset.sequences[0];
    CHECK(back.behaviors == s.behaviors);
}

TEST_CASE("catalog validation") {
    const auto cat = bundled_catalog("FR");
    CHECK(cat.device_count() == 33);
    CHECK(bundled_catalog("SP").device_count() == 34);
    CHECK(bundled_catalog("US").device_count() == 40);
    CHECK(cat.allows("Heater", "switch_on"));
    CHECK_FALSE(cat.allows("Heater", "open"));
    CHECK_THROWS_AS(bundled_catalog("DE"), ConfigError);

    const auto ds = testing::dataset({seq("s", {"2022-01-01 10:00 Heater:switch_on", "2022-01-01 10:01 Heater:open",
                                                "2022-01-01 10:02 Toaster:start"})});
    const auto report = validate_against_catalog(ds, cat);
    REQUIRE(report.violations.size() == 2);
    CHECK(report.violations[0].index == 1);
    CHECK(report.violations[0].reason == "action/device mismatch");
    CHECK(report.violations[1].reason == "unknown device");

    const auto wider = cat.extended("Toaster", {"start"});
    CHECK(validate_against_catalog(ds, wider).violations.size() == 1);
}

TEST_CASE("catalog invariants") {
    CHECK_THROWS_AS(DeviceCatalog("x", {{"Light", {}}}), FormatError);
    const auto j = to_json(bundled_catalog("US"));
    const auto back = catalog_from_json("US", j);
    CHECK(back.entries() == bundled_catalog("US").entries());
    for (const auto& t : back.tokens()) CHECK(t.find(':') != std::string::npos);
}

TEST_CASE("dataset JSON round-trip") {
    auto ds = testing::dataset({seq("a", {"2022-01-01 10:00 Light:switch_on"}, Origin::synthetic),
                                seq("b", {"2022-01-02 07:00 Blind:open", "2022-01-02 07:05 Blind:close"})});
    const auto back = dataset_from_json(to_json(ds));
    CHECK(back == ds);
    auto j = to_json(ds);
    j["sequences"][0]["behaviors"][0]["a"] = "Blind:open";
    CHECK_THROWS_AS(dataset_from_json(j), FormatError);
    CHECK_THROWS_AS(dataset_from_json(nlohmann::json::array()), FormatError);
}

TEST_CASE("dataset files") {
    const auto dir = testing::scratch_dir("core");
    const auto ds = testing::dataset({seq("a", {"2022-01-01 10:00 Light:switch_on"})});
    save_dataset(dir + "/nested/ds.json", ds);
    CHECK(load_dataset(dir + "/nested/ds.json") == ds);
    CHECK_THROWS_AS(load_dataset(dir + "/missing.json"), FormatError);
    write_file(dir + "/cat.json", R"({"Lamp": ["on", "off"]})");
    const auto cat = load_catalog(dir + "/cat.json");
    CHECK(cat.name() == "cat");
    CHECK(cat.allows("Lamp", "on"));
}

TEST_CASE("context transitions") {
    CHECK_THROWS_AS((ContextTransition{TransitionKind::ST, "winter", "winter"}.validate()), ContractError);
    CHECK_THROWS_AS((ContextTransition{TransitionKind::ST, "", "summer"}.validate()), ContractError);
    CHECK_NOTHROW((ContextTransition{TransitionKind::TT, "day", "night"}.validate()));
    CHECK(transition_kind_from_string("NT") == TransitionKind::NT);
    CHECK_THROWS_AS(transition_kind_from_string("XT"), ConfigError);
}

TEST_CASE("check_sequence") {
    CHECK_THROWS_AS(check_sequence(BehaviorSequence{"e", Origin::raw, {}}), ContractError);
    CHECK_THROWS_AS(check_sequence(seq("u", {"2022-01-01 10:00 Light:switch_on", "2022-01-01 09:00 Light:switch_off"})),
                    ContractError);
}

TEST_CASE("shipped catalog files match the bundled tables") {
    for (const auto& name : bundled_catalog_names()) {
        const auto file = load_catalog(std::string{SMARTGEN_SOURCE_DIR} + "/data/catalogs/" + name + ".json");
        CHECK(to_json(file) == to_json(bundled_catalog(name)));
    }
}
