#include "smartgen/simgen.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

#include "smartgen/error.hpp"
#include "smartgen/rng.hpp"
#include "smartgen/synth.hpp"

namespace smartgen {

namespace {

constexpr int kMinutesPerDay = 24 * 60;

std::string lower(std::string_view s) {
    std::string out{s};
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool mentions(std::string_view text, std::string_view word) { return lower(text).find(word) != std::string::npos; }

int first_number(std::string_view text) {
    for (char c : text) {
        if (c >= '0' && c <= '9') return c - '0';
    }
    if (mentions(text, "two") || mentions(text, "couple") || mentions(text, "family")) return 2;
    return 1;
}

// Resolves a template step into a concrete token for the season.
std::string resolve(const std::string& token, Season season, bool use_fan) {
    if (token.empty() || token[0] != '@') return token;
    if (season == Season::winter) {
        if (token == "@climate_on") return "Heater:switch_on";
        if (token == "@climate_adjust") return "Heater:set_temperature";
        return "Heater:switch_off";
    }
    const std::string device = use_fan ? "Fan" : "AirConditioner";
    if (token == "@climate_on") return device + ":switch_on";
    if (token == "@climate_adjust") return use_fan ? "Fan:set_speed" : "AirConditioner:mode_cool";
    return device + ":switch_off";
}

TemplateStep step(std::string token, int gap_min, int gap_max) { return {std::move(token), gap_min, gap_max}; }

} // namespace

std::string HouseholdContext::describe(TransitionKind kind) const {
    switch (kind) {
    case TransitionKind::ST: return season == Season::winter ? "winter" : "summer";
    case TransitionKind::TT: return schedule == Schedule::day ? "a day-time schedule" : "a night-time schedule";
    case TransitionKind::NT: return occupants <= 1 ? "a home with 1 occupant" : "a home with 2 occupants";
    }
    return "";
}

void HouseholdProfile::validate() const {
    if (routines.empty()) throw ContractError("household profile has no routines");
    if (!(noise_rate >= 0.0 && noise_rate <= 0.5)) throw ContractError("noise_rate must lie in [0, 0.5]");
    if (context.occupants < 1) throw ContractError("a household needs at least one occupant");
    for (const auto& r : routines) {
        if (r.start_minute < 0 || r.end_minute < r.start_minute || r.end_minute >= kMinutesPerDay)
            throw ContractError("routine window must lie within one day");
        if (r.templates.empty() || r.draws < 1) throw ContractError("routine needs templates and draws >= 1");
        for (const auto& t : r.templates) {
            if (!(t.weight > 0.0)) throw ContractError("template '" + t.name + "' needs a positive weight");
            if (t.steps.empty()) throw ContractError("template '" + t.name + "' has no steps");
        }
    }
}

HouseholdProfile reference_profile(HouseholdContext ctx, std::uint64_t seed) {
    HouseholdProfile p;
    p.catalog = bundled_catalog("FR");
    p.context = ctx;
    p.seed = seed;

    Routine morning{6 * 60 + 30, 7 * 60 + 30, 1, 0.0, {}};
    morning.templates.push_back({"wake_up", 3.0,
                                 {step("Light:switch_on", 0, 0), step("Blind:open", 2, 5),
                                  step("@climate_on", 1, 3), step("Microwave:start", 5, 10),
                                  step("Microwave:stop", 2, 4), step("Television:switch_on", 1, 5),
                                  step("Television:switch_off", 10, 25), step("@climate_off", 1, 5),
                                  step("Light:switch_off", 1, 3), step("SmartLock:lock", 1, 3)}});
    morning.templates.push_back({"breakfast", 2.0,
                                 {step("Light:switch_on", 0, 0), step("@climate_on", 1, 2),
                                  step("Refrigerator:door_open", 3, 8), step("Refrigerator:door_close", 1, 2),
                                  step("Oven:start", 1, 4), step("Oven:stop", 10, 20),
                                  step("NetworkAudio:play", 1, 3), step("NetworkAudio:stop", 15, 30),
                                  step("@climate_off", 1, 3), step("Light:switch_off", 1, 2)}});

    Routine midday{12 * 60, 12 * 60 + 45, 1, 0.5, {}};
    midday.templates.push_back({"lunch", 2.0,
                                {step("Refrigerator:door_open", 0, 0), step("Refrigerator:door_close", 1, 2),
                                 step("Microwave:start", 1, 3), step("Microwave:stop", 2, 5),
                                 step("Computer:switch_on", 5, 15), step("Computer:switch_off", 20, 60)}});
    midday.templates.push_back({"cleaning", 1.0,
                                {step("RobotCleaner:start", 0, 0), step("Washer:start", 2, 10),
                                 step("RobotCleaner:dock", 30, 50), step("Washer:stop", 10, 30)}});

    Routine evening{18 * 60, 19 * 60, 1, 0.0, {}};
    evening.templates.push_back({"tv_evening", 3.0,
                                 {step("SmartLock:unlock", 0, 0), step("Light:switch_on", 1, 2),
                                  step("@climate_on", 1, 3), step("Television:switch_on", 2, 10),
                                  step("Television:change_channel", 5, 20), step("@climate_adjust", 5, 15),
                                  step("Television:change_channel", 5, 20), step("Television:switch_off", 20, 40),
                                  step("@climate_off", 1, 5), step("Light:switch_off", 1, 3)}});
    evening.templates.push_back({"cooking", 2.0,
                                 {step("SmartLock:unlock", 0, 0), step("Light:switch_on", 1, 2),
                                  step("Refrigerator:door_open", 2, 6), step("Refrigerator:door_close", 1, 2),
                                  step("Oven:start", 1, 3), step("Oven:stop", 20, 40),
                                  step("Dishwasher:start", 10, 20), step("Dishwasher:stop", 40, 60),
                                  step("Light:switch_off", 1, 5)}});
    evening.templates.push_back({"laundry", 1.0,
                                 {step("SmartLock:unlock", 0, 0), step("Washer:start", 2, 10),
                                  step("Washer:stop", 30, 50), step("Dryer:start", 1, 5),
                                  step("Dryer:stop", 30, 50), step("ClothingCareMachine:start", 1, 5),
                                  step("ClothingCareMachine:stop", 10, 20)}});

    Routine bedtime{22 * 60, 22 * 60 + 45, 1, 0.0, {}};
    bedtime.templates.push_back({"bedtime", 1.0,
                                 {step("Blind:close", 0, 0), step("SmartLock:lock", 1, 3),
                                  step("Light:switch_on", 1, 2), step("Light:switch_off", 5, 15)}});

    p.routines = {morning, midday, evening, bedtime};
    return p;
}

Dataset generate_corpus(const HouseholdProfile& p, int days) {
    p.validate();
    if (days < 1) throw ContractError("generate_corpus: days must be >= 1");
    const std::string date =
        !p.start_date.empty() ? p.start_date : (p.context.season == Season::winter ? "2022-01-03" : "2022-07-04");
    const auto origin = parse_timestamp(date + " 00:00");
    if (!origin) throw ConfigError("bad simulator start date '" + date + "'");
    const auto catalog_tokens = p.catalog.tokens();
    const Minutes shift{p.context.schedule == Schedule::night ? 12 * 60 : 0};
    const int occupants = std::max(1, std::min(p.context.occupants, 2));

    Dataset ds;
    ds.catalog_id = p.catalog.name();
    Rng rng(derive_seed(p.seed, "corpus"));
    for (int day = 0; day < days; ++day) {
        const Timestamp midnight = *origin + Minutes{day * kMinutesPerDay};
        std::vector<Behavior> events;
        for (const auto& routine : p.routines) {
            if (rng.bernoulli(routine.skip_probability)) continue;
            std::vector<double> weights;
            for (const auto& t : routine.templates) weights.push_back(t.weight);
            for (int draw = 0; draw < routine.draws * occupants; ++draw) {
                const auto& tpl = routine.templates[rng.weighted(weights)];
                const bool use_fan = rng.bernoulli(0.5);
                int minute = routine.start_minute +
                             static_cast<int>(rng.below(static_cast<std::size_t>(routine.end_minute -
                                                                                 routine.start_minute + 1)));
                for (std::size_t k = 0; k < tpl.steps.size(); ++k) {
                    const auto& st = tpl.steps[k];
                    if (k > 0)
                        minute += st.gap_min + static_cast<int>(rng.below(static_cast<std::size_t>(
                                                   std::max(0, st.gap_max - st.gap_min) + 1)));
                    auto [device, action] = split_token(resolve(st.token, p.context.season, use_fan));
                    const Timestamp t = midnight + Minutes{minute} + shift;
                    events.push_back(Behavior{t, device, action});
                    if (rng.bernoulli(p.noise_rate)) {
                        auto [nd, na] = split_token(catalog_tokens[rng.below(catalog_tokens.size())]);
                        events.push_back(Behavior{t + Minutes{1}, nd, na});
                    }
                }
            }
        }
        std::stable_sort(events.begin(), events.end(),
                         [](const Behavior& a, const Behavior& b) { return a.timestamp < b.timestamp; });
        BehaviorSequence s;
        char id[32];
        std::snprintf(id, sizeof id, "day-%04d", day);
        s.id = id;
        s.origin = Origin::raw;
        s.behaviors = std::move(events);
        ds.sequences.push_back(std::move(s));
    }
    return ds;
}

CorruptionResult corrupt_corpus(const Dataset& ds, double fraction, const DeviceCatalog& cat, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw ContractError("corrupt_corpus: fraction must lie in [0, 1]");
    CorruptionResult r;
    r.dataset = ds;
    const auto tokens = cat.tokens();
    if (tokens.empty()) throw ContractError("corrupt_corpus: empty catalog");
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, "corrupt"));
    rng.shuffle(order);
    const auto count = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(ds.size())));
    for (std::size_t k = 0; k < count; ++k) {
        auto& s = r.dataset.sequences[order[k]];
        for (auto& b : s.behaviors) {
            auto [d, a] = split_token(tokens[rng.below(tokens.size())]);
            b.device = d;
            b.action = a;
        }
        r.corrupted_ids.insert(s.id);
    }
    return r;
}

namespace {

enum class Change { none, to_summer, to_winter, to_night, to_day, more_people, fewer_people };

Change classify(const std::string& e_ori, const std::string& e_new) {
    if (mentions(e_new, "summer") && !mentions(e_ori, "summer")) return Change::to_summer;
    if (mentions(e_new, "winter") && !mentions(e_ori, "winter")) return Change::to_winter;
    if (mentions(e_new, "night") && !mentions(e_ori, "night")) return Change::to_night;
    if (mentions(e_new, "day") && !mentions(e_ori, "day")) return Change::to_day;
    if (mentions(e_new, "occupant") || mentions(e_new, "people") || mentions(e_new, "person")) {
        const int before = first_number(e_ori);
        const int after = first_number(e_new);
        if (after > before) return Change::more_people;
        if (after < before) return Change::fewer_people;
    }
    return Change::none;
}

bool is_cooling(const Behavior& b) { return b.device == "AirConditioner" || b.device == "Fan"; }

BehaviorSequence transform(const BehaviorSequence& in, Change change, std::size_t index, const DeviceCatalog& cat) {
    BehaviorSequence out = in;
    switch (change) {
    case Change::to_summer: {
        const bool use_fan = (fnv1a(std::to_string(index)) & 1u) != 0;
        const std::string device = use_fan ? "Fan" : "AirConditioner";
        for (auto& b : out.behaviors) {
            if (b.device != "Heater") continue;
            b.device = device;
            if (b.action != "switch_on" && b.action != "switch_off")
                b.action = use_fan ? "set_speed" : "set_temperature";
        }
        break;
    }
    case Change::to_winter:
        for (auto& b : out.behaviors) {
            if (!is_cooling(b)) continue;
            b.device = "Heater";
            if (b.action != "switch_on" && b.action != "switch_off") b.action = "set_temperature";
        }
        break;
    case Change::to_night:
    case Change::to_day:
        for (auto& b : out.behaviors) b.timestamp += Minutes{12 * 60};
        break;
    case Change::more_people: {
        std::vector<Behavior> doubled;
        for (std::size_t i = 0; i < in.behaviors.size(); ++i) {
            const auto& b = in.behaviors[i];
            doubled.push_back(b);
            Behavior copy = b;
            copy.timestamp += Minutes{1 + static_cast<int>(fnv1a(std::to_string(index * 131 + i)) % 5)};
            doubled.push_back(copy);
        }
        std::stable_sort(doubled.begin(), doubled.end(),
                         [](const Behavior& a, const Behavior& b) { return a.timestamp < b.timestamp; });
        out.behaviors = std::move(doubled);
        break;
    }
    case Change::fewer_people: {
        std::vector<Behavior> thinned;
        for (std::size_t i = 0; i < in.behaviors.size(); i += 2) thinned.push_back(in.behaviors[i]);
        out.behaviors = std::move(thinned);
        break;
    }
    case Change::none: break;
    }
    std::erase_if(out.behaviors, [&](const Behavior& b) { return !cat.allows(b.device, b.action); });
    return out;
}

} // namespace

std::string mock_llm(const PromptBundle& bundle, const HouseholdProfile& p_new) {
    const PromptContents pc = parse_prompt(bundle);
    if (pc.e_ori.empty() || pc.e_new.empty()) throw ContractError("mock model: prompt lacks an environment");
    const Change change = classify(pc.e_ori, pc.e_new);
    Dataset out;
    for (std::size_t i = 0; i < pc.sequences.size(); ++i) {
        auto s = transform(pc.sequences.sequences[i], change, i, p_new.catalog);
        if (!s.empty()) out.sequences.push_back(std::move(s));
    }
    return "Here are the adapted behavior sequences.\n" + render_seq_block(out) + "\n";
}

std::string MockLlm::complete(const PromptBundle& bundle) {
    ++calls_;
    return mock_llm(bundle, target_);
}

} // namespace smartgen
