#pragma once

#include <atomic>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "smartgen/core.hpp"
#include "smartgen/llm_client.hpp"

namespace smartgen {

enum class Season { winter, summer };
enum class Schedule { day, night };

struct HouseholdContext {
    Season season = Season::winter;
    Schedule schedule = Schedule::day;
    int occupants = 1;  // 1, or 2 meaning "two or more"

    /// Free-text environment description, e.g. "winter".
    std::string describe(TransitionKind kind) const;
};

/// One step of a routine: `Device:action` (or the placeholders
/// `@climate_on` / `@climate_adjust` / `@climate_off`, resolved per season)
/// followed `gap_min..gap_max` minutes after the previous step.
struct TemplateStep {
    std::string token;
    int gap_min = 1;
    int gap_max = 10;
};

struct BehaviorTemplate {
    std::string name;
    double weight = 1.0;
    std::vector<TemplateStep> steps;
};

struct Routine {
    int start_minute = 0;  // minutes after midnight, day schedule
    int end_minute = 0;    // latest start of the first step
    /// Templates drawn per occupant in this window.
    int draws = 1;
    /// Probability that a window is skipped on a given day.
    double skip_probability = 0.0;
    std::vector<BehaviorTemplate> templates;
};

struct HouseholdProfile {
    DeviceCatalog catalog;
    std::vector<Routine> routines;
    HouseholdContext context;
    double noise_rate = 0.02;
    std::uint64_t seed = 1;
    std::string start_date;  // empty: a season-appropriate default

    /// Throws ContractError on empty routines, non-positive weights,
    /// windows outside the day or noise_rate outside [0, 0.5].
    void validate() const;
};

/// Reference household over the FR catalog with morning, midday, evening
/// and bedtime routines.
HouseholdProfile reference_profile(HouseholdContext ctx = {}, std::uint64_t seed = 1);

/// One raw sequence per simulated day (`day-0000`, ...).
Dataset generate_corpus(const HouseholdProfile& p, int days);

struct CorruptionResult {
    Dataset dataset;
    std::set<std::string> corrupted_ids;
};

/// Replaces every behavior of a seeded `fraction` of the sequences with a
/// uniformly drawn catalog-valid (device, action); timestamps are kept.
CorruptionResult corrupt_corpus(const Dataset& ds, double fraction, const DeviceCatalog& cat, std::uint64_t seed);

/// Deterministic stand-in for the language model. Reads the sequences out
/// of the prompt and applies the declared context change: season
/// (heating <-> cooling devices), schedule (every behavior shifted 12 h)
/// or occupancy (jittered duplicates for more occupants).
class MockLlm final : public LanguageModel {
public:
    explicit MockLlm(HouseholdProfile target) : target_(std::move(target)) {}

    /// Throws ContractError when the prompt lacks either environment.
    std::string complete(const PromptBundle& bundle) override;

    int calls() const { return calls_.load(); }

private:
    HouseholdProfile target_;
    std::atomic<int> calls_{0};
};

/// Same as MockLlm::complete, without the call counter.
std::string mock_llm(const PromptBundle& bundle, const HouseholdProfile& p_new);

} // namespace smartgen
