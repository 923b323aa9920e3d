#pragma once

#include <string>
#include <vector>

#include "smartgen/core.hpp"

namespace smartgen {

/// A device whose opener/closer actions must stay in one sequence
/// (e.g. a water valve opened then closed).
struct PairRule {
    std::string device;
    std::string opener;
    std::string closer;
};

struct SplitConfig {
    Minutes dt_max{9 * 60};  // max gap between consecutive behaviors
    Minutes t_max{24 * 60};  // max duration of one sequence
    Minutes grace{18 * 60};  // max opener-to-closer span for a semantic override
    std::vector<PairRule> pairing;

    /// Throws ConfigError unless 0 < dt_max <= t_max, grace >= dt_max and
    /// every rule has distinct opener/closer.
    void validate() const;
};

/// True iff `current` holds an opener of a rule on next.device with no
/// closer after it, `next` is that rule's closer, and the opener lies at
/// most `grace` before `next`.
bool semantic_check(const BehaviorSequence& current, const Behavior& next, const SplitConfig& cfg);

struct SplitResult {
    std::vector<BehaviorSequence> sequences;
    /// (output sequence index, position) of behaviors appended through the
    /// semantic override, bypassing the time checks.
    std::vector<std::pair<std::size_t, std::size_t>> forced_appends;
};

/// Cuts a sorted raw sequence into segments. Output ids are
/// `<raw id>-<index>`; throws ContractError on unsorted or empty input.
SplitResult split_detailed(const BehaviorSequence& raw, const SplitConfig& cfg);
std::vector<BehaviorSequence> split(const BehaviorSequence& raw, const SplitConfig& cfg);

/// Splits every sequence of a dataset, preserving order.
Dataset split_dataset(const Dataset& ds, const SplitConfig& cfg, std::size_t* forced_appends = nullptr);

/// Parses `Device:opener/closer` entries separated by `;`.
std::vector<PairRule> parse_pair_rules(const std::string& text);
std::string format_pair_rules(const std::vector<PairRule>& rules);

} // namespace smartgen
