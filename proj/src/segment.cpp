#include "smartgen/segment.hpp"

#include <cstdio>

#include "smartgen/error.hpp"

namespace smartgen {

void SplitConfig::validate() const {
    if (dt_max <= Minutes{0}) throw ConfigError("split: dt_max must be positive");
    if (dt_max > t_max) throw ConfigError("split: dt_max must not exceed t_max");
    if (grace < dt_max) throw ConfigError("split: grace must be at least dt_max");
    for (const auto& r : pairing) {
        if (r.device.empty() || r.opener.empty() || r.closer.empty())
            throw ConfigError("split: pair rule needs device, opener and closer");
        if (r.opener == r.closer) throw ConfigError("split: pair rule for '" + r.device + "' has opener == closer");
    }
}

bool semantic_check(const BehaviorSequence& current, const Behavior& next, const SplitConfig& cfg) {
    if (current.empty()) throw ContractError("semantic_check: current sequence is empty");
    for (const auto& rule : cfg.pairing) {
        if (rule.device != next.device || rule.closer != next.action) continue;
        // Walk back to the most recent opener/closer of this device; only an
        // opener there means the pair is still open.
        for (auto it = current.behaviors.rbegin(); it != current.behaviors.rend(); ++it) {
            if (it->device != rule.device) continue;
            if (it->action == rule.closer) break;
            if (it->action == rule.opener) {
                if (next.timestamp - it->timestamp <= cfg.grace) return true;
                break;
            }
        }
    }
    return false;
}

SplitResult split_detailed(const BehaviorSequence& raw, const SplitConfig& cfg) {
    check_sequence(raw);
    SplitResult result;
    auto emit = [&](BehaviorSequence&& s) {
        s.id = raw.id + "-" + std::to_string(result.sequences.size());
        s.origin = Origin::segmented;
        result.sequences.push_back(std::move(s));
    };

    BehaviorSequence current;
    current.behaviors.push_back(raw.behaviors.front());
    Timestamp start = raw.behaviors.front().timestamp;

    for (std::size_t i = 1; i < raw.behaviors.size(); ++i) {
        const Behavior& b = raw.behaviors[i];
        const Behavior& prev = current.behaviors.back();
        if (semantic_check(current, b, cfg)) {
            result.forced_appends.emplace_back(result.sequences.size(), current.size());
            current.behaviors.push_back(b);
        } else if (b.timestamp - prev.timestamp > cfg.dt_max || b.timestamp - start > cfg.t_max) {
            emit(std::move(current));
            current = BehaviorSequence{};
            current.behaviors.push_back(b);
            start = b.timestamp;
        } else {
            current.behaviors.push_back(b);
        }
    }
    emit(std::move(current));
    return result;
}

std::vector<BehaviorSequence> split(const BehaviorSequence& raw, const SplitConfig& cfg) {
    return split_detailed(raw, cfg).sequences;
}

Dataset split_dataset(const Dataset& ds, const SplitConfig& cfg, std::size_t* forced_appends) {
    Dataset out;
    out.catalog_id = ds.catalog_id;
    std::size_t forced = 0;
    for (const auto& s : ds.sequences) {
        auto r = split_detailed(s, cfg);
        forced += r.forced_appends.size();
        for (auto& seg : r.sequences) out.sequences.push_back(std::move(seg));
    }
    if (forced_appends) *forced_appends = forced;
    return out;
}

std::vector<PairRule> parse_pair_rules(const std::string& text) {
    std::vector<PairRule> rules;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find(';', pos);
        if (end == std::string::npos) end = text.size();
        std::string item = text.substr(pos, end - pos);
        pos = end + 1;
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (item.empty()) continue;
        const auto colon = item.find(':');
        const auto slash = item.find('/', colon == std::string::npos ? 0 : colon);
        if (colon == std::string::npos || slash == std::string::npos)
            throw ConfigError("pair rule '" + item + "' must look like Device:opener/closer");
        rules.push_back({item.substr(0, colon), item.substr(colon + 1, slash - colon - 1), item.substr(slash + 1)});
    }
    return rules;
}

std::string format_pair_rules(const std::vector<PairRule>& rules) {
    std::string out;
    for (const auto& r : rules) {
        if (!out.empty()) out += "; ";
        out += r.device + ":" + r.opener + "/" + r.closer;
    }
    return out;
}

} // namespace smartgen
