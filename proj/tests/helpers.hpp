#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "smartgen/core.hpp"
#include "smartgen/error.hpp"

namespace testing {

inline smartgen::Timestamp at(const std::string& text) {
    const auto t = smartgen::parse_timestamp(text);
    if (!t) throw smartgen::FormatError("bad test timestamp " + text);
    return *t;
}

// Entries look like "2022-01-01 10:00 Light:switch_on".
inline smartgen::BehaviorSequence seq(const std::string& id, const std::vector<std::string>& entries,
                                      smartgen::Origin origin = smartgen::Origin::raw) {
    smartgen::BehaviorSequence s{id, origin, {}};
    for (const auto& e : entries) {
        auto [device, action] = smartgen::split_token(e.substr(17));
        s.behaviors.push_back({at(e.substr(0, 16)), device, action});
    }
    return s;
}

inline smartgen::Dataset dataset(std::vector<smartgen::BehaviorSequence> seqs, std::string catalog = "FR") {
    return smartgen::Dataset{std::move(catalog), std::move(seqs)};
}

// Fresh scratch directory under the system temp dir.
inline std::string scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("smartgen-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

} // namespace testing
