#include "smartgen/graph.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "smartgen/error.hpp"

namespace smartgen {

std::uint64_t BehaviorGraph::total_weight() const {
    std::uint64_t total = 0;
    for (const auto& [edge, w] : edges) total += w;
    return total;
}

BehaviorGraph build_graph(const Dataset& ds) {
    BehaviorGraph g;
    for (const auto& s : ds.sequences) {
        for (std::size_t i = 0; i < s.behaviors.size(); ++i) {
            g.nodes.insert(s.behaviors[i].token());
            if (i + 1 < s.behaviors.size()) ++g.edges[{s.behaviors[i].token(), s.behaviors[i + 1].token()}];
        }
    }
    return g;
}

TransitionMatrix transition_matrix(const BehaviorGraph& g) {
    TransitionMatrix m;
    m.index.assign(g.nodes.begin(), g.nodes.end());
    m.counts.assign(m.index.size(), std::vector<std::uint64_t>(m.index.size(), 0));
    auto pos = [&](const std::string& t) {
        return static_cast<std::size_t>(std::lower_bound(m.index.begin(), m.index.end(), t) - m.index.begin());
    };
    for (const auto& [edge, w] : g.edges) m.counts[pos(edge.first)][pos(edge.second)] = w;
    return m;
}

HintSet top_k_hints(const TransitionMatrix& m, int k) {
    if (k < 1) throw ContractError("top_k_hints: k must be >= 1");
    HintSet h;
    for (std::size_t i = 0; i < m.size(); ++i) {
        Hint hint;
        hint.current = m.index[i];
        for (std::size_t j = 0; j < m.size(); ++j) {
            if (m.counts[i][j] > 0) hint.next.emplace_back(m.index[j], m.counts[i][j]);
        }
        if (hint.next.empty()) continue;
        // index is already lexicographic, so a stable sort on count keeps
        // the token-ascending tie-break
        std::stable_sort(hint.next.begin(), hint.next.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
        if (hint.next.size() > static_cast<std::size_t>(k)) hint.next.resize(static_cast<std::size_t>(k));
        h.hints.push_back(std::move(hint));
    }
    return h;
}

std::string hints_to_json(const HintSet& h) {
    // nlohmann's default object type is a std::map, so keys come out sorted.
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& hint : h.hints) {
        nlohmann::json next = nlohmann::json::array();
        for (const auto& [action, count] : hint.next) next.push_back({{"action", action}, {"count", count}});
        arr.push_back({{"current", hint.current}, {"next", std::move(next)}});
    }
    return nlohmann::json{{"hints", std::move(arr)}}.dump();
}

HintSet hints_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        HintSet h;
        for (const auto& jh : j.at("hints")) {
            Hint hint;
            hint.current = jh.at("current").get<std::string>();
            for (const auto& jn : jh.at("next"))
                hint.next.emplace_back(jn.at("action").get<std::string>(), jn.at("count").get<std::uint64_t>());
            h.hints.push_back(std::move(hint));
        }
        return h;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string{"malformed hints JSON: "} + e.what());
    }
}

std::vector<std::string> hint_lines(const HintSet& h, std::size_t max_lines) {
    struct Item {
        const std::string* from;
        const std::string* to;
        std::uint64_t count;
    };
    std::vector<Item> items;
    for (const auto& hint : h.hints)
        for (const auto& [to, count] : hint.next) items.push_back({&hint.current, &to, count});
    std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.count > b.count; });
    if (items.size() > max_lines) items.resize(max_lines);

    std::vector<std::string> lines;
    for (const auto& it : items) {
        lines.push_back("After " + *it.from + " the user often does " + *it.to + " (" + std::to_string(it.count) +
                        " times).");
    }
    return lines;
}

} // namespace smartgen
