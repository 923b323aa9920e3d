#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "smartgen/core.hpp"

namespace smartgen {

/// Directed action-transition graph; nodes are `Device:action` tokens.
struct BehaviorGraph {
    std::set<std::string> nodes;
    std::map<std::pair<std::string, std::string>, std::uint64_t> edges;

    std::uint64_t total_weight() const;
};

struct TransitionMatrix {
    std::vector<std::string> index;                  // lexicographic
    std::vector<std::vector<std::uint64_t>> counts;  // index.size() squared

    std::size_t size() const { return index.size(); }
};

struct Hint {
    std::string current;
    std::vector<std::pair<std::string, std::uint64_t>> next;  // ranked
};

struct HintSet {
    std::vector<Hint> hints;  // ordered by current token
    bool empty() const { return hints.empty(); }
};

/// Counts consecutive pairs within each sequence; no cross-sequence edges.
BehaviorGraph build_graph(const Dataset& ds);
TransitionMatrix transition_matrix(const BehaviorGraph& g);
/// Per row, the k largest non-zero counts (ties broken by token ascending).
HintSet top_k_hints(const TransitionMatrix& m, int k);

/// `{"hints": [{"current": ..., "next": [{"action": ..., "count": ...}]}]}`
/// with sorted keys; byte-for-byte deterministic.
std::string hints_to_json(const HintSet& h);
HintSet hints_from_json(const std::string& text);

/// One "frequent habit" sentence per transition, at most `max_lines`,
/// highest counts first.
std::vector<std::string> hint_lines(const HintSet& h, std::size_t max_lines);

} // namespace smartgen
