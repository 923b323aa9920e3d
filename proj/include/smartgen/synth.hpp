#pragma once

#include <string>
#include <vector>

#include "smartgen/core.hpp"
#include "smartgen/graph.hpp"

namespace smartgen {

struct PromptBundle {
    std::string system_text;
    std::string user_text;
    double temperature = 0.7;
    int max_output_tokens = 4096;

    bool operator==(const PromptBundle&) const = default;
};

struct PromptConfig {
    double temperature = 0.7;
    int max_output_tokens = 4096;
    std::size_t max_hint_lines = 60;
    std::size_t batch_size = 20;  // sequences per prompt
};

/// Literal markers around the generated sequence set.
inline constexpr std::string_view kSeqOpen = "<seq";
inline constexpr std::string_view kSeqClose = "seq>";

/// Builds the system message (role, background, step-by-step task and the
/// six generation requirements) and the user message (scene information,
/// the sequences, the device/state set and habit hints). Deterministic.
/// Throws ContractError for an empty dataset or an invalid transition.
PromptBundle assemble_prompt(const ContextTransition& ct, const Dataset& compressed, const DeviceCatalog& cat,
                             const HintSet& hints, const PromptConfig& cfg = {});

/// Contiguous chunks of at most `batch_size` sequences.
std::vector<Dataset> chunk_dataset(const Dataset& ds, std::size_t batch_size);

/// Reads the sequences and environments back out of a user message built
/// by assemble_prompt (used by the mock model).
struct PromptContents {
    std::string e_ori;
    std::string e_new;
    Dataset sequences;
};
PromptContents parse_prompt(const PromptBundle& bundle);

/// Renders sequences in the output-format notation, e.g.
/// `<seq [['2022-08-04 18:30, Light, Light:switch_on']] seq>`.
std::string render_seq_block(const Dataset& ds);

struct DroppedBehavior {
    std::string raw;
    std::string reason;  // unknown device | action/device mismatch | bad timestamp | malformed entry
};

struct ParseReport {
    std::size_t parsed_sequences = 0;
    std::vector<DroppedBehavior> dropped;
    bool marker_found = false;
};

struct ParseOptions {
    std::string id_prefix = "syn";
    /// Date used for entries that only carry `HH:MM`.
    std::string default_date = "2022-01-01";
    std::string catalog_id;
};

struct ParsedResponse {
    Dataset dataset;
    ParseReport report;
};

/// Parses the bracketed sequence list between the first `<seq` and the
/// last `seq>`. Invalid entries are dropped and reported. Throws
/// ParseError when the markers are missing and EmptyOutputError when no
/// valid sequence survives.
ParsedResponse parse_response(const std::string& raw, const DeviceCatalog& cat, const ParseOptions& opts = {});

} // namespace smartgen
