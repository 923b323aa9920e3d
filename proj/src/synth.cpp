#include "smartgen/synth.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "smartgen/error.hpp"

namespace smartgen {

namespace {

constexpr std::string_view kRole =
    "You're an IoT expert. You are very knowledgeable about user behavior and habits in smart homes. The user "
    "would like to ask you about the possible changes in user behavior sequence after the change of smart home "
    "user habits and env.";

constexpr std::string_view kBackground =
    "The user will provide you with the user's previous life environment and the changed environment, the user's "
    "previous behavior sequence, and a devices set and device states. And the user hope that you can use these "
    "devices and states to generate possible user behavior sequences after the env changes based on the original "
    "user behavior sequence.";

constexpr std::string_view kCotTask =
    "Your task: First, select the possible new device states from the set of devices and device states which are "
    "also possible new user behaviors. The second step is to reasonably add possible new user behaviors to the "
    "original user behavior sequences. The third step is to reasonably continue and expand the sequence based on "
    "user behavior habits.";

constexpr std::string_view kRequirements[] = {
    "Please consider the devices that will be used in the new environment as widely as possible based on the set "
    "of devices.",
    "Please strictly follow the correspondence between the devices and device states to generate. Do not generate "
    "device states that do not match the device.",
    "Please add as many new devices and device behaviors as possible to better adapt to changes in the "
    "environment.",
    "Please make sure that the generated sequence is not a single behavior, but a sequence of consecutive "
    "behaviors.",
    "Please also generate reasonable behavior time when generating, not just a single behavior.",
    "The final generated behavior sequences set is in the format of <seq [['...'], ['...'], ['...']] seq>.",
};

constexpr std::string_view kEntryFormat =
    "Each '...' entry is one behavior written as 'YYYY-MM-DD HH:MM, Device, Device:state'.";

constexpr std::string_view kOriPrefix = "The original environment is ";
constexpr std::string_view kNewPrefix = "The new environment is ";
constexpr std::string_view kSequencesHeader = "The user's previous sequence of behavior:";
constexpr std::string_view kDevicesHeader = "The set of the possible device and device states:";
constexpr std::string_view kHintsHeader = "Frequent habits of the user (action transitions and their counts):";

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> lines_of(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        out.push_back(text.substr(pos, end - pos));
        pos = end + 1;
    }
    return out;
}

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

std::string strip_period(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.back() == '.') s.remove_suffix(1);
    return std::string{s};
}

} // namespace

PromptBundle assemble_prompt(const ContextTransition& ct, const Dataset& compressed, const DeviceCatalog& cat,
                             const HintSet& hints, const PromptConfig& cfg) {
    if (compressed.empty()) throw ContractError("assemble_prompt: no sequences to synthesize from");
    ct.validate();

    std::ostringstream sys;
    sys << "## Role\n" << kRole << "\n\n";
    sys << "## Task Background\n" << kBackground << "\n\n";
    sys << "## CoT Task Definition\n" << kCotTask << "\n\n";
    sys << "## Requirements\n";
    int n = 1;
    for (auto r : kRequirements) sys << n++ << ". " << r << "\n";
    sys << kEntryFormat << "\n\n";
    sys << "## Scene Information\nThe user states the original and the new environment.\n\n";
    sys << "## Data Information\nThe user lists the previous behavior sequences, the set of devices with their "
           "states, and frequent habits.\n";

    std::ostringstream usr;
    usr << "## Scene Information\n";
    usr << kOriPrefix << ct.e_ori << ".\n";
    usr << kNewPrefix << ct.e_new << ".\n\n";
    usr << "## Data Information\n" << kSequencesHeader << "\n";
    for (std::size_t i = 0; i < compressed.size(); ++i) {
        usr << "Sequence " << (i + 1) << ":\n";
        for (const auto& b : compressed.sequences[i].behaviors)
            usr << "[" << format_timestamp(b.timestamp) << ", " << b.token() << "]\n";
    }
    usr << "\n" << kDevicesHeader << "\n";
    for (const auto& [device, actions] : cat.entries()) {
        usr << device << ":";
        bool first = true;
        for (const auto& a : actions) {
            usr << (first ? " " : ", ") << a;
            first = false;
        }
        usr << "\n";
    }
    const auto lines = hint_lines(hints, cfg.max_hint_lines);
    if (!lines.empty()) {
        usr << "\n" << kHintsHeader << "\n";
        for (const auto& l : lines) usr << "- " << l << "\n";
    }

    PromptBundle b;
    b.system_text = sys.str();
    b.user_text = usr.str();
    b.temperature = cfg.temperature;
    b.max_output_tokens = cfg.max_output_tokens;
    return b;
}

std::vector<Dataset> chunk_dataset(const Dataset& ds, std::size_t batch_size) {
    if (batch_size == 0) throw ConfigError("prompt batch size must be >= 1");
    std::vector<Dataset> chunks;
    for (std::size_t i = 0; i < ds.size(); i += batch_size) {
        Dataset c;
        c.catalog_id = ds.catalog_id;
        for (std::size_t j = i; j < std::min(ds.size(), i + batch_size); ++j) c.sequences.push_back(ds.sequences[j]);
        chunks.push_back(std::move(c));
    }
    return chunks;
}

PromptContents parse_prompt(const PromptBundle& bundle) {
    PromptContents pc;
    bool in_sequences = false;
    BehaviorSequence* current = nullptr;
    for (auto line : lines_of(bundle.user_text)) {
        line = trim(line);
        if (starts_with(line, kOriPrefix)) {
            pc.e_ori = strip_period(line.substr(kOriPrefix.size()));
        } else if (starts_with(line, kNewPrefix)) {
            pc.e_new = strip_period(line.substr(kNewPrefix.size()));
        } else if (line == kSequencesHeader) {
            in_sequences = true;
        } else if (in_sequences && starts_with(line, "Sequence ")) {
            BehaviorSequence s;
            s.id = "prompt-" + std::to_string(pc.sequences.size());
            s.origin = Origin::segmented;
            pc.sequences.sequences.push_back(std::move(s));
            current = &pc.sequences.sequences.back();
        } else if (in_sequences && current && starts_with(line, "[") && line.back() == ']') {
            const auto inner = line.substr(1, line.size() - 2);
            const auto comma = inner.find(',');
            if (comma == std::string_view::npos) throw ParseError("prompt: malformed sequence line");
            const auto t = parse_timestamp(inner.substr(0, comma));
            auto [device, action] = split_token(inner.substr(comma + 1));
            if (!t || device.empty()) throw ParseError("prompt: malformed sequence line");
            current->behaviors.push_back(Behavior{*t, device, action});
        } else if (line.empty() && in_sequences && current) {
            in_sequences = false;
            current = nullptr;
        }
    }
    return pc;
}

std::string render_seq_block(const Dataset& ds) {
    std::string out{kSeqOpen};
    out += " [";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (i) out += ", ";
        out += "[";
        const auto& s = ds.sequences[i];
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (j) out += ", ";
            const auto& b = s.behaviors[j];
            out += "'" + format_timestamp(b.timestamp) + ", " + b.device + ", " + b.token() + "'";
        }
        out += "]";
    }
    out += "] ";
    out += kSeqClose;
    return out;
}

namespace {

// One quoted entry -> Behavior, or a drop reason.
std::optional<Behavior> parse_entry(std::string_view entry, const DeviceCatalog& cat, const ParseOptions& opts,
                                    std::string& reason) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= entry.size(); ++i) {
        if (i == entry.size() || entry[i] == ',') {
            parts.push_back(trim(entry.substr(start, i - start)));
            start = i + 1;
        }
    }
    if (parts.size() != 3 || parts[1].empty() || parts[2].empty()) {
        reason = "malformed entry";
        return std::nullopt;
    }
    std::optional<Timestamp> t = parse_timestamp(parts[0]);
    if (!t && parts[0].size() == 5 && parts[0][2] == ':') t = parse_timestamp(opts.default_date + " " + std::string{parts[0]});
    if (!t) {
        reason = "bad timestamp";
        return std::nullopt;
    }
    const std::string device{parts[1]};
    if (!cat.has_device(device)) {
        reason = "unknown device";
        return std::nullopt;
    }
    auto [qual, action] = split_token(parts[2]);
    if ((!qual.empty() && qual != device) || !cat.allows(device, action)) {
        reason = "action/device mismatch";
        return std::nullopt;
    }
    return Behavior{*t, device, action};
}

} // namespace

ParsedResponse parse_response(const std::string& raw, const DeviceCatalog& cat, const ParseOptions& opts) {
    ParsedResponse out;
    out.dataset.catalog_id = opts.catalog_id.empty() ? cat.name() : opts.catalog_id;
    const auto open = raw.find(kSeqOpen);
    const auto close = raw.rfind(kSeqClose);
    if (open == std::string::npos || close == std::string::npos || close < open + kSeqOpen.size())
        throw ParseError("response has no <seq ... seq> block");
    out.report.marker_found = true;
    const std::string_view body = std::string_view{raw}.substr(open + kSeqOpen.size(), close - open - kSeqOpen.size());

    // Depth 1 is the outer list, depth 2 one sequence; deeper brackets are
    // flattened into the enclosing sequence. Quoted strings inside a
    // sequence are entries, anything else there is junk.
    int depth = 0;
    std::vector<std::string> entries;
    std::string junk;
    auto flush_junk = [&] {
        const auto j = trim(junk);
        if (!j.empty()) out.report.dropped.push_back({std::string{j}, "malformed entry"});
        junk.clear();
    };
    auto finish_sequence = [&] {
        BehaviorSequence s;
        s.origin = Origin::synthetic;
        for (const auto& e : entries) {
            std::string reason;
            if (auto b = parse_entry(e, cat, opts, reason)) {
                s.behaviors.push_back(std::move(*b));
            } else {
                out.report.dropped.push_back({e, reason});
            }
        }
        entries.clear();
        if (s.empty()) return;
        std::stable_sort(s.behaviors.begin(), s.behaviors.end(),
                         [](const Behavior& a, const Behavior& b) { return a.timestamp < b.timestamp; });
        s.id = opts.id_prefix + "-" + std::to_string(out.dataset.size());
        out.dataset.sequences.push_back(std::move(s));
    };

    for (std::size_t i = 0; i < body.size(); ++i) {
        const char c = body[i];
        if (c == '\'' || c == '"') {
            const auto end = body.find(c, i + 1);
            if (end == std::string_view::npos) {
                out.report.dropped.push_back({std::string{trim(body.substr(i))}, "malformed entry"});
                break;
            }
            std::string text{body.substr(i + 1, end - i - 1)};
            if (depth >= 2) {
                flush_junk();
                entries.push_back(std::move(text));
            } else {
                out.report.dropped.push_back({std::move(text), "malformed entry"});
            }
            i = end;
        } else if (c == '[') {
            ++depth;
        } else if (c == ']') {
            if (depth == 2) {
                flush_junk();
                finish_sequence();
            }
            if (depth > 0) --depth;
        } else if (c == ',') {
            flush_junk();
        } else if (depth >= 2) {
            junk += c;
        }
    }
    if (depth >= 2) {
        flush_junk();
        finish_sequence();
    }

    out.report.parsed_sequences = out.dataset.size();
    if (out.dataset.empty()) throw EmptyOutputError("response contained no valid behavior sequence");
    return out;
}

} // namespace smartgen
