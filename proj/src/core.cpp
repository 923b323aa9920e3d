#include "smartgen/core.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "smartgen/error.hpp"

namespace smartgen {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool parse_digits(std::string_view s, int& out) {
    if (s.empty()) return false;
    int v = 0;
    for (char c : s) {
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
    }
    out = v;
    return true;
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            fields.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    return fields;
}

} // namespace

std::optional<Timestamp> parse_timestamp(std::string_view text) {
    text = trim(text);
    // YYYY-MM-DD HH:MM
    if (text.size() != 16 || text[4] != '-' || text[7] != '-' ||
        (text[10] != ' ' && text[10] != 'T') || text[13] != ':') {
        return std::nullopt;
    }
    int y = 0, mo = 0, d = 0, h = 0, mi = 0;
    if (!parse_digits(text.substr(0, 4), y) || !parse_digits(text.substr(5, 2), mo) ||
        !parse_digits(text.substr(8, 2), d) || !parse_digits(text.substr(11, 2), h) ||
        !parse_digits(text.substr(14, 2), mi)) {
        return std::nullopt;
    }
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59) return std::nullopt;
    return Timestamp{std::chrono::sys_days{ymd}} + std::chrono::hours{h} + Minutes{mi};
}

std::string format_timestamp(Timestamp t) {
    const auto day = std::chrono::floor<std::chrono::days>(t);
    const std::chrono::year_month_day ymd{day};
    const std::chrono::hh_mm_ss hms{t - day};
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02ld:%02ld", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()));
    return buf;
}

int hour_of_day(Timestamp t) {
    const auto day = std::chrono::floor<std::chrono::days>(t);
    return static_cast<int>(std::chrono::duration_cast<std::chrono::hours>(t - day).count());
}

std::pair<std::string, std::string> split_token(std::string_view token) {
    const auto pos = token.find(':');
    if (pos == std::string_view::npos) return {std::string{}, std::string{trim(token)}};
    return {std::string{trim(token.substr(0, pos))}, std::string{trim(token.substr(pos + 1))}};
}

std::string_view to_string(Origin o) {
    switch (o) {
    case Origin::raw: return "raw";
    case Origin::segmented: return "segmented";
    case Origin::synthetic: return "synthetic";
    case Origin::filtered: return "filtered";
    }
    return "raw";
}

Origin origin_from_string(std::string_view s) {
    if (s == "raw") return Origin::raw;
    if (s == "segmented") return Origin::segmented;
    if (s == "synthetic") return Origin::synthetic;
    if (s == "filtered") return Origin::filtered;
    throw FormatError("unknown sequence origin '" + std::string{s} + "'");
}

bool BehaviorSequence::is_sorted() const {
    return std::is_sorted(behaviors.begin(), behaviors.end(),
                          [](const Behavior& a, const Behavior& b) { return a.timestamp < b.timestamp; });
}

void check_sequence(const BehaviorSequence& s) {
    if (s.empty()) throw ContractError("sequence '" + s.id + "' is empty");
    if (!s.is_sorted()) throw ContractError("sequence '" + s.id + "' is not sorted by timestamp");
}

std::size_t Dataset::behavior_count() const {
    std::size_t n = 0;
    for (const auto& s : sequences) n += s.size();
    return n;
}

const BehaviorSequence* Dataset::find(std::string_view id) const {
    for (const auto& s : sequences) {
        if (s.id == id) return &s;
    }
    return nullptr;
}

DeviceCatalog::DeviceCatalog(std::string name, std::map<std::string, std::set<std::string>> entries)
    : name_(std::move(name)), entries_(std::move(entries)) {
    for (const auto& [device, actions] : entries_) {
        if (device.empty()) throw FormatError("catalog '" + name_ + "' has an empty device name");
        if (actions.empty()) throw FormatError("catalog '" + name_ + "': device '" + device + "' has no actions");
    }
}

bool DeviceCatalog::has_device(std::string_view device) const {
    return entries_.find(std::string{device}) != entries_.end();
}

bool DeviceCatalog::allows(std::string_view device, std::string_view action) const {
    const auto it = entries_.find(std::string{device});
    return it != entries_.end() && it->second.count(std::string{action}) > 0;
}

std::vector<std::string> DeviceCatalog::tokens() const {
    std::vector<std::string> out;
    for (const auto& [device, actions] : entries_) {
        for (const auto& a : actions) out.push_back(device + ":" + a);
    }
    std::sort(out.begin(), out.end());
    return out;
}

DeviceCatalog DeviceCatalog::extended(const std::string& device, const std::set<std::string>& actions) const {
    auto entries = entries_;
    entries[device].insert(actions.begin(), actions.end());
    return DeviceCatalog{name_, std::move(entries)};
}

std::string_view to_string(TransitionKind k) {
    switch (k) {
    case TransitionKind::ST: return "ST";
    case TransitionKind::TT: return "TT";
    case TransitionKind::NT: return "NT";
    }
    return "ST";
}

TransitionKind transition_kind_from_string(std::string_view s) {
    if (s == "ST") return TransitionKind::ST;
    if (s == "TT") return TransitionKind::TT;
    if (s == "NT") return TransitionKind::NT;
    throw ConfigError("unknown context transition kind '" + std::string{s} + "' (expected ST, TT or NT)");
}

void ContextTransition::validate() const {
    if (e_ori.empty() || e_new.empty()) throw ContractError("context transition needs both environments");
    if (e_ori == e_new) throw ContractError("context transition must change the environment");
}

ParseLogResult parse_behavior_log(std::string_view text, std::string_view sequence_id,
                                  std::string_view catalog_id) {
    ParseLogResult result;
    result.dataset.catalog_id = std::string{catalog_id};

    std::size_t line_no = 0;
    bool header_seen = false;
    BehaviorSequence seq;
    seq.id = std::string{sequence_id};
    seq.origin = Origin::raw;

    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (trim(line).empty()) continue;
        if (!header_seen) {
            const auto cols = split_csv_line(line);
            if (cols.size() != 3 || cols[0] != "timestamp" || cols[1] != "device" || cols[2] != "action") {
                throw FormatError("line " + std::to_string(line_no) +
                                  ": expected header 'timestamp,device,action'");
            }
            header_seen = true;
            continue;
        }
        const auto cols = split_csv_line(line);
        if (cols.size() != 3) {
            result.row_errors.push_back({line_no, "expected 3 fields, got " + std::to_string(cols.size())});
            continue;
        }
        const auto t = parse_timestamp(cols[0]);
        if (!t) {
            result.row_errors.push_back({line_no, "unparseable timestamp '" + std::string{cols[0]} + "'"});
            continue;
        }
        auto [qual_device, action] = split_token(cols[2]);
        const std::string device{cols[1]};
        if (device.empty() || action.empty()) {
            result.row_errors.push_back({line_no, "empty device or action"});
            continue;
        }
        if (!qual_device.empty() && qual_device != device) {
            result.row_errors.push_back(
                {line_no, "action '" + std::string{cols[2]} + "' is qualified with a different device"});
            continue;
        }
        seq.behaviors.push_back(Behavior{*t, device, std::move(action)});
    }
    if (!header_seen) throw FormatError("missing header 'timestamp,device,action'");

    std::stable_sort(seq.behaviors.begin(), seq.behaviors.end(),
                     [](const Behavior& a, const Behavior& b) { return a.timestamp < b.timestamp; });
    if (seq.empty()) throw ContractError("behavior log contains no valid rows");
    result.dataset.sequences.push_back(std::move(seq));
    return result;
}

std::string serialize_behavior_log(const BehaviorSequence& s) {
    std::string out = "timestamp,device,action\n";
    for (const auto& b : s.behaviors) {
        out += format_timestamp(b.timestamp);
        out += ',';
        out += b.device;
        out += ',';
        out += b.token();
        out += '\n';
    }
    return out;
}

ValidationReport validate_against_catalog(const Dataset& ds, const DeviceCatalog& cat) {
    ValidationReport report;
    for (const auto& s : ds.sequences) {
        for (std::size_t i = 0; i < s.behaviors.size(); ++i) {
            const auto& b = s.behaviors[i];
            if (!cat.has_device(b.device)) {
                report.violations.push_back({s.id, i, b.device, b.action, "unknown device"});
            } else if (!cat.allows(b.device, b.action)) {
                report.violations.push_back({s.id, i, b.device, b.action, "action/device mismatch"});
            }
        }
    }
    return report;
}

nlohmann::json to_json(const Dataset& ds) {
    nlohmann::json seqs = nlohmann::json::array();
    for (const auto& s : ds.sequences) {
        nlohmann::json behaviors = nlohmann::json::array();
        for (const auto& b : s.behaviors) {
            behaviors.push_back({{"t", format_timestamp(b.timestamp)}, {"d", b.device}, {"a", b.token()}});
        }
        seqs.push_back({{"id", s.id}, {"origin", to_string(s.origin)}, {"behaviors", std::move(behaviors)}});
    }
    return {{"catalog_id", ds.catalog_id}, {"sequences", std::move(seqs)}};
}

Dataset dataset_from_json(const nlohmann::json& j) {
    try {
        Dataset ds;
        ds.catalog_id = j.at("catalog_id").get<std::string>();
        for (const auto& js : j.at("sequences")) {
            BehaviorSequence s;
            s.id = js.at("id").get<std::string>();
            s.origin = origin_from_string(js.at("origin").get<std::string>());
            for (const auto& jb : js.at("behaviors")) {
                const auto t = parse_timestamp(jb.at("t").get<std::string>());
                if (!t) throw FormatError("bad timestamp in sequence '" + s.id + "'");
                Behavior b;
                b.timestamp = *t;
                b.device = jb.at("d").get<std::string>();
                auto [qual, action] = split_token(jb.at("a").get<std::string>());
                if (!qual.empty() && qual != b.device) {
                    throw FormatError("action '" + jb.at("a").get<std::string>() + "' does not belong to device '" +
                                      b.device + "'");
                }
                b.action = std::move(action);
                s.behaviors.push_back(std::move(b));
            }
            ds.sequences.push_back(std::move(s));
        }
        return ds;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string{"malformed dataset JSON: "} + e.what());
    }
}

nlohmann::json to_json(const DeviceCatalog& cat) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [device, actions] : cat.entries()) {
        j[device] = std::vector<std::string>(actions.begin(), actions.end());
    }
    return j;
}

DeviceCatalog catalog_from_json(std::string name, const nlohmann::json& j) {
    if (!j.is_object()) throw FormatError("catalog JSON must map device -> action list");
    std::map<std::string, std::set<std::string>> entries;
    for (const auto& [device, actions] : j.items()) {
        if (!actions.is_array()) throw FormatError("catalog device '" + device + "' must map to a list");
        for (const auto& a : actions) entries[device].insert(a.get<std::string>());
        if (actions.empty()) entries[device];
    }
    return DeviceCatalog{std::move(name), std::move(entries)};
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
    const std::filesystem::path p{path};
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write '" + path + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

Dataset load_dataset(const std::string& path) {
    const auto text = read_file(path);
    try {
        return dataset_from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("'" + path + "' is not valid JSON: " + e.what());
    }
}

void save_dataset(const std::string& path, const Dataset& ds) {
    write_file(path, to_json(ds).dump(1) + "\n");
}

DeviceCatalog load_catalog(const std::string& name_or_path) {
    for (const auto& n : bundled_catalog_names()) {
        if (n == name_or_path) return bundled_catalog(n);
    }
    const auto text = read_file(name_or_path);
    const auto stem = std::filesystem::path{name_or_path}.stem().string();
    try {
        return catalog_from_json(stem, nlohmann::json::parse(text));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("catalog '" + name_or_path + "' is not valid JSON: " + e.what());
    }
}

} // namespace smartgen
