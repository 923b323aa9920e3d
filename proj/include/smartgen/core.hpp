#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace smartgen {

using Minutes = std::chrono::minutes;
using Timestamp = std::chrono::sys_time<Minutes>;

/// Parses `YYYY-MM-DD HH:MM` (a `T` separator is also accepted).
std::optional<Timestamp> parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp t);
int hour_of_day(Timestamp t);

/// One timestamped (device, action) event. The action is stored
/// unqualified; `token()` gives the `Device:action` wire form.
struct Behavior {
    Timestamp timestamp{};
    std::string device;
    std::string action;

    std::string token() const { return device + ":" + action; }
    bool operator==(const Behavior&) const = default;
};

/// Splits `Device:action` into its parts. An unqualified action is
/// returned as-is with an empty device.
std::pair<std::string, std::string> split_token(std::string_view token);

enum class Origin { raw, segmented, synthetic, filtered };

std::string_view to_string(Origin o);
Origin origin_from_string(std::string_view s);

struct BehaviorSequence {
    std::string id;
    Origin origin = Origin::raw;
    std::vector<Behavior> behaviors;

    std::size_t size() const { return behaviors.size(); }
    bool empty() const { return behaviors.empty(); }
    bool is_sorted() const;
    bool operator==(const BehaviorSequence&) const = default;
};

/// Throws ContractError unless the sequence is non-empty and time-ordered.
void check_sequence(const BehaviorSequence& s);

struct Dataset {
    std::string catalog_id;
    std::vector<BehaviorSequence> sequences;

    std::size_t size() const { return sequences.size(); }
    bool empty() const { return sequences.empty(); }
    std::size_t behavior_count() const;
    const BehaviorSequence* find(std::string_view id) const;
    bool operator==(const Dataset&) const = default;
};

class DeviceCatalog {
public:
    DeviceCatalog() = default;
    /// Throws FormatError if a device has an empty action set.
    DeviceCatalog(std::string name, std::map<std::string, std::set<std::string>> entries);

    const std::string& name() const { return name_; }
    const std::map<std::string, std::set<std::string>>& entries() const { return entries_; }

    bool has_device(std::string_view device) const;
    bool allows(std::string_view device, std::string_view action) const;
    std::size_t device_count() const { return entries_.size(); }

    /// Every `Device:action` token, lexicographically ordered.
    std::vector<std::string> tokens() const;

    /// Returns a catalog with the given actions added to `device`
    /// (creating the device if needed).
    DeviceCatalog extended(const std::string& device, const std::set<std::string>& actions) const;

private:
    std::string name_;
    std::map<std::string, std::set<std::string>> entries_;
};

enum class TransitionKind { ST, TT, NT };

std::string_view to_string(TransitionKind k);
TransitionKind transition_kind_from_string(std::string_view s);

struct ContextTransition {
    TransitionKind kind = TransitionKind::ST;
    std::string e_ori;
    std::string e_new;

    /// Throws ContractError when e_ori == e_new or either is empty.
    void validate() const;
};

// ---------------------------------------------------------------- ingestion

struct RowError {
    std::size_t line = 0;
    std::string message;
};

struct ParseLogResult {
    Dataset dataset;
    std::vector<RowError> row_errors;
};

/// Reads `timestamp,device,action` CSV into a single raw sequence sorted
/// by timestamp (stable on ties). Bad rows are skipped and reported.
/// Throws FormatError on a missing header and ContractError when no valid
/// row remains.
ParseLogResult parse_behavior_log(std::string_view text, std::string_view sequence_id = "raw-0",
                                  std::string_view catalog_id = "");

/// Writes one CSV per sequence concatenated under a single header.
std::string serialize_behavior_log(const BehaviorSequence& s);

struct Violation {
    std::string sequence_id;
    std::size_t index = 0;
    std::string device;
    std::string action;
    std::string reason;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

ValidationReport validate_against_catalog(const Dataset& ds, const DeviceCatalog& cat);

// ------------------------------------------------------------ serialization

nlohmann::json to_json(const Dataset& ds);
Dataset dataset_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DeviceCatalog& cat);
DeviceCatalog catalog_from_json(std::string name, const nlohmann::json& j);

/// Built-in device tables for the FR, SP and US household datasets.
DeviceCatalog bundled_catalog(std::string_view name);
std::vector<std::string> bundled_catalog_names();

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);
Dataset load_dataset(const std::string& path);
void save_dataset(const std::string& path, const Dataset& ds);
/// A bundled name (FR/SP/US) or a path to a catalog JSON file.
DeviceCatalog load_catalog(const std::string& name_or_path);

} // namespace smartgen
