#include "smartgen/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include "smartgen/eval.hpp"
#include "smartgen/graph.hpp"
#include "smartgen/rng.hpp"

namespace smartgen {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

// ------------------------------------------------------------------ config

namespace {

const std::map<std::string, std::set<std::string>> kSchema = {
    {"run", {"seed", "input", "catalog", "output_dir", "mock_llm"}},
    {"simulator", {"days", "season", "schedule", "occupants", "noise_rate"}},
    {"split", {"dt_max_hours", "t_max_hours", "grace_hours", "pair_rules"}},
    {"model",
     {"embed_dim", "heads", "layers", "ffn_dim", "max_len", "mask_ratio", "epochs", "batch_size", "learning_rate"}},
    {"compress", {"alpha"}},
    {"hints", {"k", "max_hint_lines"}},
    {"transition", {"kind", "original", "new"}},
    {"prompt", {"temperature", "max_output_tokens", "batch_size"}},
    {"llm",
     {"base_url", "model", "api_key_env", "timeout_seconds", "max_retries", "parallel_requests",
      "initial_backoff_ms"}},
    {"filter", {"train_fraction", "max_full_retrains", "threads"}},
    {"eval", {"enabled", "test_input", "test_days", "junk_fraction", "compression_rates", "equalize_steps"}},
};

Minutes hours_to_minutes(double h) { return Minutes{std::lround(h * 60.0)}; }
double minutes_to_hours(Minutes m) { return static_cast<double>(m.count()) / 60.0; }

template <typename T>
T get(const pt::ptree& tree, const std::string& key, T fallback) {
    const auto node = tree.get_child_optional(pt::ptree::path_type(key, '.'));
    if (!node) return fallback;
    try {
        return node->get_value<T>();
    } catch (const pt::ptree_bad_data&) {
        throw ConfigError("config key '" + key + "' has an invalid value '" + node->data() + "'");
    }
}

bool get_bool(const pt::ptree& tree, const std::string& key, bool fallback) {
    const auto text = get<std::string>(tree, key, fallback ? "true" : "false");
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw ConfigError("config key '" + key + "' expects true or false, got '" + text + "'");
}

std::string resolve_path(const std::string& path, const std::string& base_dir) {
    if (path.empty() || fs::path{path}.is_absolute()) return path;
    return (fs::path{base_dir} / path).lexically_normal().string();
}

std::vector<double> parse_rates(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (item.empty()) continue;
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError("eval.compression_rates: '" + item + "' is not a number");
        }
    }
    return out;
}

std::string join_rates(const std::vector<double>& rates) {
    std::ostringstream out;
    for (std::size_t i = 0; i < rates.size(); ++i) out << (i ? "," : "") << rates[i];
    return out.str();
}

Season season_from_string(const std::string& s) {
    if (s == "winter") return Season::winter;
    if (s == "summer") return Season::summer;
    throw ConfigError("simulator.season must be winter or summer, got '" + s + "'");
}

Schedule schedule_from_string(const std::string& s) {
    if (s == "day") return Schedule::day;
    if (s == "night") return Schedule::night;
    throw ConfigError("simulator.schedule must be day or night, got '" + s + "'");
}

} // namespace

RunConfig run_config_from_ini(const std::string& text, const std::string& base_dir) {
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("run config: ") + e.what());
    }
    for (const auto& [section, keys] : tree) {
        const auto known = kSchema.find(section);
        if (known == kSchema.end()) throw ConfigError("run config: unknown section [" + section + "]");
        if (!keys.data().empty()) throw ConfigError("run config: key '" + section + "' outside any section");
        for (const auto& [key, value] : keys) {
            if (!known->second.count(key))
                throw ConfigError("run config: unknown key '" + key + "' in [" + section + "]");
        }
    }

    RunConfig c;
    c.master_seed = get<std::uint64_t>(tree, "run.seed", c.master_seed);
    c.input = resolve_path(get<std::string>(tree, "run.input", ""), base_dir);
    c.catalog = get<std::string>(tree, "run.catalog", c.catalog);
    if (c.catalog.find_first_of("/.") != std::string::npos) c.catalog = resolve_path(c.catalog, base_dir);
    c.output_dir = resolve_path(get<std::string>(tree, "run.output_dir", c.output_dir), base_dir);
    c.mock_llm = get_bool(tree, "run.mock_llm", c.mock_llm);

    auto& sim = c.simulator;
    sim.days = get(tree, "simulator.days", sim.days);
    sim.context.season = season_from_string(get<std::string>(tree, "simulator.season", "winter"));
    sim.context.schedule = schedule_from_string(get<std::string>(tree, "simulator.schedule", "day"));
    sim.context.occupants = get(tree, "simulator.occupants", sim.context.occupants);
    sim.noise_rate = get(tree, "simulator.noise_rate", sim.noise_rate);

    c.split.dt_max = hours_to_minutes(get(tree, "split.dt_max_hours", minutes_to_hours(c.split.dt_max)));
    c.split.t_max = hours_to_minutes(get(tree, "split.t_max_hours", minutes_to_hours(c.split.t_max)));
    // The grace window follows dt_max unless set explicitly.
    c.split.grace = hours_to_minutes(get(tree, "split.grace_hours", 2.0 * minutes_to_hours(c.split.dt_max)));
    c.split.pairing = parse_pair_rules(get<std::string>(tree, "split.pair_rules", ""));

    auto& m = c.model;
    m.embed_dim = get(tree, "model.embed_dim", m.embed_dim);
    m.heads = get(tree, "model.heads", m.heads);
    m.layers = get(tree, "model.layers", m.layers);
    m.ffn_dim = get(tree, "model.ffn_dim", m.ffn_dim);
    m.max_len = get(tree, "model.max_len", m.max_len);
    m.mask_ratio = get(tree, "model.mask_ratio", m.mask_ratio);
    m.epochs = get(tree, "model.epochs", m.epochs);
    m.batch_size = get(tree, "model.batch_size", m.batch_size);
    m.learning_rate = get(tree, "model.learning_rate", m.learning_rate);

    c.alpha = get(tree, "compress.alpha", c.alpha);
    c.k = get(tree, "hints.k", c.k);
    c.prompt.max_hint_lines = get(tree, "hints.max_hint_lines", c.prompt.max_hint_lines);

    c.transition.kind = transition_kind_from_string(get<std::string>(tree, "transition.kind", "ST"));
    c.transition.e_ori = get<std::string>(tree, "transition.original", "");
    c.transition.e_new = get<std::string>(tree, "transition.new", "");

    c.prompt.temperature = get(tree, "prompt.temperature", c.prompt.temperature);
    c.prompt.max_output_tokens = get(tree, "prompt.max_output_tokens", c.prompt.max_output_tokens);
    c.prompt.batch_size = get(tree, "prompt.batch_size", c.prompt.batch_size);

    auto& llm = c.llm;
    llm.base_url = get(tree, "llm.base_url", llm.base_url);
    llm.model_name = get(tree, "llm.model", llm.model_name);
    llm.api_key_env = get(tree, "llm.api_key_env", llm.api_key_env);
    llm.timeout = std::chrono::milliseconds{
        std::lround(1000.0 * get(tree, "llm.timeout_seconds", static_cast<double>(llm.timeout.count()) / 1000.0))};
    llm.max_retries = get(tree, "llm.max_retries", llm.max_retries);
    llm.parallel_requests = get(tree, "llm.parallel_requests", llm.parallel_requests);
    llm.initial_backoff =
        std::chrono::milliseconds{get<long>(tree, "llm.initial_backoff_ms", llm.initial_backoff.count())};

    c.tof.train_fraction = get(tree, "filter.train_fraction", c.tof.train_fraction);
    c.tof.max_full_retrains = get(tree, "filter.max_full_retrains", c.tof.max_full_retrains);
    c.tof.threads = get(tree, "filter.threads", c.tof.threads);

    auto& ev = c.eval;
    ev.enabled = get_bool(tree, "eval.enabled", ev.enabled);
    ev.test_input = resolve_path(get<std::string>(tree, "eval.test_input", ""), base_dir);
    ev.test_days = get(tree, "eval.test_days", ev.test_days);
    ev.junk_fraction = get(tree, "eval.junk_fraction", ev.junk_fraction);
    ev.compression_rates = parse_rates(get<std::string>(tree, "eval.compression_rates", ""));
    ev.equalize_steps = get_bool(tree, "eval.equalize_steps", ev.equalize_steps);
    return c;
}

RunConfig load_run_config(const std::string& path) {
    if (!fs::exists(path)) throw ConfigError("run config '" + path + "' does not exist");
    const auto base = fs::path{path}.parent_path().string();
    return run_config_from_ini(read_file(path), base.empty() ? "." : base);
}

nlohmann::json to_json(const RunConfig& c) {
    const auto& ctx = c.simulator.context;
    return {
        {"run",
         {{"seed", c.master_seed},
          {"input", c.input},
          {"catalog", c.catalog},
          {"output_dir", c.output_dir},
          {"mock_llm", c.mock_llm}}},
        {"simulator",
         {{"days", c.simulator.days},
          {"season", ctx.season == Season::winter ? "winter" : "summer"},
          {"schedule", ctx.schedule == Schedule::day ? "day" : "night"},
          {"occupants", ctx.occupants},
          {"noise_rate", c.simulator.noise_rate}}},
        {"split",
         {{"dt_max_hours", minutes_to_hours(c.split.dt_max)},
          {"t_max_hours", minutes_to_hours(c.split.t_max)},
          {"grace_hours", minutes_to_hours(c.split.grace)},
          {"pair_rules", format_pair_rules(c.split.pairing)}}},
        {"model",
         {{"embed_dim", c.model.embed_dim},
          {"heads", c.model.heads},
          {"layers", c.model.layers},
          {"ffn_dim", c.model.ffn_dim},
          {"max_len", c.model.max_len},
          {"mask_ratio", c.model.mask_ratio},
          {"epochs", c.model.epochs},
          {"batch_size", c.model.batch_size},
          {"learning_rate", c.model.learning_rate}}},
        {"compress", {{"alpha", c.alpha}}},
        {"hints", {{"k", c.k}, {"max_hint_lines", c.prompt.max_hint_lines}}},
        {"transition",
         {{"kind", std::string{to_string(c.transition.kind)}},
          {"original", c.transition.e_ori},
          {"new", c.transition.e_new}}},
        {"prompt",
         {{"temperature", c.prompt.temperature},
          {"max_output_tokens", c.prompt.max_output_tokens},
          {"batch_size", c.prompt.batch_size}}},
        {"llm",
         {{"base_url", c.llm.base_url},
          {"model", c.llm.model_name},
          {"api_key_env", c.llm.api_key_env},
          {"timeout_seconds", static_cast<double>(c.llm.timeout.count()) / 1000.0},
          {"max_retries", c.llm.max_retries},
          {"parallel_requests", c.llm.parallel_requests},
          {"initial_backoff_ms", c.llm.initial_backoff.count()}}},
        {"filter",
         {{"train_fraction", c.tof.train_fraction},
          {"max_full_retrains", c.tof.max_full_retrains},
          {"threads", c.tof.threads}}},
        {"eval",
         {{"enabled", c.eval.enabled},
          {"test_input", c.eval.test_input},
          {"test_days", c.eval.test_days},
          {"junk_fraction", c.eval.junk_fraction},
          {"compression_rates", join_rates(c.eval.compression_rates)},
          {"equalize_steps", c.eval.equalize_steps}}},
    };
}

std::string to_ini(const RunConfig& cfg) {
    const auto j = to_json(cfg);
    std::ostringstream out;
    bool first = true;
    for (const auto& [section, keys] : kSchema) {
        (void)keys;
        out << (first ? "" : "\n") << '[' << section << "]\n";
        first = false;
        for (const auto& [key, value] : j.at(section).items()) {
            out << key << " = ";
            if (value.is_string()) out << value.get<std::string>();
            else if (value.is_boolean()) out << (value.get<bool>() ? "true" : "false");
            else out << value.dump();
            out << '\n';
        }
    }
    return out.str();
}

void RunConfig::validate() const {
    try {
        split.validate();
        model.validate();
        if (!mock_llm) llm.validate();
    } catch (const ContractError& e) {
        throw ConfigError(e.what());
    }
    if (!input.empty() && !fs::exists(input)) throw ConfigError("run.input '" + input + "' does not exist");
    if (!eval.test_input.empty() && !fs::exists(eval.test_input))
        throw ConfigError("eval.test_input '" + eval.test_input + "' does not exist");
    (void)load_catalog(catalog);
    if (output_dir.empty()) throw ConfigError("run.output_dir must not be empty");
    if (input.empty()) {
        if (simulator.days < 1) throw ConfigError("simulator.days must be >= 1");
        if (simulator.context.occupants < 1) throw ConfigError("simulator.occupants must be >= 1");
        if (!(simulator.noise_rate >= 0.0 && simulator.noise_rate <= 0.5))
            throw ConfigError("simulator.noise_rate must lie in [0, 0.5]");
    }
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("compress.alpha must lie in (0, 1]");
    if (k < 1) throw ConfigError("hints.k must be >= 1");
    if (!(prompt.temperature >= 0.0 && prompt.temperature <= 2.0))
        throw ConfigError("prompt.temperature must lie in [0, 2]");
    if (prompt.max_output_tokens < 1) throw ConfigError("prompt.max_output_tokens must be >= 1");
    if (prompt.batch_size < 1) throw ConfigError("prompt.batch_size must be >= 1");
    if (!(tof.train_fraction > 0.0 && tof.train_fraction < 1.0))
        throw ConfigError("filter.train_fraction must lie in (0, 1)");
    if (tof.threads < 1) throw ConfigError("filter.threads must be >= 1");
    if (eval.test_days < 1) throw ConfigError("eval.test_days must be >= 1");
    if (!(eval.junk_fraction > 0.0 && eval.junk_fraction < 1.0))
        throw ConfigError("eval.junk_fraction must lie in (0, 1)");
    for (double r : eval.compression_rates) {
        if (!(r > 0.0 && r <= 1.0)) throw ConfigError("eval.compression_rates must lie in (0, 1]");
    }
    try {
        resolved_transition(*this).validate();
    } catch (const ContractError& e) {
        throw ConfigError(std::string("transition: ") + e.what());
    }
}

HouseholdContext target_context(const RunConfig& cfg) {
    HouseholdContext ctx = cfg.simulator.context;
    switch (cfg.transition.kind) {
    case TransitionKind::ST: ctx.season = ctx.season == Season::winter ? Season::summer : Season::winter; break;
    case TransitionKind::TT: ctx.schedule = ctx.schedule == Schedule::day ? Schedule::night : Schedule::day; break;
    case TransitionKind::NT: ctx.occupants = ctx.occupants <= 1 ? 2 : 1; break;
    }
    return ctx;
}

ContextTransition resolved_transition(const RunConfig& cfg) {
    ContextTransition t = cfg.transition;
    if (t.e_ori.empty() || t.e_new.empty()) {
        if (!cfg.input.empty())
            throw ConfigError("transition.original and transition.new are required for file input");
        if (t.e_ori.empty()) t.e_ori = cfg.simulator.context.describe(t.kind);
        if (t.e_new.empty()) t.e_new = target_context(cfg).describe(t.kind);
    }
    return t;
}

// ---------------------------------------------------------------- manifest

const StageRecord* RunManifest::stage(const std::string& name) const {
    for (const auto& s : stages) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

namespace {

nlohmann::json to_json(const std::vector<ArtifactRecord>& records) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : records) out.push_back({{"path", r.path}, {"sha256", r.sha256}});
    return out;
}

std::vector<ArtifactRecord> artifacts_from_json(const nlohmann::json& j) {
    std::vector<ArtifactRecord> out;
    for (const auto& r : j) out.push_back({r.at("path").get<std::string>(), r.at("sha256").get<std::string>()});
    return out;
}

} // namespace

nlohmann::json to_json(const RunManifest& m) {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : m.stages) {
        stages.push_back({{"name", s.name},
                          {"status", s.status},
                          {"fingerprint", s.fingerprint},
                          {"seed", s.seed},
                          {"inputs", to_json(s.inputs)},
                          {"outputs", to_json(s.outputs)},
                          {"seconds", s.seconds},
                          {"report", s.report},
                          {"error", s.error}});
    }
    return {{"version", m.version},
            {"master_seed", m.master_seed},
            {"config", m.config},
            {"stages", stages},
            {"error", m.error}};
}

RunManifest manifest_from_json(const nlohmann::json& j) {
    try {
        RunManifest m;
        m.version = j.at("version").get<std::string>();
        m.master_seed = j.at("master_seed").get<std::uint64_t>();
        m.config = j.at("config");
        m.error = j.value("error", "");
        for (const auto& s : j.at("stages")) {
            StageRecord r;
            r.name = s.at("name").get<std::string>();
            r.status = s.at("status").get<std::string>();
            r.fingerprint = s.at("fingerprint").get<std::string>();
            r.seed = s.at("seed").get<std::uint64_t>();
            r.inputs = artifacts_from_json(s.at("inputs"));
            r.outputs = artifacts_from_json(s.at("outputs"));
            r.seconds = s.at("seconds").get<double>();
            r.report = s.at("report");
            r.error = s.value("error", "");
            m.stages.push_back(std::move(r));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    }
}

// ------------------------------------------------------------------ stages

const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names = {"ingest",  "split",      "train_embedder", "compress", "hints",
                                                   "prompt",  "synthesize", "parse",          "filter",   "eval"};
    return names;
}

namespace {

struct StageDef {
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::string subcommand;
    std::vector<std::string> sections;  // config sections the stage depends on
};

const std::map<std::string, StageDef>& stage_table() {
    static const std::map<std::string, StageDef> table = {
        {"ingest", {{}, {"dataset_raw.json", "ingest_report.json"}, "ingest", {"simulator"}}},
        {"split", {{"dataset_raw.json"}, {"dataset_segmented.json", "split_report.json"}, "split", {"split"}}},
        {"train_embedder",
         {{"dataset_segmented.json"}, {"embedder.json", "embedder_report.json"}, "compress", {"model"}}},
        {"compress",
         {{"dataset_segmented.json", "embedder.json"},
          {"dataset_compressed.json", "compression_report.json"},
          "compress",
          {"compress"}}},
        {"hints", {{"dataset_segmented.json"}, {"hints.json"}, "hints", {"hints"}}},
        {"prompt",
         {{"dataset_compressed.json", "hints.json"}, {"prompts.json"}, "synthesize", {"transition", "prompt", "hints"}}},
        {"synthesize", {{"prompts.json"}, {"responses.json"}, "synthesize", {"llm"}}},
        {"parse", {{"responses.json"}, {"dataset_synthetic.json", "parse_report.json"}, "synthesize", {}}},
        {"filter", {{"dataset_synthetic.json"}, {"dataset_filtered.json", "tof_report.json"}, "filter",
                    {"model", "filter"}}},
        {"eval",
         {{"dataset_filtered.json", "dataset_segmented.json"}, {"eval_report.json"}, "eval", {"model", "eval"}}},
    };
    return table;
}

const StageDef& stage_def(const std::string& stage) {
    const auto it = stage_table().find(stage);
    if (it == stage_table().end()) throw ContractError("unknown pipeline stage '" + stage + "'");
    return it->second;
}

} // namespace

const std::vector<std::string>& stage_inputs(const std::string& stage) { return stage_def(stage).inputs; }
const std::vector<std::string>& stage_outputs(const std::string& stage) { return stage_def(stage).outputs; }
std::string producing_subcommand(const std::string& stage) { return stage_def(stage).subcommand; }

std::uint64_t stage_seed(std::uint64_t master_seed, const std::string& stage) {
    return derive_seed(master_seed, stage);
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw NumericError("sha256 digest failed");
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int{digest[i]};
    return out.str();
}

std::string sha256_file(const std::string& path) { return sha256_hex(read_file(path)); }

namespace {

std::string producer_of(const std::string& artifact) {
    for (const auto& name : stage_names()) {
        const auto& outs = stage_outputs(name);
        if (std::find(outs.begin(), outs.end(), artifact) != outs.end()) return producing_subcommand(name);
    }
    return "run";
}

class Stage {
public:
    Stage(const RunConfig& cfg, const DeviceCatalog& catalog, LanguageModel* model)
        : cfg_(cfg), catalog_(catalog), model_(model), dir_(cfg.output_dir) {}

    nlohmann::json execute(const std::string& name, std::uint64_t seed) {
        seed_ = seed;
        if (name == "ingest") return ingest();
        if (name == "split") return split_stage();
        if (name == "train_embedder") return train_embedder();
        if (name == "compress") return compress_stage();
        if (name == "hints") return hints();
        if (name == "prompt") return prompt();
        if (name == "synthesize") return synthesize();
        if (name == "parse") return parse();
        if (name == "filter") return filter();
        if (name == "eval") return evaluate();
        throw ContractError("unknown pipeline stage '" + name + "'");
    }

    bool skipped = false;

private:
    std::string path(const std::string& file) const { return (fs::path{dir_} / file).string(); }
    Dataset load(const std::string& file) const { return load_dataset(path(file)); }
    void write_json(const std::string& file, const nlohmann::json& j) const { write_file(path(file), j.dump(1) + "\n"); }

    ModelConfig model_config() const {
        ModelConfig m = cfg_.model;
        m.seed = seed_;
        return m;
    }

    Dataset simulate(const HouseholdContext& ctx, int days, std::uint64_t seed) const {
        HouseholdProfile p = reference_profile(ctx, seed);
        p.catalog = catalog_;
        p.noise_rate = cfg_.simulator.noise_rate;
        return generate_corpus(p, days);
    }

    nlohmann::json ingest() {
        Dataset ds;
        nlohmann::json report;
        if (cfg_.input.empty()) {
            ds = simulate(cfg_.simulator.context, cfg_.simulator.days, seed_);
            report["source"] = "simulator";
        } else if (fs::path{cfg_.input}.extension() == ".json") {
            ds = load_dataset(cfg_.input);
            report["source"] = cfg_.input;
        } else {
            auto parsed = parse_behavior_log(read_file(cfg_.input), "raw-0", catalog_.name());
            ds = std::move(parsed.dataset);
            report["source"] = cfg_.input;
            nlohmann::json errors = nlohmann::json::array();
            for (const auto& e : parsed.row_errors) errors.push_back({{"line", e.line}, {"message", e.message}});
            report["row_errors"] = errors;
        }
        ds.catalog_id = catalog_.name();
        const auto validation = validate_against_catalog(ds, catalog_);
        if (!validation.ok()) {
            const auto& v = validation.violations.front();
            throw FormatError(std::to_string(validation.violations.size()) + " behaviors violate catalog '" +
                              catalog_.name() + "', first: " + v.device + ":" + v.action + " (" + v.reason + ")");
        }
        save_dataset(path("dataset_raw.json"), ds);
        report["sequences"] = ds.size();
        report["behaviors"] = ds.behavior_count();
        write_json("ingest_report.json", report);
        return report;
    }

    nlohmann::json split_stage() {
        std::size_t forced = 0;
        const Dataset out = split_dataset(load("dataset_raw.json"), cfg_.split, &forced);
        save_dataset(path("dataset_segmented.json"), out);
        nlohmann::json report = {{"sequences", out.size()}, {"behaviors", out.behavior_count()},
                                 {"forced_appends", forced}};
        write_json("split_report.json", report);
        return report;
    }

    nlohmann::json train_embedder() {
        const Dataset ds = load("dataset_segmented.json");
        const auto trained = train_autoencoder(ds, model_config(), &catalog_);
        save_model(path("embedder.json"), trained.model);
        nlohmann::json report = {{"epoch_losses", trained.epoch_losses}, {"vocab_size", trained.model.vocab().size()},
                                 {"checksum", trained.model.checksum()}};
        write_json("embedder_report.json", report);
        return {{"final_epoch_loss", trained.epoch_losses.back()}, {"vocab_size", trained.model.vocab().size()}};
    }

    nlohmann::json compress_stage() {
        const Dataset ds = load("dataset_segmented.json");
        const auto model = load_model(path("embedder.json"));
        const auto r = compress(ds, model, cfg_.alpha);
        save_dataset(path("dataset_compressed.json"), r.retained);
        write_json("compression_report.json", compression_report(r));
        return {{"alpha", r.alpha}, {"retained", r.retained.size()}, {"reduction_rate", r.reduction_rate()},
                {"saved_tokens", r.saved_tokens}};
    }

    nlohmann::json hints() {
        const auto graph = build_graph(load("dataset_segmented.json"));
        const auto h = top_k_hints(transition_matrix(graph), cfg_.k);
        write_file(path("hints.json"), hints_to_json(h));
        return {{"k", cfg_.k}, {"actions", h.hints.size()}, {"edges", graph.edges.size()}};
    }

    nlohmann::json prompt() {
        const Dataset ds = load("dataset_compressed.json");
        const HintSet h = hints_from_json(read_file(path("hints.json")));
        const ContextTransition t = resolved_transition(cfg_);
        nlohmann::json bundles = nlohmann::json::array();
        for (const auto& chunk : chunk_dataset(ds, cfg_.prompt.batch_size)) {
            const auto b = assemble_prompt(t, chunk, catalog_, h, cfg_.prompt);
            bundles.push_back({{"system", b.system_text},
                               {"user", b.user_text},
                               {"temperature", b.temperature},
                               {"max_output_tokens", b.max_output_tokens}});
        }
        write_json("prompts.json", bundles);
        return {{"prompts", bundles.size()}, {"e_ori", t.e_ori}, {"e_new", t.e_new}};
    }

    nlohmann::json synthesize() {
        const auto j = nlohmann::json::parse(read_file(path("prompts.json")));
        std::vector<PromptBundle> bundles;
        for (const auto& b : j) {
            PromptBundle p;
            p.system_text = b.at("system").get<std::string>();
            p.user_text = b.at("user").get<std::string>();
            p.temperature = b.at("temperature").get<double>();
            p.max_output_tokens = b.at("max_output_tokens").get<int>();
            bundles.push_back(std::move(p));
        }
        std::unique_ptr<LanguageModel> owned;
        LanguageModel* model = model_;
        std::string backend = "custom";
        if (!model && cfg_.mock_llm) {
            HouseholdProfile target = reference_profile(target_context(cfg_), seed_);
            target.catalog = catalog_;
            owned = std::make_unique<MockLlm>(std::move(target));
            backend = "mock";
        } else if (!model) {
            owned = std::make_unique<ChatClient>(cfg_.llm, make_http_transport(), path("responses"));
            backend = cfg_.llm.base_url;
        }
        if (owned) model = owned.get();
        const auto responses = complete_all(*model, bundles, cfg_.mock_llm ? 1 : cfg_.llm.parallel_requests);
        write_json("responses.json", responses);
        std::size_t chars = 0;
        for (const auto& r : responses) chars += r.size();
        return {{"backend", backend}, {"responses", responses.size()}, {"characters", chars}};
    }

    nlohmann::json parse() {
        const auto responses = nlohmann::json::parse(read_file(path("responses.json")));
        const Dataset compressed = load("dataset_compressed.json");
        ParseOptions opts;
        opts.catalog_id = catalog_.name();
        if (!compressed.empty() && !compressed.sequences.front().empty())
            opts.default_date = format_timestamp(compressed.sequences.front().behaviors.front().timestamp).substr(0, 10);
        Dataset synthetic;
        synthetic.catalog_id = catalog_.name();
        nlohmann::json chunks = nlohmann::json::array();
        std::size_t dropped = 0;
        for (std::size_t i = 0; i < responses.size(); ++i) {
            char prefix[32];
            std::snprintf(prefix, sizeof prefix, "syn-%03zu", i);
            opts.id_prefix = prefix;
            nlohmann::json entry = {{"chunk", i}};
            try {
                auto parsed = parse_response(responses[i].get<std::string>(), catalog_, opts);
                entry["sequences"] = parsed.report.parsed_sequences;
                nlohmann::json drops = nlohmann::json::array();
                for (const auto& d : parsed.report.dropped) drops.push_back({{"raw", d.raw}, {"reason", d.reason}});
                entry["dropped"] = drops;
                dropped += parsed.report.dropped.size();
                for (auto& s : parsed.dataset.sequences) synthetic.sequences.push_back(std::move(s));
            } catch (const ParseError& e) {
                entry["error"] = e.what();
            } catch (const EmptyOutputError& e) {
                entry["error"] = e.what();
            }
            chunks.push_back(entry);
        }
        if (synthetic.empty()) throw EmptyOutputError("no response yielded a valid sequence");
        const auto validation = validate_against_catalog(synthetic, catalog_);
        save_dataset(path("dataset_synthetic.json"), synthetic);
        nlohmann::json report = {{"chunks", chunks},
                                 {"sequences", synthetic.size()},
                                 {"dropped_behaviors", dropped},
                                 {"catalog_violations", validation.violations.size()}};
        write_json("parse_report.json", report);
        return {{"sequences", synthetic.size()}, {"dropped_behaviors", dropped},
                {"catalog_violations", validation.violations.size()}};
    }

    nlohmann::json filter() {
        const Dataset synthetic = load("dataset_synthetic.json");
        const ModelConfig mc = model_config();
        TofConfig tof = cfg_.tof;
        tof.split_seed = derive_seed(seed_, "split");
        const auto partition = detect_outliers(synthetic, mc, &catalog_);
        const auto result = evaluate_outliers(partition, mc, tof, &catalog_);
        save_dataset(path("dataset_filtered.json"), result.filtered);
        write_json("tof_report.json", tof_report(partition, result));
        std::size_t deleted = 0;
        for (const auto& v : result.verdicts) deleted += v.decision == Decision::remove;
        return {{"input", synthetic.size()},        {"outliers", partition.outliers.size()},
                {"deleted", deleted},               {"retained", result.filtered.size()},
                {"threshold", partition.bounds.upper}, {"baseline_loss", result.baseline_loss}};
    }

    nlohmann::json evaluate() {
        if (!cfg_.eval.enabled) {
            skipped = true;
            return {{"enabled", false}};
        }
        const Dataset filtered = load("dataset_filtered.json");
        const Dataset source = load("dataset_segmented.json");
        nlohmann::json report = {{"enabled", true}};

        Dataset target;
        if (!cfg_.eval.test_input.empty()) {
            target = fs::path{cfg_.eval.test_input}.extension() == ".json"
                         ? load_dataset(cfg_.eval.test_input)
                         : parse_behavior_log(read_file(cfg_.eval.test_input), "target-0", catalog_.name()).dataset;
            target = split_dataset(target, cfg_.split);
        } else if (cfg_.input.empty()) {
            target = split_dataset(simulate(target_context(cfg_), cfg_.eval.test_days, derive_seed(seed_, "target")),
                                   cfg_.split);
        }
        if (!target.empty()) {
            report["target_sequences"] = target.size();
            report["next_action"] = {{"synthetic", to_json(next_action_evaluation(filtered, target))},
                                     {"source", to_json(next_action_evaluation(source, target))}};
            const auto corrupted = corrupt_corpus(target, cfg_.eval.junk_fraction, catalog_, derive_seed(seed_, "junk"));
            std::vector<LabeledSequence> labeled;
            for (const auto& s : corrupted.dataset.sequences)
                labeled.push_back({s, corrupted.corrupted_ids.count(s.id) > 0});
            const auto ad = ad_evaluate(filtered, labeled, model_config(), &catalog_);
            report["anomaly_detection"] = to_json(ad.metrics);
            report["anomaly_detection"]["threshold"] = ad.threshold;
        } else {
            report["note"] = "no target-environment data; set eval.test_input for ranking and detection metrics";
        }
        if (!cfg_.eval.compression_rates.empty()) {
            ComparisonConfig cc;
            cc.rates = cfg_.eval.compression_rates;
            cc.split_seed = derive_seed(seed_, "comparison");
            cc.equalize_steps = cfg_.eval.equalize_steps;
            const auto cmp = compression_comparison(source, model_config(), cc, &catalog_);
            report["compression_comparison"] = to_json(cmp);
            write_file(path("eval_comparison.csv"), comparison_csv(cmp));
        }
        write_json("eval_report.json", report);
        return report;
    }

    const RunConfig& cfg_;
    const DeviceCatalog& catalog_;
    LanguageModel* model_;
    std::string dir_;
    std::uint64_t seed_ = 0;
};

std::string fingerprint(const RunConfig& cfg, const std::string& stage, std::uint64_t seed) {
    const auto j = to_json(cfg);
    nlohmann::json parts = {{"stage", stage}, {"seed", seed}, {"catalog", j["run"]["catalog"]}};
    if (stage == "ingest") parts["input"] = j["run"]["input"];
    if (stage == "synthesize") parts["mock_llm"] = j["run"]["mock_llm"];
    for (const auto& section : stage_def(stage).sections) parts[section] = j[section];
    return sha256_hex(parts.dump());
}

std::string manifest_path(const RunConfig& cfg) { return (fs::path{cfg.output_dir} / "manifest.json").string(); }

void save_manifest(const RunConfig& cfg, const RunManifest& m) {
    write_file(manifest_path(cfg), to_json(m).dump(1) + "\n");
}

std::vector<ArtifactRecord> hash_artifacts(const RunConfig& cfg, const std::vector<std::string>& files) {
    std::vector<ArtifactRecord> out;
    for (const auto& f : files) {
        const auto p = (fs::path{cfg.output_dir} / f).string();
        if (fs::exists(p)) out.push_back({f, sha256_file(p)});
    }
    return out;
}

bool reusable(const RunConfig& cfg, const StageRecord& previous, const std::string& fp) {
    if ((previous.status != "done" && previous.status != "reused" && previous.status != "skipped") ||
        previous.fingerprint != fp)
        return false;
    for (const auto& a : previous.outputs) {
        const auto p = (fs::path{cfg.output_dir} / a.path).string();
        if (!fs::exists(p) || sha256_file(p) != a.sha256) return false;
    }
    for (const auto& a : previous.inputs) {
        const auto p = (fs::path{cfg.output_dir} / a.path).string();
        if (!fs::exists(p) || sha256_file(p) != a.sha256) return false;
    }
    return true;
}

StageError::Kind classify(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const ConfigError&) {
        return StageError::Kind::config;
    } catch (const EndpointError&) {
        return StageError::Kind::endpoint;
    } catch (const TransportError&) {
        return StageError::Kind::endpoint;
    } catch (...) {
        return StageError::Kind::stage;
    }
}

RunManifest execute(const RunConfig& cfg, const std::vector<std::string>& requested, const PipelineOptions& opts,
                    bool check_inputs) {
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw StageError("config", StageError::Kind::config, e.what());
    }
    const DeviceCatalog catalog = load_catalog(cfg.catalog);
    fs::create_directories(cfg.output_dir);

    RunManifest previous;
    const bool have_previous = fs::exists(manifest_path(cfg));
    if (have_previous) previous = manifest_from_json(nlohmann::json::parse(read_file(manifest_path(cfg))));

    RunManifest m;
    m.config = to_json(cfg);
    m.master_seed = cfg.master_seed;
    for (const auto& name : stage_names()) {
        const StageRecord* old = have_previous ? previous.stage(name) : nullptr;
        StageRecord r = old ? *old : StageRecord{};
        r.name = name;
        m.stages.push_back(r);
    }

    Stage runner(cfg, catalog, opts.model);
    bool upstream_changed = !opts.resume;
    for (auto& record : m.stages) {
        if (std::find(requested.begin(), requested.end(), record.name) == requested.end()) continue;
        const std::uint64_t seed = stage_seed(cfg.master_seed, record.name);
        const std::string fp = fingerprint(cfg, record.name, seed);
        if (!upstream_changed && reusable(cfg, record, fp)) {
            record.status = "reused";
            continue;
        }
        upstream_changed = true;
        if (check_inputs) {
            for (const auto& in : stage_inputs(record.name)) {
                if (!fs::exists(fs::path{cfg.output_dir} / in))
                    throw StageError(record.name, StageError::Kind::config,
                                     "missing " + in + " in " + cfg.output_dir + "; run `smartgen " +
                                         producer_of(in) + "` first");
            }
        }
        record.seed = seed;
        record.fingerprint = fp;
        record.error.clear();
        record.report = nlohmann::json::object();
        record.outputs.clear();
        record.inputs = hash_artifacts(cfg, stage_inputs(record.name));
        const auto start = std::chrono::steady_clock::now();
        try {
            if (opts.before_stage) opts.before_stage(record.name);
            runner.skipped = false;
            record.report = runner.execute(record.name, seed);
            record.status = runner.skipped ? "skipped" : "done";
        } catch (const std::exception& e) {
            record.status = "failed";
            record.error = e.what();
            record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            m.error = record.name + ": " + e.what();
            // Later stages no longer match their inputs.
            for (auto& later : m.stages) {
                if (&later > &record) later.status = "pending";
            }
            save_manifest(cfg, m);
            throw StageError(record.name, classify(std::current_exception()), e.what());
        }
        record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (record.status == "done") record.outputs = hash_artifacts(cfg, stage_outputs(record.name));
        save_manifest(cfg, m);
    }
    save_manifest(cfg, m);
    return m;
}

} // namespace

RunManifest run_pipeline(const RunConfig& cfg, const PipelineOptions& opts) {
    return execute(cfg, stage_names(), opts, false);
}

RunManifest run_stages(const RunConfig& cfg, const std::vector<std::string>& stages, const PipelineOptions& opts) {
    for (const auto& s : stages) (void)stage_def(s);
    return execute(cfg, stages, opts, true);
}

} // namespace smartgen
