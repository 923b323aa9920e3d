// smartgen: command-line front end for the synthetic behavior pipeline.

#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "smartgen/pipeline.hpp"

using namespace smartgen;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kStage = 3, kEndpoint = 4 };

struct Overrides {
    std::string config_path;
    std::optional<std::string> out, input, catalog;
    std::optional<std::uint64_t> seed;
    bool mock_llm = false;
    bool resume = false;
    bool dump_config = false;
    // simulator
    std::optional<int> days, occupants;
    std::optional<std::string> season, schedule;
    // split
    std::optional<double> dt_max, t_max, grace;
    std::optional<std::string> pair_rules;
    // model / compress / hints
    std::optional<int> embed_dim, epochs;
    std::optional<double> learning_rate, alpha;
    std::optional<int> k;
    // synthesis
    std::optional<std::string> kind, original, target, base_url, model_name;
    std::optional<double> temperature;
    std::optional<std::size_t> batch_size;
    std::optional<int> parallel;
    // filter / eval
    std::optional<double> train_fraction;
    std::optional<std::size_t> max_full_retrains;
    std::optional<int> threads;
    std::optional<std::string> test_input, compression_rates;
    bool no_eval = false;
};

void add_common(CLI::App* app, Overrides& o) {
    app->add_option("-c,--config", o.config_path, "Run config (INI)")->check(CLI::ExistingFile);
    app->add_option("-o,--out", o.out, "Output directory holding the stage artifacts");
    app->add_option("--seed", o.seed, "Master seed");
    app->add_option("--catalog", o.catalog, "Bundled catalog (FR, SP, US) or catalog JSON path");
}

void add_simulator(CLI::App* app, Overrides& o) {
    app->add_option("--days", o.days, "Simulated days");
    app->add_option("--season", o.season, "winter | summer")->check(CLI::IsMember({"winter", "summer"}));
    app->add_option("--schedule", o.schedule, "day | night")->check(CLI::IsMember({"day", "night"}));
    app->add_option("--occupants", o.occupants, "1 or 2 (two or more)");
}

void add_split(CLI::App* app, Overrides& o) {
    app->add_option("--dt-max-hours", o.dt_max, "Max gap between behaviors");
    app->add_option("--t-max-hours", o.t_max, "Max sequence duration");
    app->add_option("--grace-hours", o.grace, "Opener-to-closer window of a pair rule");
    app->add_option("--pair-rules", o.pair_rules, "e.g. \"WaterValve:open/close; Blind:open/close\"");
}

void add_model(CLI::App* app, Overrides& o) {
    app->add_option("--embed-dim", o.embed_dim, "Model width");
    app->add_option("--epochs", o.epochs, "Training epochs");
    app->add_option("--learning-rate", o.learning_rate, "Adam learning rate");
}

void add_synthesis(CLI::App* app, Overrides& o) {
    app->add_option("--kind", o.kind, "Context transition: ST | TT | NT")->check(CLI::IsMember({"ST", "TT", "NT"}));
    app->add_option("--original", o.original, "Original environment description");
    app->add_option("--new", o.target, "New environment description");
    app->add_option("--temperature", o.temperature, "Sampling temperature");
    app->add_option("--batch-size", o.batch_size, "Sequences per prompt");
    app->add_option("--base-url", o.base_url, "OpenAI-compatible endpoint base URL");
    app->add_option("--model", o.model_name, "Endpoint model name");
    app->add_option("--parallel", o.parallel, "Concurrent endpoint requests");
    app->add_flag("--mock-llm", o.mock_llm, "Use the offline simulator model (no network)");
}

void add_filter(CLI::App* app, Overrides& o) {
    app->add_option("--train-fraction", o.train_fraction, "Train share of the non-outlier split");
    app->add_option("--max-full-retrains", o.max_full_retrains, "Outliers judged by full retraining");
    app->add_option("--threads", o.threads, "Parallel retrains");
}

void add_eval(CLI::App* app, Overrides& o) {
    app->add_option("--test-input", o.test_input, "Target-environment corpus for evaluation");
    app->add_option("--compression-rates", o.compression_rates, "Comma-separated retention rates, e.g. 0.2,0.5");
}

RunConfig build_config(const Overrides& o) {
    RunConfig c = o.config_path.empty() ? RunConfig{} : load_run_config(o.config_path);
    if (o.out) c.output_dir = *o.out;
    if (o.input) c.input = *o.input;
    if (o.catalog) c.catalog = *o.catalog;
    if (o.seed) c.master_seed = *o.seed;
    if (o.mock_llm) c.mock_llm = true;
    if (o.days) c.simulator.days = *o.days;
    if (o.occupants) c.simulator.context.occupants = *o.occupants;
    if (o.season) c.simulator.context.season = *o.season == "winter" ? Season::winter : Season::summer;
    if (o.schedule) c.simulator.context.schedule = *o.schedule == "day" ? Schedule::day : Schedule::night;
    if (o.dt_max) {
        c.split.dt_max = Minutes{std::lround(*o.dt_max * 60.0)};
        if (!o.grace && o.config_path.empty()) c.split.grace = 2 * c.split.dt_max;
    }
    if (o.t_max) c.split.t_max = Minutes{std::lround(*o.t_max * 60.0)};
    if (o.grace) c.split.grace = Minutes{std::lround(*o.grace * 60.0)};
    if (o.pair_rules) c.split.pairing = parse_pair_rules(*o.pair_rules);
    if (o.embed_dim) c.model.embed_dim = *o.embed_dim;
    if (o.epochs) c.model.epochs = *o.epochs;
    if (o.learning_rate) c.model.learning_rate = *o.learning_rate;
    if (o.alpha) c.alpha = *o.alpha;
    if (o.k) c.k = *o.k;
    if (o.kind) c.transition.kind = transition_kind_from_string(*o.kind);
    if (o.original) c.transition.e_ori = *o.original;
    if (o.target) c.transition.e_new = *o.target;
    if (o.temperature) c.prompt.temperature = *o.temperature;
    if (o.batch_size) c.prompt.batch_size = *o.batch_size;
    if (o.base_url) c.llm.base_url = *o.base_url;
    if (o.model_name) c.llm.model_name = *o.model_name;
    if (o.parallel) c.llm.parallel_requests = *o.parallel;
    if (o.train_fraction) c.tof.train_fraction = *o.train_fraction;
    if (o.max_full_retrains) c.tof.max_full_retrains = *o.max_full_retrains;
    if (o.threads) c.tof.threads = *o.threads;
    if (o.test_input) c.eval.test_input = *o.test_input;
    if (o.compression_rates) {
        c.eval.compression_rates.clear();
        std::stringstream ss(*o.compression_rates);
        for (std::string item; std::getline(ss, item, ',');) {
            if (item.empty()) continue;
            try {
                c.eval.compression_rates.push_back(std::stod(item));
            } catch (const std::exception&) {
                throw ConfigError("--compression-rates: '" + item + "' is not a number");
            }
        }
    }
    if (o.no_eval) c.eval.enabled = false;
    return c;
}

void print_manifest(const RunManifest& m, const std::vector<std::string>& stages) {
    for (const auto& name : stages) {
        const auto* s = m.stage(name);
        if (!s) continue;
        std::printf("%-15s %-8s %8.2fs  %s\n", s->name.c_str(), s->status.c_str(), s->seconds,
                    s->report.dump().substr(0, 160).c_str());
    }
}

int run_simulate(const Overrides& o, const std::string& out_file) {
    HouseholdContext ctx;
    if (o.season) ctx.season = *o.season == "winter" ? Season::winter : Season::summer;
    if (o.schedule) ctx.schedule = *o.schedule == "day" ? Schedule::day : Schedule::night;
    if (o.occupants) ctx.occupants = *o.occupants;
    HouseholdProfile p = reference_profile(ctx, o.seed.value_or(1));
    if (o.catalog) p.catalog = load_catalog(*o.catalog);
    const Dataset ds = generate_corpus(p, o.days.value_or(30));
    if (out_file.size() > 5 && out_file.substr(out_file.size() - 5) == ".json") {
        save_dataset(out_file, ds);
    } else {
        // A continuous log, the form `ingest` expects.
        BehaviorSequence log{"log", Origin::raw, {}};
        for (const auto& s : ds.sequences) log.behaviors.insert(log.behaviors.end(), s.behaviors.begin(), s.behaviors.end());
        write_file(out_file, serialize_behavior_log(log));
    }
    std::printf("wrote %zu sequences (%zu behaviors) to %s\n", ds.size(), ds.behavior_count(), out_file.c_str());
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"smartgen: adapt smart-home behavior sequences to a new context"};
    app.require_subcommand(1);
    Overrides o;

    auto* ingest = app.add_subcommand("ingest", "Read a behavior log (or simulate one) into dataset_raw.json");
    add_common(ingest, o);
    ingest->add_option("--input", o.input, "Behavior log CSV or dataset JSON");
    add_simulator(ingest, o);

    auto* split = app.add_subcommand("split", "Segment dataset_raw.json into behavior sequences");
    add_common(split, o);
    add_split(split, o);

    auto* compress = app.add_subcommand("compress", "Train the embedder and drop near-duplicate sequences");
    add_common(compress, o);
    add_model(compress, o);
    compress->add_option("--alpha", o.alpha, "Cosine similarity threshold in (0, 1]");

    auto* hints = app.add_subcommand("hints", "Write top-k successor hints to hints.json");
    add_common(hints, o);
    hints->add_option("--k", o.k, "Successors kept per action");

    auto* synthesize = app.add_subcommand("synthesize", "Build prompts, query the model and parse the responses");
    add_common(synthesize, o);
    add_synthesis(synthesize, o);

    auto* filter = app.add_subcommand("filter", "Two-stage outlier filtering of the synthetic sequences");
    add_common(filter, o);
    add_model(filter, o);
    add_filter(filter, o);

    auto* eval = app.add_subcommand("eval", "Downstream metrics and the compression comparison");
    add_common(eval, o);
    add_model(eval, o);
    add_eval(eval, o);

    std::string sim_out = "simulated.csv";
    auto* simulate = app.add_subcommand("simulate", "Write a simulated household corpus (.csv log or .json dataset)");
    simulate->add_option("--out,-o", sim_out, "Output file");
    simulate->add_option("--seed", o.seed, "Simulator seed");
    simulate->add_option("--catalog", o.catalog, "Catalog name or path");
    add_simulator(simulate, o);

    auto* run = app.add_subcommand("run", "Run every stage");
    add_common(run, o);
    run->add_option("--input", o.input, "Behavior log CSV or dataset JSON (default: simulator)");
    add_simulator(run, o);
    add_split(run, o);
    add_model(run, o);
    run->add_option("--alpha", o.alpha, "Cosine similarity threshold in (0, 1]");
    run->add_option("--k", o.k, "Successors kept per action");
    add_synthesis(run, o);
    add_filter(run, o);
    add_eval(run, o);
    run->add_flag("--no-eval", o.no_eval, "Skip the evaluation stage");
    run->add_flag("--resume", o.resume, "Reuse completed stages whose inputs and settings are unchanged");
    run->add_flag("--dump-config", o.dump_config, "Print the effective config as INI and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfig;
    }

    try {
        if (simulate->parsed()) return run_simulate(o, sim_out);

        const RunConfig cfg = build_config(o);
        if (o.dump_config) {
            std::cout << to_ini(cfg);
            return kOk;
        }
        std::vector<std::string> stages;
        if (run->parsed()) stages = stage_names();
        else if (ingest->parsed()) stages = {"ingest"};
        else if (split->parsed()) stages = {"split"};
        else if (compress->parsed()) stages = {"train_embedder", "compress"};
        else if (hints->parsed()) stages = {"hints"};
        else if (synthesize->parsed()) stages = {"prompt", "synthesize", "parse"};
        else if (filter->parsed()) stages = {"filter"};
        else if (eval->parsed()) stages = {"eval"};

        PipelineOptions opts;
        opts.resume = o.resume;
        const RunManifest m = run->parsed() ? run_pipeline(cfg, opts) : run_stages(cfg, stages, opts);
        print_manifest(m, stages);
        return kOk;
    } catch (const StageError& e) {
        std::fprintf(stderr, "smartgen: stage %s failed: %s\n", e.stage().c_str(), e.what());
        switch (e.kind()) {
        case StageError::Kind::config: return kConfig;
        case StageError::Kind::endpoint: return kEndpoint;
        case StageError::Kind::stage: return kStage;
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "smartgen: config error: %s\n", e.what());
        return kConfig;
    } catch (const EndpointError& e) {
        std::fprintf(stderr, "smartgen: endpoint error: %s\n", e.what());
        return kEndpoint;
    } catch (const TransportError& e) {
        std::fprintf(stderr, "smartgen: endpoint error: %s\n", e.what());
        return kEndpoint;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "smartgen: %s\n", e.what());
        return kStage;
    }
    return kStage;
}
