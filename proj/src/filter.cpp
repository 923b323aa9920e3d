#include "smartgen/filter.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <thread>

#include "smartgen/error.hpp"
#include "smartgen/rng.hpp"

namespace smartgen {

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw ContractError("percentile: empty list");
    if (!(p >= 0.0 && p <= 100.0)) throw ContractError("percentile: p must lie in [0, 100]");
    std::sort(values.begin(), values.end());
    const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = static_cast<std::size_t>(std::ceil(rank));
    return values[lo] + (rank - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

IqrBounds iqr_bounds(const std::vector<double>& values) {
    IqrBounds b;
    b.q1 = percentile(values, 25.0);
    b.q3 = percentile(values, 75.0);
    b.iqr = b.q3 - b.q1;
    b.upper = b.q3 + 1.5 * b.iqr;
    return b;
}

OutlierPartition partition_by_loss(const Dataset& ds, const std::vector<double>& losses) {
    if (losses.size() != ds.size()) throw ContractError("partition_by_loss: one loss per sequence required");
    OutlierPartition p;
    p.bounds = iqr_bounds(losses);
    p.non_outliers.catalog_id = ds.catalog_id;
    p.outliers.catalog_id = ds.catalog_id;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        p.losses.emplace_back(ds.sequences[i].id, losses[i]);
        (losses[i] > p.bounds.upper ? p.outliers : p.non_outliers).sequences.push_back(ds.sequences[i]);
    }
    return p;
}

OutlierPartition detect_outliers(const Dataset& synthetic, const ModelConfig& cfg, const DeviceCatalog* catalog) {
    if (synthetic.size() < 4) throw InsufficientDataError("outlier detection needs at least 4 sequences");
    const auto trained = train_autoencoder(synthetic, cfg, Vocab::build(synthetic, catalog));
    std::vector<double> losses;
    losses.reserve(synthetic.size());
    for (const auto& s : synthetic.sequences) losses.push_back(reconstruction_loss(trained.model, s));
    return partition_by_loss(synthetic, losses);
}

RetentionResult evaluate_outliers(const OutlierPartition& p, const ModelConfig& cfg, const TofConfig& tof,
                                  const DeviceCatalog* catalog) {
    const std::size_t n = p.non_outliers.size();
    if (n < 5) throw InsufficientDataError("outlier evaluation needs at least 5 non-outlier sequences");
    if (!(tof.train_fraction > 0.0 && tof.train_fraction < 1.0))
        throw ConfigError("tof: train_fraction must lie in (0, 1)");

    RetentionResult r;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng(tof.split_seed).shuffle(order);
    const std::size_t n_train =
        std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(tof.train_fraction * n)), 1, n - 1);

    Dataset train, test;
    train.catalog_id = test.catalog_id = p.non_outliers.catalog_id;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = p.non_outliers.sequences[order[i]];
        (i < n_train ? train : test).sequences.push_back(s);
        (i < n_train ? r.train_ids : r.test_ids).push_back(s.id);
    }

    // One vocabulary for every model so all runs share the same initialization.
    Dataset everything = p.non_outliers;
    for (const auto& s : p.outliers.sequences) everything.sequences.push_back(s);
    const Vocab vocab = Vocab::build(everything, catalog);

    const auto baseline = train_autoencoder(train, cfg, vocab);
    r.baseline_loss = mean_reconstruction_loss(baseline.model, test);

    // Warm-start reference: the baseline continued for one epoch on its own.
    ModelConfig warm_cfg = cfg;
    warm_cfg.epochs = 1;
    std::optional<double> warm_reference;
    if (p.outliers.size() > tof.max_full_retrains) {
        TrainOptions opts;
        opts.init = &baseline.model.weights();
        warm_reference = mean_reconstruction_loss(train_autoencoder(train, warm_cfg, vocab, opts).model, test);
    }

    r.verdicts.resize(p.outliers.size());
    auto judge = [&](std::size_t i) {
        const BehaviorSequence& outlier = p.outliers.sequences[i];
        RetentionVerdict v;
        v.outlier_id = outlier.id;
        TrainOptions opts;
        opts.tail = {&outlier};
        if (i < tof.max_full_retrains) {
            v.baseline_loss = r.baseline_loss;
            v.with_outlier_loss = mean_reconstruction_loss(train_autoencoder(train, cfg, vocab, opts).model, test);
        } else {
            v.warm_start = true;
            opts.init = &baseline.model.weights();
            v.baseline_loss = *warm_reference;
            v.with_outlier_loss =
                mean_reconstruction_loss(train_autoencoder(train, warm_cfg, vocab, opts).model, test);
        }
        v.decision = v.with_outlier_loss <= v.baseline_loss ? Decision::retain : Decision::remove;
        r.verdicts[i] = std::move(v);
    };

    const std::size_t threads = std::max(1, tof.threads);
    if (threads <= 1 || p.outliers.size() <= 1) {
        for (std::size_t i = 0; i < p.outliers.size(); ++i) judge(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(p.outliers.size());
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < std::min(threads, p.outliers.size()); ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < p.outliers.size(); i = next++) {
                    try {
                        judge(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    std::set<std::string> keep;
    for (const auto& s : p.non_outliers.sequences) keep.insert(s.id);
    for (const auto& v : r.verdicts) {
        if (v.decision == Decision::retain) keep.insert(v.outlier_id);
    }
    r.filtered.catalog_id = p.non_outliers.catalog_id;
    auto take = [&](const BehaviorSequence& s) {
        if (!keep.count(s.id)) return;
        BehaviorSequence f = s;
        f.origin = Origin::filtered;
        r.filtered.sequences.push_back(std::move(f));
    };
    // Restore the original input order recorded in the loss list.
    std::map<std::string, const BehaviorSequence*> by_id;
    for (const auto& s : p.non_outliers.sequences) by_id[s.id] = &s;
    for (const auto& s : p.outliers.sequences) by_id[s.id] = &s;
    if (p.losses.size() == by_id.size()) {
        for (const auto& [id, loss] : p.losses) take(*by_id.at(id));
    } else {
        for (const auto& s : p.non_outliers.sequences) take(s);
        for (const auto& s : p.outliers.sequences) take(s);
    }
    return r;
}

nlohmann::json tof_report(const OutlierPartition& p, const RetentionResult& r) {
    nlohmann::json losses = nlohmann::json::array();
    std::set<std::string> outlier_ids;
    for (const auto& s : p.outliers.sequences) outlier_ids.insert(s.id);
    for (const auto& [id, loss] : p.losses)
        losses.push_back({{"id", id}, {"loss", loss}, {"outlier", outlier_ids.count(id) > 0}});
    nlohmann::json verdicts = nlohmann::json::array();
    for (const auto& v : r.verdicts) {
        verdicts.push_back({{"id", v.outlier_id},
                            {"baseline_loss", v.baseline_loss},
                            {"with_outlier_loss", v.with_outlier_loss},
                            {"decision", v.decision == Decision::retain ? "retain" : "delete"},
                            {"warm_start", v.warm_start}});
    }
    return {{"losses", losses},
            {"q1", p.bounds.q1},
            {"q3", p.bounds.q3},
            {"iqr", p.bounds.iqr},
            {"threshold", p.bounds.upper},
            {"non_outlier_count", p.non_outliers.size()},
            {"outlier_count", p.outliers.size()},
            {"baseline_loss", r.baseline_loss},
            {"train_ids", r.train_ids},
            {"test_ids", r.test_ids},
            {"verdicts", verdicts},
            {"retained_count", r.filtered.size()}};
}

} // namespace smartgen
