#include "smartgen/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "smartgen/compress.hpp"
#include "smartgen/error.hpp"
#include "smartgen/filter.hpp"
#include "smartgen/rng.hpp"

namespace smartgen {

AdMetrics ad_metrics(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
    if (tp + fn == 0) throw MetricsError("recall is undefined without anomalous ground truth (TP + FN = 0)");
    AdMetrics m{tp, fp, tn, fn};
    m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    m.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    return m;
}

AdResult ad_evaluate(const Dataset& train, const std::vector<LabeledSequence>& test, const ModelConfig& cfg,
                     const DeviceCatalog* catalog) {
    const bool has_anomalous = std::any_of(test.begin(), test.end(), [](const auto& t) { return t.anomalous; });
    const bool has_normal = std::any_of(test.begin(), test.end(), [](const auto& t) { return !t.anomalous; });
    if (!has_anomalous) throw MetricsError("ad_evaluate: no anomalous test sequence, recall is undefined");
    if (!has_normal) throw MetricsError("ad_evaluate: no normal test sequence, false-positive rate is undefined");

    Dataset everything = train;
    for (const auto& t : test) everything.sequences.push_back(t.sequence);
    const auto trained = train_autoencoder(train, cfg, Vocab::build(everything, catalog));

    std::vector<double> train_losses;
    for (const auto& s : train.sequences) train_losses.push_back(reconstruction_loss(trained.model, s));
    AdResult r;
    r.threshold = iqr_bounds(train_losses).upper;

    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (const auto& t : test) {
        const double score = reconstruction_loss(trained.model, t.sequence);
        r.scores.push_back(score);
        const bool flagged = score > r.threshold;
        if (flagged) (t.anomalous ? tp : fp)++;
        else (t.anomalous ? fn : tn)++;
    }
    r.metrics = ad_metrics(tp, fp, tn, fn);
    return r;
}

RankMetrics rank_metrics(const std::vector<std::vector<std::string>>& ranked, const std::vector<std::string>& truth) {
    if (ranked.empty()) throw ContractError("rank_metrics: empty event set");
    if (ranked.size() != truth.size()) throw ContractError("rank_metrics: one truth per ranked list required");
    RankMetrics m;
    m.events = ranked.size();
    for (std::size_t e = 0; e < ranked.size(); ++e) {
        const auto& list = ranked[e];
        if (list.size() > kTopK) throw ContractError("rank_metrics: ranked list longer than 10");
        if (std::set<std::string>(list.begin(), list.end()).size() != list.size())
            throw ContractError("rank_metrics: ranked list has duplicates");
        const auto it = std::find(list.begin(), list.end(), truth[e]);
        if (it == list.end()) continue;
        const auto rank = static_cast<double>(it - list.begin()) + 1.0;
        m.ndcg_at_10 += 1.0 / std::log2(rank + 1.0);
        m.hr_at_10 += 1.0;
    }
    m.ndcg_at_10 /= static_cast<double>(m.events);
    m.hr_at_10 /= static_cast<double>(m.events);
    return m;
}

namespace {

using Ranked = std::vector<std::pair<std::string, std::uint64_t>>;

void sort_ranked(Ranked& r) {
    std::sort(r.begin(), r.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
}

} // namespace

TransitionPredictor::TransitionPredictor(const Dataset& train) {
    if (train.empty() || train.behavior_count() == 0) throw ContractError("predictor: empty training set");
    std::map<std::string, std::uint64_t> freq;
    for (const auto& s : train.sequences) {
        for (std::size_t i = 0; i < s.size(); ++i) {
            ++freq[s.behaviors[i].token()];
            if (i + 1 < s.size()) ++rows_[s.behaviors[i].token()][s.behaviors[i + 1].token()];
        }
    }
    Ranked global(freq.begin(), freq.end());
    sort_ranked(global);
    for (const auto& [token, count] : global) global_.push_back(token);
}

std::vector<std::string> TransitionPredictor::rank(const std::string& current, std::size_t k) const {
    std::vector<std::string> out;
    if (const auto row = rows_.find(current); row != rows_.end()) {
        Ranked next(row->second.begin(), row->second.end());
        sort_ranked(next);
        for (const auto& [token, count] : next) {
            if (out.size() == k) return out;
            out.push_back(token);
        }
    }
    for (const auto& token : global_) {
        if (out.size() == k) break;
        if (std::find(out.begin(), out.end(), token) == out.end()) out.push_back(token);
    }
    return out;
}

RankMetrics next_action_evaluation(const Dataset& train, const Dataset& test) {
    const TransitionPredictor predictor(train);
    std::vector<std::vector<std::string>> ranked;
    std::vector<std::string> truth;
    for (const auto& s : test.sequences) {
        for (std::size_t i = 0; i + 1 < s.size(); ++i) {
            ranked.push_back(predictor.rank(s.behaviors[i].token()));
            truth.push_back(s.behaviors[i + 1].token());
        }
    }
    return rank_metrics(ranked, truth);
}

double jaccard_similarity(const BehaviorSequence& a, const BehaviorSequence& b) {
    std::set<std::string> ta, tb;
    for (const auto& x : a.behaviors) ta.insert(x.token());
    for (const auto& x : b.behaviors) tb.insert(x.token());
    if (ta.empty() && tb.empty()) return 1.0;
    std::size_t common = 0;
    for (const auto& t : ta) common += tb.count(t);
    return static_cast<double>(common) / static_cast<double>(ta.size() + tb.size() - common);
}

namespace {

struct Subset {
    std::vector<bool> removed;
    double threshold = 0.0;
    double rate = 1.0;
};

double retention(const std::vector<bool>& removed) {
    const auto kept = std::count(removed.begin(), removed.end(), false);
    return static_cast<double>(kept) / static_cast<double>(removed.size());
}

// Bisects the threshold in [lo, hi]; retention grows with the threshold.
Subset search_threshold(std::size_t n, double target, double lo, double hi, const Mat& sim) {
    auto run = [&](double t) {
        return greedy_removal(n, t, [&](std::size_t i, std::size_t j) {
            return sim(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        });
    };
    Subset best{run(hi), hi, 0.0};
    best.rate = retention(best.removed);
    auto consider = [&](double t) {
        Subset s{run(t), t, 0.0};
        s.rate = retention(s.removed);
        const double rate = s.rate;
        if (std::abs(rate - target) < std::abs(best.rate - target)) best = std::move(s);
        return rate;
    };
    for (int iter = 0; iter < 50; ++iter) {
        const double mid = 0.5 * (lo + hi);
        const double rate = consider(mid);
        if (rate < target) lo = mid;
        else hi = mid;
    }
    return best;
}

double variance(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return acc / static_cast<double>(v.size() - 1);
}

std::pair<double, double> test_loss(const Dataset& train, const Dataset& test, const ModelConfig& cfg,
                                    const Vocab& vocab) {
    const auto trained = train_autoencoder(train, cfg, vocab);
    std::vector<double> losses;
    for (const auto& s : test.sequences) losses.push_back(reconstruction_loss(trained.model, s));
    const double mean = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
    return {mean, variance(losses, mean)};
}

Dataset take(const Dataset& pool, const std::vector<bool>& removed) {
    Dataset out;
    out.catalog_id = pool.catalog_id;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (!removed[i]) out.sequences.push_back(pool.sequences[i]);
    }
    return out;
}

} // namespace

ComparisonReport compression_comparison(const Dataset& full, const ModelConfig& cfg, const ComparisonConfig& cc,
                                        const DeviceCatalog* catalog) {
    if (full.size() < 50) throw InsufficientDataError("compression comparison needs at least 50 sequences");
    if (!(cc.test_fraction > 0.0 && cc.test_fraction < 1.0))
        throw ConfigError("comparison: test_fraction must lie in (0, 1)");
    for (double r : cc.rates) {
        if (!(r > 0.0 && r <= 1.0)) throw ConfigError("comparison: rates must lie in (0, 1]");
    }

    std::vector<std::size_t> order(full.size());
    std::iota(order.begin(), order.end(), 0);
    Rng(cc.split_seed).shuffle(order);
    const auto n_test = static_cast<std::size_t>(std::lround(cc.test_fraction * static_cast<double>(full.size())));
    Dataset pool, test;
    pool.catalog_id = test.catalog_id = full.catalog_id;
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < n_test ? test : pool).sequences.push_back(full.sequences[order[i]]);

    const Vocab vocab = Vocab::build(full, catalog);
    ComparisonReport report;
    report.pool_size = pool.size();
    report.test_size = test.size();
    std::tie(report.full_mean_loss, report.full_variance) = test_loss(pool, test, cfg, vocab);

    const std::size_t n = pool.size();
    Mat ssc_sim, jac_sim(n, n);
    {
        const auto embedder = train_autoencoder(pool, cfg, vocab);
        const Mat e = normalized_embeddings(embedder.model, pool);
        ssc_sim = (e * e.transpose()).cwiseMax(-1.0).cwiseMin(1.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i; j < n; ++j) {
                const double s = jaccard_similarity(pool.sequences[i], pool.sequences[j]);
                jac_sim(i, j) = jac_sim(j, i) = s;
            }
        }
    }

    for (double rate : cc.rates) {
        for (const std::string method : {"ssc", "similarity"}) {
            MethodOutcome o;
            o.method = method;
            o.target_rate = rate;
            if (rate >= 1.0) {
                o.attained_rate = 1.0;
                o.attained = true;
                o.threshold = 1.0;
                o.retained = n;
                o.epochs = cfg.epochs;
                o.mean_loss = report.full_mean_loss;
                o.variance = report.full_variance;
                report.rows.push_back(o);
                continue;
            }
            const Subset s = method == "ssc" ? search_threshold(n, rate, 0.0, 1.0, ssc_sim)
                                             : search_threshold(n, rate, 0.0, 1.0, jac_sim);
            o.threshold = s.threshold;
            o.attained_rate = s.rate;
            o.attained = std::abs(s.rate - rate) <= cc.tolerance;
            const Dataset subset = take(pool, s.removed);
            o.retained = subset.size();
            ModelConfig sub_cfg = cfg;
            if (cc.equalize_steps)
                sub_cfg.epochs = static_cast<int>(
                    std::lround(cfg.epochs * static_cast<double>(n) / static_cast<double>(subset.size())));
            o.epochs = sub_cfg.epochs;
            std::tie(o.mean_loss, o.variance) = test_loss(subset, test, sub_cfg, vocab);
            report.rows.push_back(o);
        }
    }
    return report;
}

nlohmann::json to_json(const AdMetrics& m) {
    return {{"tp", m.tp},         {"fp", m.fp},   {"tn", m.tn}, {"fn", m.fn}, {"recall", m.recall},
            {"precision", m.precision}, {"f1", m.f1}};
}

nlohmann::json to_json(const RankMetrics& m) {
    return {{"ndcg_at_10", m.ndcg_at_10}, {"hr_at_10", m.hr_at_10}, {"events", m.events}};
}

nlohmann::json to_json(const ComparisonReport& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& o : r.rows) {
        rows.push_back({{"method", o.method},
                        {"target_rate", o.target_rate},
                        {"attained_rate", o.attained_rate},
                        {"attained", o.attained},
                        {"threshold", o.threshold},
                        {"retained", o.retained},
                        {"epochs", o.epochs},
                        {"mean_loss", o.mean_loss},
                        {"variance", o.variance}});
    }
    return {{"pool_size", r.pool_size},
            {"test_size", r.test_size},
            {"full", {{"mean_loss", r.full_mean_loss}, {"variance", r.full_variance}}},
            {"rows", rows}};
}

std::string comparison_csv(const ComparisonReport& r) {
    std::ostringstream out;
    out.precision(10);
    out << "rate,method,mean_loss,variance\n";
    out << "1,full," << r.full_mean_loss << ',' << r.full_variance << '\n';
    for (const auto& o : r.rows) out << o.target_rate << ',' << o.method << ',' << o.mean_loss << ',' << o.variance << '\n';
    return out.str();
}

} // namespace smartgen
