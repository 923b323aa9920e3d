#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smartgen/core.hpp"
#include "smartgen/seqmodel.hpp"

namespace smartgen {

struct AdMetrics {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double recall = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
};

/// Recall needs TP+FN > 0 (MetricsError otherwise). Precision is 0 when
/// nothing is predicted anomalous; F1 is 0 when precision + recall is 0.
AdMetrics ad_metrics(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn);

struct LabeledSequence {
    BehaviorSequence sequence;
    bool anomalous = false;
};

struct AdResult {
    AdMetrics metrics;
    double threshold = 0.0;
    std::vector<double> scores;  // one per test sequence
};

/// Trains on `train`, flags test sequences whose reconstruction loss
/// exceeds Q3 + 1.5 IQR of the training losses. Throws MetricsError unless
/// both labels occur in `test`.
AdResult ad_evaluate(const Dataset& train, const std::vector<LabeledSequence>& test, const ModelConfig& cfg,
                     const DeviceCatalog* catalog = nullptr);

struct RankMetrics {
    double ndcg_at_10 = 0.0;
    double hr_at_10 = 0.0;
    std::size_t events = 0;
};

inline constexpr std::size_t kTopK = 10;

/// Binary-relevance NDCG@10 and HR@10 averaged over events. Throws
/// ContractError on an empty event set, mismatched sizes or a list with
/// more than 10 entries or duplicates.
RankMetrics rank_metrics(const std::vector<std::vector<std::string>>& ranked, const std::vector<std::string>& truth);

/// First-order transition predictor with global-frequency backfill.
class TransitionPredictor {
public:
    /// Throws ContractError on an empty training set.
    explicit TransitionPredictor(const Dataset& train);

    /// Up to k next actions after `current`: transition counts descending
    /// (ties by token), then the remaining tokens by global frequency.
    std::vector<std::string> rank(const std::string& current, std::size_t k = kTopK) const;

private:
    std::map<std::string, std::map<std::string, std::uint64_t>> rows_;
    std::vector<std::string> global_;
};

/// Ranks every consecutive (current, next) pair of `test` with a predictor
/// trained on `train`.
RankMetrics next_action_evaluation(const Dataset& train, const Dataset& test);

/// Token-set Jaccard similarity of two sequences.
double jaccard_similarity(const BehaviorSequence& a, const BehaviorSequence& b);

struct ComparisonConfig {
    std::vector<double> rates{0.2};  // retention fractions
    double test_fraction = 0.2;
    double tolerance = 0.02;
    std::uint64_t split_seed = 13;
    /// Scale epochs by |pool| / |subset| so every model takes about the
    /// same number of optimizer steps.
    bool equalize_steps = false;
};

struct MethodOutcome {
    std::string method;  // "ssc" | "similarity"
    double target_rate = 0.0;
    double attained_rate = 0.0;
    bool attained = false;
    double threshold = 0.0;  // alpha or Jaccard cutoff
    std::size_t retained = 0;
    int epochs = 0;
    double mean_loss = 0.0;
    double variance = 0.0;
};

struct ComparisonReport {
    std::size_t pool_size = 0;
    std::size_t test_size = 0;
    double full_mean_loss = 0.0;
    double full_variance = 0.0;
    std::vector<MethodOutcome> rows;
};

/// Holds out a seeded test split, then for each retention rate compresses
/// the remaining pool with SSC (alpha searched to the rate) and with the
/// Jaccard baseline, trains one model per subset and reports test
/// reconstruction loss against full-pool training. Throws
/// InsufficientDataError below 50 sequences.
ComparisonReport compression_comparison(const Dataset& full, const ModelConfig& cfg, const ComparisonConfig& cc = {},
                                        const DeviceCatalog* catalog = nullptr);

nlohmann::json to_json(const AdMetrics& m);
nlohmann::json to_json(const RankMetrics& m);
nlohmann::json to_json(const ComparisonReport& r);
/// `rate,method,mean_loss,variance` rows, the full-data row as rate 1.
std::string comparison_csv(const ComparisonReport& r);

} // namespace smartgen
