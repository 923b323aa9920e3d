#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "smartgen/core.hpp"
#include "smartgen/seqmodel.hpp"

namespace smartgen {

/// Linear interpolation between the order statistics at rank p/100*(n-1).
/// Throws ContractError on an empty list or p outside [0, 100].
double percentile(std::vector<double> values, double p);

struct IqrBounds {
    double q1 = 0.0;
    double q3 = 0.0;
    double iqr = 0.0;
    double upper = 0.0;  // q3 + 1.5 * iqr
};

IqrBounds iqr_bounds(const std::vector<double>& values);

struct OutlierPartition {
    Dataset non_outliers;
    Dataset outliers;
    std::vector<std::pair<std::string, double>> losses;  // input order
    IqrBounds bounds;
};

/// Splits by loss > upper bound. `losses[i]` belongs to ds.sequences[i].
OutlierPartition partition_by_loss(const Dataset& ds, const std::vector<double>& losses);

/// Trains a fresh autoencoder on `synthetic`, scores every sequence and
/// partitions at Q3 + 1.5 IQR. Throws InsufficientDataError below 4
/// sequences.
OutlierPartition detect_outliers(const Dataset& synthetic, const ModelConfig& cfg,
                                 const DeviceCatalog* catalog = nullptr);

enum class Decision { retain, remove };

struct RetentionVerdict {
    std::string outlier_id;
    double baseline_loss = 0.0;
    double with_outlier_loss = 0.0;
    Decision decision = Decision::remove;
    bool warm_start = false;
};

struct TofConfig {
    double train_fraction = 0.8;
    std::uint64_t split_seed = 11;
    /// Outliers beyond this count are judged by a one-epoch warm start
    /// from the baseline weights instead of a full retrain.
    std::size_t max_full_retrains = 200;
    int threads = 1;
};

struct RetentionResult {
    Dataset filtered;  // origin = filtered, input order preserved
    std::vector<RetentionVerdict> verdicts;
    double baseline_loss = 0.0;
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
};

/// Splits the non-outliers train/test, trains a baseline and, for each
/// outlier, an identically seeded model with that outlier added; keeps the
/// outlier iff the test loss does not rise. Throws InsufficientDataError
/// with fewer than 5 non-outliers.
RetentionResult evaluate_outliers(const OutlierPartition& p, const ModelConfig& cfg, const TofConfig& tof = {},
                                  const DeviceCatalog* catalog = nullptr);

nlohmann::json tof_report(const OutlierPartition& p, const RetentionResult& r);

} // namespace smartgen
