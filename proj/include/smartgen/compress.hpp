#pragma once

#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smartgen/core.hpp"
#include "smartgen/seqmodel.hpp"

namespace smartgen {

/// Mean of the encoder's per-token rows for an unmasked sequence.
Vec sequence_embedding(const SeqAutoencoder& m, const BehaviorSequence& s);

/// u.v / (|u||v|). Throws NumericError on a zero-norm input.
double cosine_similarity(const Vec& u, const Vec& v);

struct CompressionResult {
    Dataset retained;
    std::vector<std::string> removed_ids;
    double alpha = 0.0;
    std::size_t input_count = 0;

    double reduction_rate() const {
        return input_count == 0 ? 0.0 : 1.0 - static_cast<double>(retained.size()) / input_count;
    }
    /// Prompt tokens saved by dropping the removed sequences, at 4 tokens
    /// per behavior.
    std::size_t saved_tokens = 0;
};

inline constexpr std::size_t kTokensPerBehavior = 4;
inline constexpr double kDefaultAlpha = 0.9;

/// Greedy threshold scan: walking in dataset order, every not-yet-removed
/// sequence i removes each later j with similarity(i, j) > alpha.
/// `similarity(i, j)` is evaluated only for i < j.
std::vector<bool> greedy_removal(std::size_t n, double alpha,
                                 const std::function<double(std::size_t, std::size_t)>& similarity);

/// Row-normalized embedding matrix (one row per sequence).
Mat normalized_embeddings(const SeqAutoencoder& m, const Dataset& ds);

/// Greedy dedup over precomputed normalized embeddings.
CompressionResult compress_embeddings(const Dataset& ds, const Mat& normalized, double alpha);

/// Embeds every sequence with `m` and deduplicates at threshold alpha.
/// Throws ContractError unless 0 < alpha <= 1 and ds is non-empty.
CompressionResult compress(const Dataset& ds, const SeqAutoencoder& m, double alpha);

nlohmann::json compression_report(const CompressionResult& r);

} // namespace smartgen
