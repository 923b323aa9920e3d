#include "smartgen/compress.hpp"

#include <algorithm>
#include <cmath>

#include "smartgen/error.hpp"

namespace smartgen {

namespace {

// Rows of the similarity matrix are formed this many at a time.
constexpr Eigen::Index kSimilarityBlock = 256;

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ContractError("compress: alpha must lie in (0, 1]");
}

} // namespace

Vec sequence_embedding(const SeqAutoencoder& m, const BehaviorSequence& s) {
    if (s.empty()) throw ContractError("sequence_embedding: empty sequence");
    const auto tok = tokenize(s, m.vocab(), m.config().max_len);
    const Mat z = m.encode(tok.ids, tok.hours);
    return z.colwise().mean().transpose();
}

double cosine_similarity(const Vec& u, const Vec& v) {
    if (u.size() != v.size()) throw ContractError("cosine_similarity: dimension mismatch");
    const double nu = u.norm();
    const double nv = v.norm();
    if (nu == 0.0 || nv == 0.0) throw NumericError("cosine_similarity: zero-norm vector");
    return std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
}

std::vector<bool> greedy_removal(std::size_t n, double alpha,
                                 const std::function<double(std::size_t, std::size_t)>& similarity) {
    std::vector<bool> removed(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        if (removed[i]) continue;
        for (std::size_t j = i + 1; j < n; ++j) {
            if (!removed[j] && similarity(i, j) > alpha) removed[j] = true;
        }
    }
    return removed;
}

Mat normalized_embeddings(const SeqAutoencoder& m, const Dataset& ds) {
    Mat e(static_cast<Eigen::Index>(ds.size()), m.config().embed_dim);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const Vec v = sequence_embedding(m, ds.sequences[i]);
        const double norm = v.norm();
        if (norm == 0.0) throw NumericError("compress: sequence '" + ds.sequences[i].id + "' embeds to zero");
        e.row(static_cast<Eigen::Index>(i)) = v.transpose() / norm;
    }
    return e;
}

CompressionResult compress_embeddings(const Dataset& ds, const Mat& normalized, double alpha) {
    check_alpha(alpha);
    if (ds.empty()) throw ContractError("compress: empty dataset");
    const Eigen::Index n = normalized.rows();

    Mat sim(n, n);
    for (Eigen::Index start = 0; start < n; start += kSimilarityBlock) {
        const Eigen::Index rows = std::min(kSimilarityBlock, n - start);
        sim.middleRows(start, rows).noalias() = normalized.middleRows(start, rows) * normalized.transpose();
    }
    const auto removed = greedy_removal(static_cast<std::size_t>(n), alpha, [&](std::size_t i, std::size_t j) {
        return std::clamp(sim(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), -1.0, 1.0);
    });

    CompressionResult r;
    r.alpha = alpha;
    r.input_count = ds.size();
    r.retained.catalog_id = ds.catalog_id;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (removed[i]) {
            r.removed_ids.push_back(ds.sequences[i].id);
            r.saved_tokens += ds.sequences[i].size() * kTokensPerBehavior;
        } else {
            r.retained.sequences.push_back(ds.sequences[i]);
        }
    }
    return r;
}

CompressionResult compress(const Dataset& ds, const SeqAutoencoder& m, double alpha) {
    check_alpha(alpha);
    if (ds.empty()) throw ContractError("compress: empty dataset");
    return compress_embeddings(ds, normalized_embeddings(m, ds), alpha);
}

nlohmann::json compression_report(const CompressionResult& r) {
    std::vector<std::string> retained;
    for (const auto& s : r.retained.sequences) retained.push_back(s.id);
    return {{"alpha", r.alpha},
            {"input_count", r.input_count},
            {"retained_count", r.retained.size()},
            {"retained_ids", retained},
            {"removed_ids", r.removed_ids},
            {"reduction_rate", r.reduction_rate()},
            {"saved_tokens", r.saved_tokens}};
}

} // namespace smartgen
