#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "smartgen/core.hpp"

namespace smartgen {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

/// Bijection between `Device:action` tokens and integer ids. Ids 0..2 are
/// reserved for PAD, MASK and UNK; catalog tokens follow in sorted order.
class Vocab {
public:
    static constexpr int kPad = 0;
    static constexpr int kMask = 1;
    static constexpr int kUnk = 2;
    static constexpr int kFirstToken = 3;

    Vocab() = default;
    explicit Vocab(std::vector<std::string> tokens);

    /// Tokens of `ds` plus every catalog token (catalog may be null).
    static Vocab build(const Dataset& ds, const DeviceCatalog* catalog = nullptr);

    int id(const std::string& token) const;
    const std::string& token(int id) const;
    int size() const { return static_cast<int>(tokens_.size()) + kFirstToken; }
    int real_token_count() const { return static_cast<int>(tokens_.size()); }
    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> ids_;
};

struct ModelConfig {
    int embed_dim = 64;
    int heads = 2;
    int layers = 2;
    int ffn_dim = 128;
    int max_len = 128;
    double mask_ratio = 0.25;
    int epochs = 30;
    int batch_size = 16;
    double learning_rate = 1e-3;
    std::uint64_t seed = 7;

    /// Throws ConfigError on inconsistent values.
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct TokenizedSequence {
    std::vector<int> ids;
    std::vector<int> hours;
    bool truncated = false;
};

TokenizedSequence tokenize(const BehaviorSequence& s, const Vocab& v, int max_len);

/// Sinusoidal encoding: component 2i is sin(pos / 10000^(2i/d)) and
/// 2i+1 the matching cosine. Throws ConfigError for odd d.
Vec positional_encoding(int pos, int d);

struct LayerWeights {
    Mat wq, wk, wv, wo;
    Mat ln1_gain, ln1_bias;
    Mat w1, b1, w2, b2;
    Mat ln2_gain, ln2_bias;
};

/// Every trainable tensor. `tensors()` yields them in a fixed order that
/// the optimizer and checkpoint format both rely on.
struct Weights {
    Mat token_embedding;  // vocab x d
    Mat hour_embedding;   // 24 x d
    std::vector<LayerWeights> layers;
    Mat out_w;  // d x vocab
    Mat out_b;  // 1 x vocab

    std::vector<std::pair<std::string, Mat*>> tensors();
    std::vector<std::pair<std::string, const Mat*>> tensors() const;

    static Weights zeros_like(const Weights& w);
    static Weights initialize(int vocab_size, const ModelConfig& cfg, std::uint64_t seed);
};

/// Gradient of the masked NLL with respect to every weight tensor.
struct LossAndGradients {
    double loss = 0.0;  // sum of NLL over target positions
    std::size_t targets = 0;
    Weights grads;
};

class SeqAutoencoder {
public:
    SeqAutoencoder(Vocab vocab, ModelConfig config, Weights weights);

    const Vocab& vocab() const { return vocab_; }
    const ModelConfig& config() const { return config_; }
    const Weights& weights() const { return weights_; }
    Weights& mutable_weights() { return weights_; }

    /// Encoder output, one row per token. Throws ContractError on empty or
    /// over-long input. When `attention` is given it receives every head's
    /// softmax matrix, layer-major.
    Mat encode(const std::vector<int>& ids, const std::vector<int>& hours,
               std::vector<Mat>* attention = nullptr) const;

    /// Per-position vocabulary log-probabilities.
    Mat log_probs(const std::vector<int>& ids, const std::vector<int>& hours) const;

    /// Forward + backward for one input. `targets[i]` is the original token
    /// at `positions[i]`; the loss is the summed NLL over those positions.
    /// `scale` multiplies every gradient (use 1/total_targets for a batch mean).
    LossAndGradients loss_and_gradients(const std::vector<int>& ids, const std::vector<int>& hours,
                                        const std::vector<int>& positions, const std::vector<int>& targets,
                                        double scale = 1.0) const;

    /// Summed NLL without gradients.
    double masked_nll(const std::vector<int>& ids, const std::vector<int>& hours, const std::vector<int>& positions,
                      const std::vector<int>& targets) const;

    /// Order-sensitive digest of every weight's bit pattern.
    std::uint64_t checksum() const;

private:
    Vocab vocab_;
    ModelConfig config_;
    Weights weights_;
};

struct TrainResult {
    SeqAutoencoder model;
    std::vector<double> epoch_losses;
};

struct TrainOptions {
    /// Sequences appended to the final minibatch of every epoch, after the
    /// seeded shuffle of the main set. Lets a candidate sequence be added
    /// without perturbing the batch order of the rest.
    std::vector<const BehaviorSequence*> tail;
    /// Start from these weights instead of the seeded initialization.
    const Weights* init = nullptr;
};

/// Masked-denoising training with Adam. Fully deterministic for a fixed
/// (dataset, vocab, config). Throws ContractError on an empty dataset and
/// DegenerateCorpusError when the vocabulary has fewer than 2 real tokens.
TrainResult train_autoencoder(const Dataset& ds, const ModelConfig& cfg, const Vocab& vocab,
                              const TrainOptions& opts = {});
TrainResult train_autoencoder(const Dataset& ds, const ModelConfig& cfg, const DeviceCatalog* catalog = nullptr);

/// Number of scoring mask patterns.
inline constexpr int kScoringPatterns = 4;

/// Mean masked NLL over the deterministic scoring patterns for `s`
/// (each position is masked in exactly one pattern).
double reconstruction_loss(const SeqAutoencoder& m, const BehaviorSequence& s);

/// Scoring patterns for a sequence of length n: a seeded permutation of
/// positions dealt round-robin into kScoringPatterns groups.
std::vector<std::vector<int>> scoring_masks(std::uint64_t model_seed, const std::string& sequence_id, int n);

/// Mean reconstruction loss over a dataset.
double mean_reconstruction_loss(const SeqAutoencoder& m, const Dataset& ds);

nlohmann::json to_json(const SeqAutoencoder& m);
SeqAutoencoder model_from_json(const nlohmann::json& j);
void save_model(const std::string& path, const SeqAutoencoder& m);
SeqAutoencoder load_model(const std::string& path);

} // namespace smartgen
