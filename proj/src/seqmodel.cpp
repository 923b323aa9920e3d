#include "smartgen/seqmodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>

#include "smartgen/error.hpp"
#include "smartgen/rng.hpp"

namespace smartgen {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr int kHourBuckets = 24;
constexpr int kCheckpointVersion = 1;

struct NormCache {
    Mat xhat;
    Vec inv_std;
};

Mat layer_norm(const Mat& x, const Mat& gain, const Mat& bias, NormCache* cache) {
    const auto n = x.rows();
    const auto d = x.cols();
    Mat xhat(n, d);
    Vec inv(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const double mu = x.row(r).mean();
        const double var = (x.row(r).array() - mu).square().mean();
        inv(r) = 1.0 / std::sqrt(var + kLayerNormEps);
        xhat.row(r) = (x.row(r).array() - mu) * inv(r);
    }
    Mat y = (xhat.array().rowwise() * gain.row(0).array()).rowwise() + bias.row(0).array();
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv);
    }
    return y;
}

Mat layer_norm_backward(const Mat& dy, const NormCache& c, const Mat& gain, Mat& dgain, Mat& dbias) {
    const double d = static_cast<double>(dy.cols());
    dgain.row(0) += (dy.array() * c.xhat.array()).colwise().sum().matrix();
    dbias.row(0) += dy.colwise().sum();
    const Mat dxhat = dy.array().rowwise() * gain.row(0).array();
    Mat dx(dy.rows(), dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
        const double s1 = dxhat.row(r).sum();
        const double s2 = dxhat.row(r).dot(c.xhat.row(r));
        dx.row(r) = (c.inv_std(r) / d) * (d * dxhat.row(r).array() - s1 - c.xhat.row(r).array() * s2);
    }
    return dx;
}

void softmax_rows(Mat& s) {
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
        const double mx = s.row(r).maxCoeff();
        s.row(r) = (s.row(r).array() - mx).exp();
        s.row(r) /= s.row(r).sum();
    }
}

Mat log_softmax_rows(const Mat& logits) {
    Mat out(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double mx = logits.row(r).maxCoeff();
        const double lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
        out.row(r) = logits.row(r).array() - lse;
    }
    return out;
}

struct LayerCache {
    Mat x;
    Mat q, k, v;
    std::vector<Mat> probs;
    Mat concat;
    NormCache norm1;
    Mat y;
    Mat h_pre, h;
    NormCache norm2;
};

struct ForwardCache {
    std::vector<LayerCache> layers;
    Mat z;
};

Mat input_embedding(const Weights& w, const std::vector<int>& ids, const std::vector<int>& hours) {
    const int n = static_cast<int>(ids.size());
    const int d = static_cast<int>(w.token_embedding.cols());
    Mat x(n, d);
    for (int i = 0; i < n; ++i) {
        x.row(i) = w.token_embedding.row(ids[i]) + w.hour_embedding.row(hours[i]) +
                   positional_encoding(i, d).transpose();
    }
    return x;
}

Mat forward(const Weights& w, const ModelConfig& cfg, const std::vector<int>& ids, const std::vector<int>& hours,
            ForwardCache* cache, std::vector<Mat>* attention) {
    const int heads = cfg.heads;
    const int dk = cfg.embed_dim / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
    Mat x = input_embedding(w, ids, hours);
    if (cache) cache->layers.resize(w.layers.size());

    for (std::size_t l = 0; l < w.layers.size(); ++l) {
        const LayerWeights& lw = w.layers[l];
        LayerCache local;
        LayerCache& c = cache ? cache->layers[l] : local;
        c.q.noalias() = x * lw.wq;
        c.k.noalias() = x * lw.wk;
        c.v.noalias() = x * lw.wv;
        c.concat.resize(x.rows(), cfg.embed_dim);
        c.probs.resize(heads);
        for (int h = 0; h < heads; ++h) {
            Mat s = (c.q.middleCols(h * dk, dk) * c.k.middleCols(h * dk, dk).transpose()) * scale;
            softmax_rows(s);
            c.concat.middleCols(h * dk, dk).noalias() = s * c.v.middleCols(h * dk, dk);
            if (attention) attention->push_back(s);
            c.probs[h] = std::move(s);
        }
        Mat r1 = x;
        r1.noalias() += c.concat * lw.wo;
        c.y = layer_norm(r1, lw.ln1_gain, lw.ln1_bias, &c.norm1);
        c.h_pre = (c.y * lw.w1).rowwise() + lw.b1.row(0);
        c.h = c.h_pre.cwiseMax(0.0);
        Mat r2 = (c.h * lw.w2).rowwise() + lw.b2.row(0);
        r2 += c.y;
        c.x = std::move(x);
        x = layer_norm(r2, lw.ln2_gain, lw.ln2_bias, &c.norm2);
    }
    if (cache) cache->z = x;
    return x;
}

Mat logits_of(const Weights& w, const Mat& z) { return (z * w.out_w).rowwise() + w.out_b.row(0); }

// Backward pass of the summed masked NLL, gradients scaled by `scale` and
// added into `g`. Returns the (unscaled) loss.
double accumulate_gradients(const Weights& w, const ModelConfig& cfg, const std::vector<int>& ids,
                            const std::vector<int>& hours, const std::vector<int>& positions,
                            const std::vector<int>& targets, double scale, Weights& g) {
    ForwardCache cache;
    forward(w, cfg, ids, hours, &cache, nullptr);
    const Mat& z = cache.z;
    const Mat logp = log_softmax_rows(logits_of(w, z));

    const auto n = z.rows();
    Mat dlogits = Mat::Zero(n, w.out_w.cols());
    double loss = 0.0;
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const int p = positions[i];
        loss -= logp(p, targets[i]);
        dlogits.row(p) += logp.row(p).array().exp().matrix() * scale;
        dlogits(p, targets[i]) -= scale;
    }
    g.out_w.noalias() += z.transpose() * dlogits;
    g.out_b.row(0) += dlogits.colwise().sum();
    Mat dx = dlogits * w.out_w.transpose();

    const int heads = cfg.heads;
    const int dk = cfg.embed_dim / heads;
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dk));

    for (std::size_t li = w.layers.size(); li-- > 0;) {
        const LayerWeights& lw = w.layers[li];
        LayerWeights& lg = g.layers[li];
        const LayerCache& c = cache.layers[li];

        // out = LN2(y + FFN(y))
        const Mat dr2 = layer_norm_backward(dx, c.norm2, lw.ln2_gain, lg.ln2_gain, lg.ln2_bias);
        lg.w2.noalias() += c.h.transpose() * dr2;
        lg.b2.row(0) += dr2.colwise().sum();
        Mat dh = dr2 * lw.w2.transpose();
        dh = (c.h_pre.array() > 0.0).select(dh, 0.0);
        lg.w1.noalias() += c.y.transpose() * dh;
        lg.b1.row(0) += dh.colwise().sum();
        Mat dy = dr2;
        dy.noalias() += dh * lw.w1.transpose();

        // y = LN1(x + concat * wo)
        const Mat dr1 = layer_norm_backward(dy, c.norm1, lw.ln1_gain, lg.ln1_gain, lg.ln1_bias);
        lg.wo.noalias() += c.concat.transpose() * dr1;
        const Mat dconcat = dr1 * lw.wo.transpose();

        Mat dq(c.q.rows(), c.q.cols()), dk_(c.k.rows(), c.k.cols()), dv(c.v.rows(), c.v.cols());
        for (int h = 0; h < heads; ++h) {
            const Mat& p = c.probs[h];
            const auto dout = dconcat.middleCols(h * dk, dk);
            dv.middleCols(h * dk, dk).noalias() = p.transpose() * dout;
            const Mat dp = dout * c.v.middleCols(h * dk, dk).transpose();
            Mat ds = p.array() * (dp.array().colwise() - (dp.array() * p.array()).rowwise().sum());
            ds *= att_scale;
            dq.middleCols(h * dk, dk).noalias() = ds * c.k.middleCols(h * dk, dk);
            dk_.middleCols(h * dk, dk).noalias() = ds.transpose() * c.q.middleCols(h * dk, dk);
        }
        lg.wq.noalias() += c.x.transpose() * dq;
        lg.wk.noalias() += c.x.transpose() * dk_;
        lg.wv.noalias() += c.x.transpose() * dv;
        dx = dr1;
        dx.noalias() += dq * lw.wq.transpose();
        dx.noalias() += dk_ * lw.wk.transpose();
        dx.noalias() += dv * lw.wv.transpose();
    }

    for (Eigen::Index i = 0; i < n; ++i) {
        g.token_embedding.row(ids[i]) += dx.row(i);
        g.hour_embedding.row(hours[i]) += dx.row(i);
    }
    return loss;
}

Mat xavier(int rows, int cols, Rng& rng) {
    const double limit = std::sqrt(6.0 / (rows + cols));
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-limit, limit);
    return m;
}

Mat gaussian(int rows, int cols, double stddev, Rng& rng) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal() * stddev;
    return m;
}

void check_input(const ModelConfig& cfg, const std::vector<int>& ids, const std::vector<int>& hours) {
    if (ids.empty()) throw ContractError("encode: empty token list");
    if (static_cast<int>(ids.size()) > cfg.max_len) throw ContractError("encode: input longer than max_len");
    if (hours.size() != ids.size()) throw ContractError("encode: token and hour lists differ in length");
}

nlohmann::json mat_to_json(const Mat& m) {
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Mat mat_from_json(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw FormatError("checkpoint tensor size mismatch");
    Mat m(rows, cols);
    std::copy(data.begin(), data.end(), m.data());
    return m;
}

} // namespace

// ------------------------------------------------------------------ Vocab

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (!ids_.emplace(tokens_[i], static_cast<int>(i) + kFirstToken).second)
            throw FormatError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
}

Vocab Vocab::build(const Dataset& ds, const DeviceCatalog* catalog) {
    std::set<std::string> all;
    for (const auto& s : ds.sequences)
        for (const auto& b : s.behaviors) all.insert(b.token());
    if (catalog) {
        for (auto& t : catalog->tokens()) all.insert(std::move(t));
    }
    return Vocab{std::vector<std::string>(all.begin(), all.end())};
}

int Vocab::id(const std::string& token) const {
    const auto it = ids_.find(token);
    return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int id) const {
    static const std::string specials[] = {"<pad>", "<mask>", "<unk>"};
    if (id >= 0 && id < kFirstToken) return specials[id];
    return tokens_.at(static_cast<std::size_t>(id - kFirstToken));
}

// ------------------------------------------------------------ ModelConfig

void ModelConfig::validate() const {
    if (embed_dim <= 0 || embed_dim % 2 != 0) throw ConfigError("model: embed_dim must be positive and even");
    if (heads <= 0 || embed_dim % heads != 0) throw ConfigError("model: heads must divide embed_dim");
    if (layers < 1) throw ConfigError("model: layers must be >= 1");
    if (ffn_dim < 1) throw ConfigError("model: ffn_dim must be >= 1");
    if (max_len < 1) throw ConfigError("model: max_len must be >= 1");
    if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) throw ConfigError("model: mask_ratio must lie in (0, 1)");
    if (epochs < 1 || batch_size < 1) throw ConfigError("model: epochs and batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("model: learning_rate must be positive");
}

nlohmann::json to_json(const ModelConfig& c) {
    return {{"embed_dim", c.embed_dim},   {"heads", c.heads},           {"layers", c.layers},
            {"ffn_dim", c.ffn_dim},       {"max_len", c.max_len},       {"mask_ratio", c.mask_ratio},
            {"epochs", c.epochs},         {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
            {"seed", c.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.embed_dim = j.at("embed_dim").get<int>();
    c.heads = j.at("heads").get<int>();
    c.layers = j.at("layers").get<int>();
    c.ffn_dim = j.at("ffn_dim").get<int>();
    c.max_len = j.at("max_len").get<int>();
    c.mask_ratio = j.at("mask_ratio").get<double>();
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

// ------------------------------------------------------------- tokenizing

TokenizedSequence tokenize(const BehaviorSequence& s, const Vocab& v, int max_len) {
    TokenizedSequence out;
    const std::size_t n = std::min<std::size_t>(s.size(), static_cast<std::size_t>(std::max(max_len, 0)));
    out.truncated = s.size() > n;
    out.ids.reserve(n);
    out.hours.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.ids.push_back(v.id(s.behaviors[i].token()));
        out.hours.push_back(hour_of_day(s.behaviors[i].timestamp));
    }
    return out;
}

Vec positional_encoding(int pos, int d) {
    if (d <= 0 || d % 2 != 0) throw ConfigError("positional encoding needs an even, positive dimension");
    if (pos < 0) throw ContractError("positional encoding needs a non-negative position");
    Vec pe(d);
    for (int i = 0; i < d / 2; ++i) {
        const double angle = pos / std::pow(10000.0, 2.0 * i / d);
        pe(2 * i) = std::sin(angle);
        pe(2 * i + 1) = std::cos(angle);
    }
    return pe;
}

// ---------------------------------------------------------------- Weights

std::vector<std::pair<std::string, Mat*>> Weights::tensors() {
    std::vector<std::pair<std::string, Mat*>> out;
    out.emplace_back("token_embedding", &token_embedding);
    out.emplace_back("hour_embedding", &hour_embedding);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        auto& lw = layers[l];
        out.emplace_back(p + "wq", &lw.wq);
        out.emplace_back(p + "wk", &lw.wk);
        out.emplace_back(p + "wv", &lw.wv);
        out.emplace_back(p + "wo", &lw.wo);
        out.emplace_back(p + "ln1_gain", &lw.ln1_gain);
        out.emplace_back(p + "ln1_bias", &lw.ln1_bias);
        out.emplace_back(p + "w1", &lw.w1);
        out.emplace_back(p + "b1", &lw.b1);
        out.emplace_back(p + "w2", &lw.w2);
        out.emplace_back(p + "b2", &lw.b2);
        out.emplace_back(p + "ln2_gain", &lw.ln2_gain);
        out.emplace_back(p + "ln2_bias", &lw.ln2_bias);
    }
    out.emplace_back("out_w", &out_w);
    out.emplace_back("out_b", &out_b);
    return out;
}

std::vector<std::pair<std::string, const Mat*>> Weights::tensors() const {
    std::vector<std::pair<std::string, const Mat*>> out;
    for (auto& [name, m] : const_cast<Weights*>(this)->tensors()) out.emplace_back(name, m);
    return out;
}

Weights Weights::zeros_like(const Weights& w) {
    Weights z = w;
    for (auto& [name, m] : z.tensors()) m->setZero();
    return z;
}

Weights Weights::initialize(int vocab_size, const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const int d = cfg.embed_dim;
    Rng rng(derive_seed(seed, "init"));
    Weights w;
    w.token_embedding = gaussian(vocab_size, d, 1.0, rng);
    w.hour_embedding = gaussian(kHourBuckets, d, 0.1, rng);
    for (int l = 0; l < cfg.layers; ++l) {
        LayerWeights lw;
        lw.wq = xavier(d, d, rng);
        lw.wk = xavier(d, d, rng);
        lw.wv = xavier(d, d, rng);
        lw.wo = xavier(d, d, rng);
        lw.ln1_gain = Mat::Ones(1, d);
        lw.ln1_bias = Mat::Zero(1, d);
        lw.w1 = xavier(d, cfg.ffn_dim, rng);
        lw.b1 = Mat::Zero(1, cfg.ffn_dim);
        lw.w2 = xavier(cfg.ffn_dim, d, rng);
        lw.b2 = Mat::Zero(1, d);
        lw.ln2_gain = Mat::Ones(1, d);
        lw.ln2_bias = Mat::Zero(1, d);
        w.layers.push_back(std::move(lw));
    }
    w.out_w = xavier(d, vocab_size, rng);
    w.out_b = Mat::Zero(1, vocab_size);
    return w;
}

// --------------------------------------------------------- SeqAutoencoder

SeqAutoencoder::SeqAutoencoder(Vocab vocab, ModelConfig config, Weights weights)
    : vocab_(std::move(vocab)), config_(config), weights_(std::move(weights)) {
    config_.validate();
    const int d = config_.embed_dim;
    const int v = vocab_.size();
    auto bad = [](const Mat& m, Eigen::Index r, Eigen::Index c) { return m.rows() != r || m.cols() != c; };
    if (bad(weights_.token_embedding, v, d) || bad(weights_.hour_embedding, kHourBuckets, d) ||
        bad(weights_.out_w, d, v) || bad(weights_.out_b, 1, v) ||
        static_cast<int>(weights_.layers.size()) != config_.layers) {
        throw FormatError("model weights do not match vocabulary/config shapes");
    }
    for (const auto& lw : weights_.layers) {
        if (bad(lw.wq, d, d) || bad(lw.wk, d, d) || bad(lw.wv, d, d) || bad(lw.wo, d, d) ||
            bad(lw.w1, d, config_.ffn_dim) || bad(lw.b1, 1, config_.ffn_dim) || bad(lw.w2, config_.ffn_dim, d) ||
            bad(lw.b2, 1, d) || bad(lw.ln1_gain, 1, d) || bad(lw.ln1_bias, 1, d) || bad(lw.ln2_gain, 1, d) ||
            bad(lw.ln2_bias, 1, d)) {
            throw FormatError("model layer weights do not match config shapes");
        }
    }
    for (const auto& [name, m] : weights_.tensors()) {
        if (!m->allFinite()) throw NumericError("model tensor '" + name + "' has non-finite values");
    }
}

Mat SeqAutoencoder::encode(const std::vector<int>& ids, const std::vector<int>& hours,
                           std::vector<Mat>* attention) const {
    check_input(config_, ids, hours);
    return forward(weights_, config_, ids, hours, nullptr, attention);
}

Mat SeqAutoencoder::log_probs(const std::vector<int>& ids, const std::vector<int>& hours) const {
    return log_softmax_rows(logits_of(weights_, encode(ids, hours)));
}

LossAndGradients SeqAutoencoder::loss_and_gradients(const std::vector<int>& ids, const std::vector<int>& hours,
                                                    const std::vector<int>& positions,
                                                    const std::vector<int>& targets, double scale) const {
    check_input(config_, ids, hours);
    if (positions.size() != targets.size()) throw ContractError("positions and targets differ in length");
    LossAndGradients out;
    out.grads = Weights::zeros_like(weights_);
    out.loss = accumulate_gradients(weights_, config_, ids, hours, positions, targets, scale, out.grads);
    out.targets = positions.size();
    return out;
}

double SeqAutoencoder::masked_nll(const std::vector<int>& ids, const std::vector<int>& hours,
                                  const std::vector<int>& positions, const std::vector<int>& targets) const {
    const Mat logp = log_probs(ids, hours);
    double loss = 0.0;
    for (std::size_t i = 0; i < positions.size(); ++i) loss -= logp(positions[i], targets[i]);
    return loss;
}

std::uint64_t SeqAutoencoder::checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [name, m] : weights_.tensors()) {
        h = fnv1a(name, h);
        h = fnv1a(std::string_view(reinterpret_cast<const char*>(m->data()), sizeof(double) * m->size()), h);
    }
    return h;
}

// --------------------------------------------------------------- training

namespace {

struct Adam {
    Weights m, v;
    long step = 0;
    double lr;
    static constexpr double beta1 = 0.9;
    static constexpr double beta2 = 0.999;
    static constexpr double eps = 1e-8;

    Adam(const Weights& w, double learning_rate)
        : m(Weights::zeros_like(w)), v(Weights::zeros_like(w)), lr(learning_rate) {}

    void update(Weights& w, Weights& g) {
        ++step;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        auto wt = w.tensors();
        auto gt = g.tensors();
        auto mt = m.tensors();
        auto vt = v.tensors();
        for (std::size_t i = 0; i < wt.size(); ++i) {
            auto gm = gt[i].second->array();
            mt[i].second->array() = beta1 * mt[i].second->array() + (1.0 - beta1) * gm;
            vt[i].second->array() = beta2 * vt[i].second->array() + (1.0 - beta2) * gm.square();
            wt[i].second->array() -=
                lr * (mt[i].second->array() / c1) / ((vt[i].second->array() / c2).sqrt() + eps);
        }
    }
};

std::vector<int> choose_mask(int n, double ratio, Rng& rng) {
    const int m = std::clamp(static_cast<int>(std::lround(ratio * n)), 1, n);
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < m; ++i) std::swap(idx[i], idx[i + static_cast<int>(rng.below(n - i))]);
    idx.resize(m);
    std::sort(idx.begin(), idx.end());
    return idx;
}

} // namespace

TrainResult train_autoencoder(const Dataset& ds, const ModelConfig& cfg, const Vocab& vocab,
                              const TrainOptions& opts) {
    cfg.validate();
    if (ds.empty()) throw ContractError("train_autoencoder: empty dataset");
    if (vocab.real_token_count() < 2) throw DegenerateCorpusError("train_autoencoder: fewer than 2 distinct tokens");

    std::vector<TokenizedSequence> main;
    for (const auto& s : ds.sequences) {
        if (s.empty()) throw ContractError("train_autoencoder: sequence '" + s.id + "' is empty");
        main.push_back(tokenize(s, vocab, cfg.max_len));
    }
    std::vector<TokenizedSequence> tail;
    for (const auto* s : opts.tail) {
        if (!s || s->empty()) throw ContractError("train_autoencoder: empty tail sequence");
        tail.push_back(tokenize(*s, vocab, cfg.max_len));
    }

    SeqAutoencoder model(vocab, cfg, opts.init ? *opts.init : Weights::initialize(vocab.size(), cfg, cfg.seed));
    Weights& w = model.mutable_weights();
    Adam adam(w, cfg.learning_rate);
    Weights grads = Weights::zeros_like(w);

    std::vector<double> epoch_losses;
    const std::size_t n = main.size();
    const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
    const std::size_t batches = (n + bs - 1) / bs;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const std::uint64_t epoch_seed = derive_seed(cfg.seed, "epoch/" + std::to_string(epoch));
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng(derive_seed(epoch_seed, "shuffle")).shuffle(order);

        double epoch_nll = 0.0;
        std::size_t epoch_targets = 0;
        for (std::size_t b = 0; b < batches; ++b) {
            std::vector<std::pair<std::size_t, const TokenizedSequence*>> members;
            for (std::size_t k = b * bs; k < std::min(n, (b + 1) * bs); ++k) members.emplace_back(k, &main[order[k]]);
            if (b + 1 == batches) {
                for (std::size_t t = 0; t < tail.size(); ++t) members.emplace_back(n + t, &tail[t]);
            }

            std::vector<std::vector<int>> masks;
            std::size_t total = 0;
            for (const auto& [slot, seq] : members) {
                Rng mask_rng(derive_seed(epoch_seed, slot));
                masks.push_back(choose_mask(static_cast<int>(seq->ids.size()), cfg.mask_ratio, mask_rng));
                total += masks.back().size();
            }
            const double scale = 1.0 / static_cast<double>(total);

            for (auto& [name, m] : grads.tensors()) m->setZero();
            for (std::size_t i = 0; i < members.size(); ++i) {
                const TokenizedSequence& seq = *members[i].second;
                std::vector<int> input = seq.ids;
                std::vector<int> targets;
                for (int p : masks[i]) {
                    targets.push_back(seq.ids[p]);
                    input[p] = Vocab::kMask;
                }
                epoch_nll += accumulate_gradients(w, cfg, input, seq.hours, masks[i], targets, scale, grads);
            }
            epoch_targets += total;
            adam.update(w, grads);
        }
        epoch_losses.push_back(epoch_nll / static_cast<double>(epoch_targets));
    }
    for (const auto& [name, m] : w.tensors()) {
        if (!m->allFinite()) throw NumericError("training diverged: tensor '" + name + "' is non-finite");
    }
    return TrainResult{std::move(model), std::move(epoch_losses)};
}

TrainResult train_autoencoder(const Dataset& ds, const ModelConfig& cfg, const DeviceCatalog* catalog) {
    if (ds.empty()) throw ContractError("train_autoencoder: empty dataset");
    return train_autoencoder(ds, cfg, Vocab::build(ds, catalog));
}

// ---------------------------------------------------------------- scoring

std::vector<std::vector<int>> scoring_masks(std::uint64_t model_seed, const std::string& sequence_id, int n) {
    std::vector<int> perm(static_cast<std::size_t>(std::max(n, 0)));
    std::iota(perm.begin(), perm.end(), 0);
    Rng(derive_seed(derive_seed(model_seed, "score"), fnv1a(sequence_id))).shuffle(perm);
    std::vector<std::vector<int>> patterns(kScoringPatterns);
    for (std::size_t i = 0; i < perm.size(); ++i) patterns[i % kScoringPatterns].push_back(perm[i]);
    for (auto& p : patterns) std::sort(p.begin(), p.end());
    return patterns;
}

double reconstruction_loss(const SeqAutoencoder& m, const BehaviorSequence& s) {
    if (s.empty()) throw ContractError("reconstruction_loss: empty sequence");
    const TokenizedSequence tok = tokenize(s, m.vocab(), m.config().max_len);
    const auto patterns = scoring_masks(m.config().seed, s.id, static_cast<int>(tok.ids.size()));
    double sum = 0.0;
    int used = 0;
    for (const auto& positions : patterns) {
        if (positions.empty()) continue;
        std::vector<int> input = tok.ids;
        std::vector<int> targets;
        for (int p : positions) {
            targets.push_back(tok.ids[p]);
            input[p] = Vocab::kMask;
        }
        sum += m.masked_nll(input, tok.hours, positions, targets) / static_cast<double>(positions.size());
        ++used;
    }
    return sum / used;
}

double mean_reconstruction_loss(const SeqAutoencoder& m, const Dataset& ds) {
    if (ds.empty()) throw ContractError("mean_reconstruction_loss: empty dataset");
    double sum = 0.0;
    for (const auto& s : ds.sequences) sum += reconstruction_loss(m, s);
    return sum / static_cast<double>(ds.size());
}

// ---------------------------------------------------------- checkpointing

nlohmann::json to_json(const SeqAutoencoder& m) {
    nlohmann::json tensors = nlohmann::json::object();
    for (const auto& [name, t] : m.weights().tensors()) tensors[name] = mat_to_json(*t);
    return {{"format", "smartgen-seq-autoencoder"},
            {"version", kCheckpointVersion},
            {"config", to_json(m.config())},
            {"vocab", m.vocab().tokens()},
            {"weights", std::move(tensors)}};
}

SeqAutoencoder model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "smartgen-seq-autoencoder")
            throw FormatError("not a sequence autoencoder checkpoint");
        if (j.at("version").get<int>() != kCheckpointVersion)
            throw FormatError("unsupported checkpoint version " + std::to_string(j.at("version").get<int>()));
        const ModelConfig cfg = model_config_from_json(j.at("config"));
        cfg.validate();
        Vocab vocab(j.at("vocab").get<std::vector<std::string>>());
        Weights w = Weights::initialize(vocab.size(), cfg, 0);
        for (auto& [name, t] : w.tensors()) *t = mat_from_json(j.at("weights").at(name));
        return SeqAutoencoder(std::move(vocab), cfg, std::move(w));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string{"malformed checkpoint: "} + e.what());
    }
}

void save_model(const std::string& path, const SeqAutoencoder& m) { write_file(path, to_json(m).dump() + "\n"); }

SeqAutoencoder load_model(const std::string& path) {
    try {
        return model_from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("checkpoint '" + path + "' is not valid JSON: " + e.what());
    }
}

} // namespace smartgen
