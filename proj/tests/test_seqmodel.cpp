#include <doctest.h>

#include <cmath>
#include <set>

#include "gradcheck.hpp"
#include "helpers.hpp"
#include "smartgen/seqmodel.hpp"

using namespace smartgen;
using testing::seq;

namespace {

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.embed_dim = 16;
    cfg.heads = 2;
    cfg.layers = 1;
    cfg.ffn_dim = 32;
    cfg.max_len = 16;
    cfg.epochs = 3;
    cfg.batch_size = 4;
    return cfg;
}

Dataset routine_corpus(int copies) {
    std::vector<BehaviorSequence> seqs;
    for (int i = 0; i < copies; ++i) {
        seqs.push_back(seq("r" + std::to_string(i), {"2022-01-01 06:30 Light:switch_on", "2022-01-01 06:35 Blind:open",
                                                     "2022-01-01 06:40 CoffeeMachine:switch_on",
                                                     "2022-01-01 07:00 Light:switch_off",
                                                     "2022-01-01 07:05 Door:open", "2022-01-01 07:06 Door:close"}));
    }
    return testing::dataset(seqs);
}

} // namespace

TEST_CASE("positional encoding values") {
    const Vec p0 = positional_encoding(0, 4);
    CHECK(p0(0) == doctest::Approx(0.0));
    CHECK(p0(1) == doctest::Approx(1.0));
    CHECK(p0(2) == doctest::Approx(0.0));
    CHECK(p0(3) == doctest::Approx(1.0));
    const Vec p1 = positional_encoding(1, 4);
    CHECK(p1(0) == doctest::Approx(std::sin(1.0)));
    CHECK(p1(1) == doctest::Approx(std::cos(1.0)));
    CHECK(p1(2) == doctest::Approx(std::sin(0.01)));
    CHECK(p1(3) == doctest::Approx(std::cos(0.01)));
    CHECK_THROWS_AS(positional_encoding(0, 5), ConfigError);
    CHECK_THROWS_AS(positional_encoding(-1, 4), ContractError);
}

TEST_CASE("vocab layout") {
    // The constructor keeps the given order; build() sorts.
    const Vocab v({"Blind:open", "Light:switch_on"});
    CHECK(v.size() == 5);
    CHECK_THROWS_AS(Vocab({"A:x", "A:x"}), FormatError);
    CHECK(v.id("Blind:open") == Vocab::kFirstToken);
    CHECK(v.id("Light:switch_on") == Vocab::kFirstToken + 1);
    CHECK(v.id("Unknown:thing") == Vocab::kUnk);
    CHECK(v.token(Vocab::kFirstToken) == "Blind:open");

    const auto cat = bundled_catalog("FR");
    const Vocab full = Vocab::build(routine_corpus(1), &cat);
    CHECK(full.real_token_count() >= 6);
    CHECK(std::is_sorted(full.tokens().begin(), full.tokens().end()));
}

TEST_CASE("tokenize truncates and buckets hours") {
    const Vocab v({"Light:switch_on", "Blind:open"});
    const auto s = seq("t", {"2022-01-01 06:30 Light:switch_on", "2022-01-01 23:59 Blind:open",
                             "2022-01-02 00:10 Light:switch_on"});
    const auto t = tokenize(s, v, 2);
    CHECK(t.truncated);
    CHECK(t.ids == std::vector<int>{v.id("Light:switch_on"), v.id("Blind:open")});
    CHECK(t.hours == std::vector<int>{6, 23});
    CHECK_FALSE(tokenize(s, v, 8).truncated);
}

TEST_CASE("config validation") {
    ModelConfig c = small_config();
    CHECK_NOTHROW(c.validate());
    c.heads = 3;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.mask_ratio = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.embed_dim = 7;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.learning_rate = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("initialization shapes and ranges") {
    const ModelConfig cfg = small_config();
    Weights w = Weights::initialize(9, cfg, 1);
    CHECK(w.token_embedding.rows() == 9);
    CHECK(w.token_embedding.cols() == 16);
    CHECK(w.hour_embedding.rows() == 24);
    CHECK(w.layers.size() == 1);
    const double bound = std::sqrt(6.0 / 32.0);
    CHECK(w.layers[0].wq.cwiseAbs().maxCoeff() <= bound);
    CHECK(w.layers[0].ln1_gain.isOnes());
    CHECK(w.layers[0].b1.isZero());
    CHECK(w.out_b.isZero());
    const Weights again = Weights::initialize(9, cfg, 1);
    CHECK(w.out_w == again.out_w);
    CHECK_FALSE(w.out_w == Weights::initialize(9, cfg, 2).out_w);
}

TEST_CASE("attention rows are distributions and encoder rows are normalized") {
    const ModelConfig cfg = small_config();
    const Vocab v({"A:x", "B:y", "C:z"});
    const SeqAutoencoder m(v, cfg, Weights::initialize(v.size(), cfg, 4));
    std::vector<Mat> attention;
    const Mat h = m.encode({3, 4, 5, Vocab::kMask}, {1, 2, 3, 4}, &attention);
    REQUIRE(attention.size() == 2);
    for (const auto& a : attention) {
        CHECK(a.rows() == 4);
        for (Eigen::Index r = 0; r < a.rows(); ++r) {
            CHECK(a.row(r).sum() == doctest::Approx(1.0));
            CHECK(a.row(r).minCoeff() >= 0.0);
        }
    }
    for (Eigen::Index r = 0; r < h.rows(); ++r) {
        CHECK(std::abs(h.row(r).mean()) < 1e-9);
        CHECK(std::sqrt((h.row(r).array() - h.row(r).mean()).square().mean()) == doctest::Approx(1.0).epsilon(1e-3));
    }
    const Mat lp = m.log_probs({3, 4}, {1, 2});
    for (Eigen::Index r = 0; r < lp.rows(); ++r) CHECK(lp.row(r).array().exp().sum() == doctest::Approx(1.0));
    CHECK_THROWS_AS(m.encode({}, {}), ContractError);
    CHECK_THROWS_AS(m.encode(std::vector<int>(17, 3), std::vector<int>(17, 0)), ContractError);
}

TEST_CASE("analytic gradients match central differences") {
    const auto errors = testing::gradient_check();
    CHECK(errors.size() == 2 + 12 + 2);
    for (const auto& [name, err] : errors) {
        INFO(name);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("training is deterministic and the loss falls") {
    const Dataset ds = routine_corpus(20);
    const ModelConfig cfg = small_config();
    const auto a = train_autoencoder(ds, cfg);
    const auto b = train_autoencoder(ds, cfg);
    CHECK(a.model.checksum() == b.model.checksum());
    CHECK(a.epoch_losses == b.epoch_losses);
    REQUIRE(a.epoch_losses.size() == 3);
    CHECK(a.epoch_losses.back() < a.epoch_losses.front());

    ModelConfig other = cfg;
    other.seed = 99;
    CHECK(train_autoencoder(ds, other).model.checksum() != a.model.checksum());
}

TEST_CASE("a repeated sequence is memorized") {
    ModelConfig cfg;
    cfg.embed_dim = 32;
    cfg.ffn_dim = 64;
    cfg.epochs = 30;
    cfg.learning_rate = 1e-3;
    const Dataset ds = routine_corpus(50);
    const auto r = train_autoencoder(ds, cfg);
    CHECK(reconstruction_loss(r.model, ds.sequences[0]) < 0.1);
}

TEST_CASE("tail sequences and warm starts") {
    const Dataset ds = routine_corpus(8);
    ModelConfig cfg = small_config();
    const Vocab v = Vocab::build(ds);
    const auto extra = seq("x", {"2022-01-01 09:00 Door:open", "2022-01-01 09:01 Door:close"});
    TrainOptions with_tail;
    with_tail.tail = {&extra};
    const auto base = train_autoencoder(ds, cfg, v);
    const auto tailed = train_autoencoder(ds, cfg, v, with_tail);
    CHECK(base.model.checksum() != tailed.model.checksum());

    TrainOptions warm;
    warm.init = &base.model.weights();
    cfg.epochs = 1;
    const auto continued = train_autoencoder(ds, cfg, v, warm);
    const auto fresh = train_autoencoder(ds, cfg, v);
    CHECK(continued.epoch_losses[0] < fresh.epoch_losses[0]);
}

TEST_CASE("training errors") {
    CHECK_THROWS_AS(train_autoencoder(testing::dataset({}), small_config()), ContractError);
    const Dataset one = testing::dataset({seq("a", {"2022-01-01 06:00 Light:switch_on"})});
    CHECK_THROWS_AS(train_autoencoder(one, small_config(), Vocab::build(one)), DegenerateCorpusError);
}

TEST_CASE("scoring masks partition positions") {
    for (int n : {1, 2, 3, 4, 5, 9, 40}) {
        const auto masks = scoring_masks(7, "seq-" + std::to_string(n), n);
        CHECK(masks.size() == static_cast<std::size_t>(kScoringPatterns));
        std::multiset<int> seen;
        for (const auto& m : masks) seen.insert(m.begin(), m.end());
        CHECK(seen.size() == static_cast<std::size_t>(n));
        CHECK(std::set<int>(seen.begin(), seen.end()).size() == static_cast<std::size_t>(n));
    }
    CHECK(scoring_masks(7, "a", 12) == scoring_masks(7, "a", 12));
}

TEST_CASE("checkpoint round trip") {
    const Dataset ds = routine_corpus(4);
    const auto r = train_autoencoder(ds, small_config());
    const auto dir = testing::scratch_dir("seqmodel");
    save_model(dir + "/m.json", r.model);
    const SeqAutoencoder back = load_model(dir + "/m.json");
    CHECK(back.checksum() == r.model.checksum());
    CHECK(back.config() == r.model.config());
    CHECK(back.vocab().tokens() == r.model.vocab().tokens());
    CHECK(reconstruction_loss(back, ds.sequences[0]) == reconstruction_loss(r.model, ds.sequences[0]));

    auto j = to_json(r.model);
    j["weights"]["out_b"] = nlohmann::json::array();
    CHECK_THROWS(model_from_json(j));
}

TEST_CASE("checkpoint version is checked") {
    const auto r = train_autoencoder(routine_corpus(2), small_config());
    auto j = to_json(r.model);
    j["version"] = 999;
    CHECK_THROWS_AS(model_from_json(j), FormatError);
    j = to_json(r.model);
    j["format"] = "other";
    CHECK_THROWS_AS(model_from_json(j), FormatError);
}
