#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "smartgen/eval.hpp"
#include "smartgen/simgen.hpp"

using namespace smartgen;
using testing::seq;

TEST_CASE("detection metrics over every small confusion matrix") {
    for (std::size_t tp = 0; tp <= 6; ++tp)
        for (std::size_t fp = 0; fp <= 6; ++fp)
            for (std::size_t fn = 0; fn <= 6; ++fn) {
                if (tp + fn == 0) {
                    CHECK_THROWS_AS(ad_metrics(tp, fp, 3, fn), MetricsError);
                    continue;
                }
                const auto m = ad_metrics(tp, fp, 3, fn);
                const double r = static_cast<double>(tp) / static_cast<double>(tp + fn);
                const double p = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
                const double f = p + r == 0.0 ? 0.0 : 2 * p * r / (p + r);
                CHECK(m.recall == doctest::Approx(r));
                CHECK(m.precision == doctest::Approx(p));
                CHECK(m.f1 == doctest::Approx(f));
            }
    const auto m = ad_metrics(8, 2, 85, 5);
    CHECK(m.precision == doctest::Approx(0.8));
    CHECK(m.recall == doctest::Approx(8.0 / 13.0));
}

TEST_CASE("ranking metrics") {
    auto m = rank_metrics({{"b", "a", "c"}}, {"a"});
    CHECK(m.ndcg_at_10 == doctest::Approx(1.0 / std::log2(3.0)));
    CHECK(m.hr_at_10 == doctest::Approx(1.0));
    m = rank_metrics({{"a"}, {"x", "y"}}, {"a", "z"});
    CHECK(m.ndcg_at_10 == doctest::Approx(0.5));
    CHECK(m.hr_at_10 == doctest::Approx(0.5));
    CHECK(m.events == 2);
    std::vector<std::string> ten;
    for (int i = 0; i < 10; ++i) ten.push_back(std::to_string(i));
    CHECK(rank_metrics({ten}, {"9"}).ndcg_at_10 == doctest::Approx(1.0 / std::log2(11.0)));
    ten.push_back("10");
    CHECK_THROWS_AS(rank_metrics({ten}, {"9"}), ContractError);
    CHECK_THROWS_AS(rank_metrics({}, {}), ContractError);
    CHECK_THROWS_AS(rank_metrics({{"a"}}, {"a", "b"}), ContractError);
    CHECK_THROWS_AS(rank_metrics({{"a", "a"}}, {"a"}), ContractError);
}

TEST_CASE("transition predictor ranks and backfills") {
    const auto train = testing::dataset({seq("x", {"2022-01-01 06:00 Light:switch_on", "2022-01-01 06:01 Blind:open",
                                                   "2022-01-01 06:02 Light:switch_on", "2022-01-01 06:03 Blind:open",
                                                   "2022-01-01 06:04 Light:switch_on", "2022-01-01 06:05 Door:open"})});
    const TransitionPredictor p(train);
    CHECK(p.rank("Light:switch_on") == std::vector<std::string>{"Blind:open", "Door:open", "Light:switch_on"});
    CHECK(p.rank("Door:open") == std::vector<std::string>{"Light:switch_on", "Blind:open", "Door:open"});
    CHECK(p.rank("Light:switch_on", 1) == std::vector<std::string>{"Blind:open"});
    CHECK_THROWS_AS(TransitionPredictor(testing::dataset({})), ContractError);

    const auto test = testing::dataset({seq("t", {"2022-01-02 06:00 Light:switch_on", "2022-01-02 06:01 Door:open"})});
    const auto m = next_action_evaluation(train, test);
    CHECK(m.events == 1);
    CHECK(m.ndcg_at_10 == doctest::Approx(1.0 / std::log2(3.0)));
}

TEST_CASE("jaccard similarity") {
    const auto a = seq("a", {"2022-01-01 06:00 Light:switch_on", "2022-01-01 06:01 Blind:open"});
    const auto b = seq("b", {"2022-01-01 07:00 Light:switch_on", "2022-01-01 07:01 Door:open",
                             "2022-01-01 07:02 Light:switch_on"});
    CHECK(jaccard_similarity(a, b) == doctest::Approx(1.0 / 3.0));
    CHECK(jaccard_similarity(a, a) == doctest::Approx(1.0));
    const BehaviorSequence e{"e", Origin::raw, {}};
    CHECK(jaccard_similarity(e, e) == doctest::Approx(1.0));
    CHECK(jaccard_similarity(a, e) == doctest::Approx(0.0));
}

namespace {

ModelConfig tiny() {
    ModelConfig cfg;
    cfg.embed_dim = 8;
    cfg.layers = 1;
    cfg.ffn_dim = 16;
    cfg.epochs = 2;
    return cfg;
}

} // namespace

TEST_CASE("anomaly detection evaluation") {
    const auto train = generate_corpus(reference_profile({}, 2), 20);
    const auto cat = bundled_catalog("FR");
    const auto target = generate_corpus(reference_profile({}, 3), 10);
    const auto junk = corrupt_corpus(target, 0.3, cat, 9);
    CHECK(junk.corrupted_ids.size() == 3);
    std::vector<LabeledSequence> test;
    for (const auto& s : junk.dataset.sequences) test.push_back({s, junk.corrupted_ids.count(s.id) > 0});
    const auto r = ad_evaluate(train, test, tiny(), &cat);
    CHECK(r.scores.size() == 10);
    CHECK(r.metrics.tp + r.metrics.fn == 3);
    CHECK(r.metrics.fp + r.metrics.tn == 7);
    std::size_t flagged = 0;
    for (double s : r.scores) flagged += s > r.threshold;
    CHECK(flagged == r.metrics.tp + r.metrics.fp);

    std::vector<LabeledSequence> clean;
    for (const auto& s : target.sequences) clean.push_back({s, false});
    CHECK_THROWS_AS(ad_evaluate(train, clean, tiny(), &cat), MetricsError);
}

TEST_CASE("compression comparison at full retention equals the full model") {
    const auto corpus = generate_corpus(reference_profile({}, 2), 60);
    ComparisonConfig cc;
    cc.rates = {1.0, 0.5};
    const auto r = compression_comparison(corpus, tiny(), cc);
    CHECK(r.pool_size == 48);
    CHECK(r.test_size == 12);
    REQUIRE(r.rows.size() == 4);
    CHECK(r.rows[0].method == "ssc");
    CHECK(r.rows[0].mean_loss == r.full_mean_loss);
    CHECK(r.rows[1].mean_loss == r.full_mean_loss);
    CHECK(r.rows[1].retained == 48);
    for (std::size_t i = 2; i < 4; ++i) {
        CHECK(r.rows[i].retained <= 48);
        CHECK(r.rows[i].attained_rate == doctest::Approx(static_cast<double>(r.rows[i].retained) / 48.0));
        CHECK(r.rows[i].attained == (std::abs(r.rows[i].attained_rate - 0.5) <= cc.tolerance));
    }
    const auto csv = comparison_csv(r);
    CHECK(csv.rfind("rate,method,mean_loss,variance\n1,full,", 0) == 0);
    CHECK(to_json(r)["rows"].size() == 4);

    CHECK_THROWS_AS(compression_comparison(generate_corpus(reference_profile({}, 2), 30), tiny(), cc),
                    InsufficientDataError);
    cc.rates = {0.0};
    CHECK_THROWS_AS(compression_comparison(corpus, tiny(), cc), ConfigError);
}
