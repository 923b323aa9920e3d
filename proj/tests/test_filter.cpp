#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "smartgen/filter.hpp"
#include "smartgen/rng.hpp"
#include "smartgen/simgen.hpp"

using namespace smartgen;

namespace {

// Independent reference: rank r = p/100 (n-1), interpolate between floor and ceil.
double reference_percentile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double r = p / 100.0 * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(r));
    const auto hi = static_cast<std::size_t>(std::ceil(r));
    return v[lo] + (r - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

ModelConfig tiny() {
    ModelConfig cfg;
    cfg.embed_dim = 8;
    cfg.heads = 2;
    cfg.layers = 1;
    cfg.ffn_dim = 16;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    return cfg;
}

} // namespace

TEST_CASE("percentile worked values") {
    CHECK(percentile({1, 2, 3, 4, 100}, 25) == doctest::Approx(2.0));
    CHECK(percentile({1, 2, 3, 4, 100}, 75) == doctest::Approx(4.0));
    CHECK(percentile({10, 20}, 50) == doctest::Approx(15.0));
    CHECK(percentile({3, 1, 2}, 0) == doctest::Approx(1.0));
    CHECK(percentile({3, 1, 2}, 100) == doctest::Approx(3.0));
    CHECK(percentile({7}, 25) == doctest::Approx(7.0));
    CHECK(percentile({1, 2, 3, 4}, 25) == doctest::Approx(1.75));
    CHECK_THROWS_AS(percentile({}, 50), ContractError);
    CHECK_THROWS_AS(percentile({1}, 101), ContractError);
}

TEST_CASE("percentile matches the reference on random lists") {
    Rng rng(3);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> v(1 + rng.below(60));
        for (auto& x : v) x = rng.uniform(-5.0, 5.0);
        const double p = rng.uniform(0.0, 100.0);
        CHECK(percentile(v, p) == doctest::Approx(reference_percentile(v, p)).epsilon(1e-12));
    }
}

TEST_CASE("IQR bounds and partition") {
    const auto b = iqr_bounds({1, 2, 3, 4, 100});
    CHECK(b.q1 == doctest::Approx(2.0));
    CHECK(b.q3 == doctest::Approx(4.0));
    CHECK(b.iqr == doctest::Approx(2.0));
    CHECK(b.upper == doctest::Approx(7.0));

    std::vector<BehaviorSequence> seqs;
    for (int i = 0; i < 5; ++i) seqs.push_back(testing::seq("s" + std::to_string(i), {"2022-01-01 06:00 Light:switch_on"}));
    const auto p = partition_by_loss(testing::dataset(seqs), {1, 2, 3, 4, 100});
    CHECK(p.non_outliers.size() == 4);
    REQUIRE(p.outliers.size() == 1);
    CHECK(p.outliers.sequences[0].id == "s4");
    CHECK(p.losses[4] == std::pair<std::string, double>{"s4", 100.0});
    // A loss equal to the bound stays.
    CHECK(partition_by_loss(testing::dataset(seqs), {1, 2, 3, 4, 7}).outliers.empty());
    CHECK_THROWS_AS(partition_by_loss(testing::dataset(seqs), {1, 2}), ContractError);
}

TEST_CASE("outlier evaluation bookkeeping") {
    auto corpus = generate_corpus(reference_profile({}, 4), 16);
    // Losses chosen so the last three sequences are outliers.
    std::vector<double> losses(corpus.size(), 1.0);
    for (std::size_t i = 0; i < losses.size(); ++i) losses[i] += 0.01 * static_cast<double>(i);
    losses[13] = losses[14] = losses[15] = 50.0;
    const auto p = partition_by_loss(corpus, losses);
    REQUIRE(p.outliers.size() == 3);

    TofConfig tof;
    const auto r = evaluate_outliers(p, tiny(), tof);
    CHECK(r.train_ids.size() == 10);
    CHECK(r.test_ids.size() == 3);
    REQUIRE(r.verdicts.size() == 3);
    std::size_t retained = 0;
    for (const auto& v : r.verdicts) {
        CHECK_FALSE(v.warm_start);
        CHECK(v.baseline_loss == r.baseline_loss);
        CHECK((v.decision == Decision::retain) == (v.with_outlier_loss <= v.baseline_loss));
        retained += v.decision == Decision::retain;
    }
    CHECK(r.filtered.size() == 13 + retained);
    for (std::size_t i = 1; i < r.filtered.size(); ++i) CHECK(r.filtered.sequences[i - 1].id < r.filtered.sequences[i].id);
    for (const auto& s : r.filtered.sequences) CHECK(s.origin == Origin::filtered);

    // Threads do not change the outcome.
    tof.threads = 3;
    const auto threaded = evaluate_outliers(p, tiny(), tof);
    for (std::size_t i = 0; i < 3; ++i) CHECK(threaded.verdicts[i].with_outlier_loss == r.verdicts[i].with_outlier_loss);

    // Beyond the retrain budget outliers are judged by warm starts.
    tof.max_full_retrains = 1;
    const auto warm = evaluate_outliers(p, tiny(), tof);
    CHECK_FALSE(warm.verdicts[0].warm_start);
    CHECK(warm.verdicts[1].warm_start);
    CHECK(warm.verdicts[2].warm_start);
    CHECK(warm.verdicts[1].baseline_loss == warm.verdicts[2].baseline_loss);

    const auto j = tof_report(p, r);
    CHECK(j["threshold"] == p.bounds.upper);
    CHECK(j["outlier_count"] == 3);
    CHECK(j["losses"].size() == 16);
    const std::string d = j["verdicts"][0]["decision"];
    CHECK((d == "retain" || d == "delete"));
}

TEST_CASE("filter input errors") {
    auto corpus = generate_corpus(reference_profile({}, 4), 3);
    CHECK_THROWS_AS(detect_outliers(corpus, tiny()), InsufficientDataError);
    const auto p = partition_by_loss(corpus, {1, 1, 1});
    CHECK_THROWS_AS(evaluate_outliers(p, tiny()), InsufficientDataError);
    auto eight = generate_corpus(reference_profile({}, 4), 8);
    TofConfig bad;
    bad.train_fraction = 1.0;
    CHECK_THROWS_AS(evaluate_outliers(partition_by_loss(eight, std::vector<double>(8, 1.0)), tiny(), bad), ConfigError);
}

TEST_CASE("detect_outliers scores every sequence") {
    auto corpus = generate_corpus(reference_profile({}, 4), 12);
    const auto p = detect_outliers(corpus, tiny());
    CHECK(p.losses.size() == 12);
    CHECK(p.non_outliers.size() + p.outliers.size() == 12);
    for (const auto& [id, loss] : p.losses) CHECK(std::isfinite(loss));
}
