#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "a2hash/metrics.hpp"
#include "doctest.h"

using namespace a2;

namespace {

RankedResult ranked(std::vector<double> rel) {
    RankedResult r;
    r.relevance = std::move(rel);
    r.ids.resize(r.relevance.size());
    std::iota(r.ids.begin(), r.ids.end(), 0);
    return r;
}

// Textbook AP written the other way round: precision integrated over recall
// steps, one step per relevant item.
double ap_oracle(const std::vector<double>& rel) {
    double total = 0.0;
    for (double v : rel) total += v;
    if (total == 0.0) return 0.0;
    double hits = 0.0, acc = 0.0;
    for (std::size_t r = 0; r < rel.size(); ++r)
        if (rel[r] > 0.0) {
            hits += 1.0;
            acc += hits / static_cast<double>(r + 1);
        }
    return acc / total;
}

}  // namespace

TEST_CASE("average_precision: pinned values") {
    CHECK(average_precision(ranked({1, 0, 1, 0})) ==
          doctest::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-12));
    CHECK(average_precision(ranked({1, 1, 1})) == doctest::Approx(1.0));
    CHECK(average_precision(ranked({0, 0, 0})) == 0.0);
    CHECK(average_precision(ranked({})) == 0.0);
}

TEST_CASE("average_precision with an external relevant total") {
    // two of four relevant items retrieved
    CHECK(average_precision(ranked({1, 0, 1}), 4) ==
          doctest::Approx((1.0 + 2.0 / 3.0) / 4.0).epsilon(1e-12));
    CHECK(average_precision(ranked({1, 0, 1}), 0) == 0.0);
}

TEST_CASE("average_precision equals the textbook oracle on random instances") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> rel(50);
        for (double& v : rel) v = (rng() % 3 == 0) ? 1.0 : 0.0;
        CHECK(average_precision(ranked(rel)) ==
              doctest::Approx(ap_oracle(rel)).epsilon(1e-12));
    }
}

TEST_CASE("mean_average_precision") {
    CHECK(mean_average_precision(std::vector<double>{0.5}) == 0.5);
    CHECK(mean_average_precision(std::vector<double>{1.0, 0.5}) ==
          doctest::Approx(0.75));
    CHECK(mean_average_precision(std::vector<double>{0.5, 1.0}) ==
          doctest::Approx(0.75));
    CHECK_THROWS_AS(mean_average_precision(std::vector<double>{}),
                    std::invalid_argument);
}

TEST_CASE("precision_at_k: pinned values") {
    std::vector<double> rel(10, 0.0);
    for (int i : {0, 1, 2, 3, 5, 7, 9}) rel[i] = 1.0;
    CHECK(precision_at_k(ranked(rel), 10) == doctest::Approx(0.7));
    CHECK(precision_at_k(ranked({1, 1}), 4) == doctest::Approx(0.5));  // short list
    CHECK(precision_at_k(ranked({0, 0, 0}), 3) == 0.0);
    CHECK(precision_at_k(ranked({1, 0}), 1) == doctest::Approx(1.0));
    CHECK_THROWS_AS(precision_at_k(ranked({1}), 0), std::invalid_argument);
}

TEST_CASE("ndcg: pinned values") {
    CHECK(ndcg(ranked({1, 1, 0}), 3) == doctest::Approx(1.0).epsilon(1e-12));
    // DCG = 1/log2(3), ideal Z = 1
    CHECK(ndcg(ranked({0, 1}), 2) == doctest::Approx(0.63093).epsilon(1e-5));
    CHECK(ndcg(ranked({0, 0, 0}), 3) == 0.0);
    // graded: already ideal order
    CHECK(ndcg(ranked({1.0, 0.5, 0.25}), 3) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ndcg ignores permutations of zero-relevance tails") {
    RankedResult a = ranked({1, 0.5, 0, 0, 0});
    RankedResult b = a;
    std::swap(b.ids[3], b.ids[4]);
    std::swap(b.relevance[3], b.relevance[4]);  // both zero
    for (int k : {2, 3, 5}) CHECK(ndcg(a, k) == ndcg(b, k));
}

TEST_CASE("promoting a relevant item never hurts AP or NDCG") {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> rel(20);
        for (double& v : rel) v = (rng() % 4 == 0) ? 1.0 : 0.0;
        // find a relevant item with an irrelevant predecessor
        for (std::size_t i = 1; i < rel.size(); ++i) {
            if (rel[i] > 0.0 && rel[i - 1] == 0.0) {
                std::vector<double> better = rel;
                std::swap(better[i], better[i - 1]);
                CHECK(average_precision(ranked(better)) >=
                      average_precision(ranked(rel)));
                CHECK(ndcg(ranked(better), 20) >= ndcg(ranked(rel), 20));
                break;
            }
        }
    }
}

TEST_CASE("metrics stay within [0,1] on random inputs") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> rel(1 + rng() % 30);
        for (double& v : rel) v = static_cast<double>(rng() % 101) / 100.0;
        std::vector<double> binary = rel;
        for (double& v : binary) v = v > 0.5 ? 1.0 : 0.0;
        const double ap = average_precision(ranked(binary));
        const double p = precision_at_k(ranked(binary), 1 + rng() % 40);
        const double n = ndcg(ranked(rel), 1 + rng() % 35);
        CHECK(ap >= 0.0);
        CHECK(ap <= 1.0);
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        CHECK(n >= 0.0);
        CHECK(n <= 1.0 + 1e-12);
    }
}

TEST_CASE("attribute_relevance: pinned values") {
    CHECK(attribute_relevance({1, 2, 3, 4}, {1, 2, 3}) == doctest::Approx(0.75));
    CHECK(attribute_relevance({5, 6}, {5, 6}) == doctest::Approx(1.0));
    CHECK(attribute_relevance({5, 6}, {7, 8}) == 0.0);
    CHECK(attribute_relevance({5, 6}, {}) == 0.0);
    CHECK_THROWS_AS(attribute_relevance({}, {1}), std::invalid_argument);
}

TEST_CASE("zero_shot_split partitions classes") {
    std::vector<std::uint32_t> classes(10);
    std::iota(classes.begin(), classes.end(), 0);
    const ZeroShotSplit s = zero_shot_split(classes, 0.5, 7);
    CHECK(s.seen.size() == 5);
    CHECK(s.unseen.size() == 5);
    std::vector<std::uint32_t> all = s.seen;
    all.insert(all.end(), s.unseen.begin(), s.unseen.end());
    std::sort(all.begin(), all.end());
    CHECK(all == classes);

    // disjoint and reproducible
    const ZeroShotSplit again = zero_shot_split(classes, 0.5, 7);
    CHECK(again.seen == s.seen);
    CHECK(again.unseen == s.unseen);
    const ZeroShotSplit other = zero_shot_split(classes, 0.5, 8);
    const bool same = other.seen == s.seen;
    CHECK_FALSE(same);  // seed changes the draw for 10C5 possibilities
}

TEST_CASE("zero_shot_split clamps extreme ratios and rejects tiny inputs") {
    std::vector<std::uint32_t> classes{3, 1, 4, 9};
    CHECK(zero_shot_split(classes, 0.0, 1).seen.size() == 1);
    CHECK(zero_shot_split(classes, 1.0, 1).unseen.size() == 1);
    CHECK_THROWS_AS(zero_shot_split({42}, 0.5, 1), std::invalid_argument);
}
