#include "a2hash/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

#include "a2hash/tensor.hpp"

namespace a2 {

double average_precision(const RankedResult& result, long total_relevant) {
    if (result.ids.size() != result.relevance.size())
        throw std::invalid_argument("ranked result: ids/relevance mismatch");
    long R = total_relevant;
    if (R < 0) {
        R = 0;
        for (double r : result.relevance) R += r > 0.0 ? 1 : 0;
    }
    if (R == 0) return 0.0;
    double sum = 0.0;
    long hits = 0;
    for (std::size_t r = 0; r < result.relevance.size(); ++r) {
        if (result.relevance[r] > 0.0) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(r + 1);
        }
    }
    return sum / static_cast<double>(R);
}

double mean_average_precision(std::span<const double> per_query_ap) {
    if (per_query_ap.empty())
        throw std::invalid_argument("mAP over an empty query set");
    double s = 0.0;
    for (double ap : per_query_ap) s += ap;
    return s / static_cast<double>(per_query_ap.size());
}

double precision_at_k(const RankedResult& result, int K) {
    if (K < 1) throw std::invalid_argument("precision_at_k: K must be >= 1");
    long hits = 0;
    const std::size_t upto = std::min<std::size_t>(K, result.relevance.size());
    for (std::size_t r = 0; r < upto; ++r)
        if (result.relevance[r] > 0.0) ++hits;
    return static_cast<double>(hits) / static_cast<double>(K);
}

double ndcg(const RankedResult& result, int k) {
    if (k < 1) throw std::invalid_argument("ndcg: k must be >= 1");
    auto gain = [](double rel) { return std::exp2(rel) - 1.0; };
    auto discount = [](std::size_t rank) {
        return 1.0 / std::log2(static_cast<double>(rank) + 2.0);  // rank is 0-based
    };
    double dcg = 0.0;
    const std::size_t upto = std::min<std::size_t>(k, result.relevance.size());
    for (std::size_t r = 0; r < upto; ++r) dcg += gain(result.relevance[r]) * discount(r);

    std::vector<double> ideal = result.relevance;
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double z = 0.0;
    const std::size_t iupto = std::min<std::size_t>(k, ideal.size());
    for (std::size_t r = 0; r < iupto; ++r) z += gain(ideal[r]) * discount(r);
    if (z == 0.0) return 0.0;
    return dcg / z;
}

double attribute_relevance(const std::vector<std::uint32_t>& query_attrs,
                           const std::vector<std::uint32_t>& item_attrs) {
    if (query_attrs.empty())
        throw std::invalid_argument("attribute_relevance: empty query attributes");
    const std::set<std::uint32_t> q(query_attrs.begin(), query_attrs.end());
    const std::set<std::uint32_t> it(item_attrs.begin(), item_attrs.end());
    std::size_t matched = 0;
    for (std::uint32_t a : q)
        if (it.count(a)) ++matched;
    return static_cast<double>(matched) / static_cast<double>(q.size());
}

ZeroShotSplit zero_shot_split(const std::vector<std::uint32_t>& classes,
                              double ratio, std::uint64_t seed) {
    if (classes.size() < 2)
        throw std::invalid_argument("zero_shot_split needs at least 2 classes");
    std::vector<std::uint32_t> shuffled = classes;
    std::mt19937_64 rng(seed);
    for (std::size_t i = shuffled.size() - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
        std::swap(shuffled[i], shuffled[j]);
    }
    std::size_t n_seen = static_cast<std::size_t>(
        std::lround(ratio * static_cast<double>(shuffled.size())));
    n_seen = std::clamp<std::size_t>(n_seen, 1, shuffled.size() - 1);
    ZeroShotSplit out;
    out.seen.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_seen));
    out.unseen.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_seen), shuffled.end());
    std::sort(out.seen.begin(), out.seen.end());
    std::sort(out.unseen.begin(), out.unseen.end());
    return out;
}

}  // namespace a2
