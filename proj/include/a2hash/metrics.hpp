#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace a2 {

// One query's ranking: returned ids in rank order plus relevance per rank
// (binary 0/1 for AP and precision, graded [0,1] for NDCG).
struct RankedResult {
    std::vector<std::uint64_t> ids;
    std::vector<double> relevance;
};

// AP over the full ranking, normalized by the total number of relevant
// items in the ranking universe (pass total_relevant < 0 to count them in
// the ranking itself). 0 when nothing is relevant.
double average_precision(const RankedResult& result, long total_relevant = -1);

double mean_average_precision(std::span<const double> per_query_ap);

// Relevant count in the top K divided by K (by K even when the list is
// shorter).
double precision_at_k(const RankedResult& result, int K);

// (1/Z) sum_{j<=k} (2^rel(j)-1)/log2(j+1), Z from the ideal ordering of the
// full relevance list; 0 when every relevance is zero.
double ndcg(const RankedResult& result, int k);

// |query_attrs ∩ item_attrs| / |query_attrs|.
double attribute_relevance(const std::vector<std::uint32_t>& query_attrs,
                           const std::vector<std::uint32_t>& item_attrs);

// Disjoint seen/unseen class partition; `ratio` is the seen fraction.
struct ZeroShotSplit {
    std::vector<std::uint32_t> seen;
    std::vector<std::uint32_t> unseen;
};
ZeroShotSplit zero_shot_split(const std::vector<std::uint32_t>& classes,
                              double ratio, std::uint64_t seed);

}  // namespace a2
