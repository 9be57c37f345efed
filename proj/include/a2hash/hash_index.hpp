#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace a2 {

// k-bit code in {-1,+1}^k packed into 64-bit words, little-endian word
// order; bit i lives at position i%64 of word i/64 and is 1 iff the
// component is +1. Padding bits are always zero.
struct PackedCode {
    int k = 0;
    std::vector<std::uint64_t> words;

    static int words_for(int k) { return (k + 63) / 64; }
};

PackedCode pack(std::span<const signed char> code);
std::vector<signed char> unpack(const PackedCode& c);

int hamming(const PackedCode& a, const PackedCode& b);

struct SearchHit {
    std::uint64_t id;
    int distance;
};

// Immutable code store over contiguous packed words.
class HashIndex {
public:
    HashIndex() = default;
    HashIndex(int k, std::vector<std::uint64_t> ids,
              std::vector<std::uint64_t> packed_words,
              std::vector<std::uint32_t> labels = {});

    int k() const { return k_; }
    std::size_t size() const { return ids_.size(); }
    int words_per_code() const { return PackedCode::words_for(k_); }
    const std::vector<std::uint64_t>& ids() const { return ids_; }
    const std::vector<std::uint32_t>& labels() const { return labels_; }
    PackedCode code_at(std::size_t i) const;

    bool operator==(const HashIndex& o) const = default;

    // Exact linear scan; results in non-decreasing distance, ties broken by
    // ascending id. The scan is partitioned across threads and per-partition
    // results merged in id order, so output is independent of thread count.
    std::vector<SearchHit> search_topk(const PackedCode& query, int topk) const;

    // Serial reference scan kept for equivalence tests and the benchmark.
    std::vector<SearchHit> search_topk_serial(const PackedCode& query,
                                              int topk) const;

    void save(const std::string& path) const;
    static HashIndex load(const std::string& path);

private:
    int k_ = 0;
    std::vector<std::uint64_t> ids_;
    std::vector<std::uint64_t> words_;
    std::vector<std::uint32_t> labels_;
};

// Builds an index from row-major {-1,+1} codes (m x k) as produced by
// binarize().
HashIndex build_index(int k, std::span<const signed char> codes,
                      std::span<const std::uint64_t> ids,
                      std::span<const std::uint32_t> labels = {});

}  // namespace a2
