#include "a2hash/hash_index.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

#include "a2hash/binio.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace a2 {

namespace {
constexpr char kIndexMagic[5] = "A2HX";
constexpr std::uint32_t kIndexVersion = 1;

bool hit_less(const SearchHit& a, const SearchHit& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.id < b.id;
}
}  // namespace

PackedCode pack(std::span<const signed char> code) {
    PackedCode out;
    out.k = static_cast<int>(code.size());
    out.words.assign(PackedCode::words_for(out.k), 0);
    for (int i = 0; i < out.k; ++i) {
        if (code[i] == 1)
            out.words[i / 64] |= std::uint64_t{1} << (i % 64);
        else if (code[i] != -1)
            throw std::invalid_argument("code entries must be +/-1");
    }
    return out;
}

std::vector<signed char> unpack(const PackedCode& c) {
    std::vector<signed char> out(c.k);
    for (int i = 0; i < c.k; ++i)
        out[i] = (c.words[i / 64] >> (i % 64)) & 1 ? 1 : -1;
    return out;
}

int hamming(const PackedCode& a, const PackedCode& b) {
    if (a.k != b.k) throw std::invalid_argument("hamming: bit-length mismatch");
    int d = 0;
    for (std::size_t w = 0; w < a.words.size(); ++w)
        d += std::popcount(a.words[w] ^ b.words[w]);
    return d;
}

HashIndex::HashIndex(int k, std::vector<std::uint64_t> ids,
                     std::vector<std::uint64_t> packed_words,
                     std::vector<std::uint32_t> labels)
    : k_(k), ids_(std::move(ids)), words_(std::move(packed_words)),
      labels_(std::move(labels)) {
    const std::size_t wpc = PackedCode::words_for(k_);
    if (words_.size() != ids_.size() * wpc)
        throw std::invalid_argument("index: code block does not match item count");
    if (!labels_.empty() && labels_.size() != ids_.size())
        throw std::invalid_argument("index: label count mismatch");
}

PackedCode HashIndex::code_at(std::size_t i) const {
    const int wpc = words_per_code();
    PackedCode c;
    c.k = k_;
    c.words.assign(words_.begin() + static_cast<std::ptrdiff_t>(i) * wpc,
                   words_.begin() + static_cast<std::ptrdiff_t>(i + 1) * wpc);
    return c;
}

std::vector<SearchHit> HashIndex::search_topk_serial(const PackedCode& query,
                                                     int topk) const {
    if (query.k != k_) throw std::invalid_argument("search: bit-length mismatch");
    if (topk < 1) throw std::invalid_argument("search: topk must be >= 1");
    const int wpc = words_per_code();
    std::vector<SearchHit> hits(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        int d = 0;
        const std::uint64_t* w = words_.data() + i * wpc;
        for (int j = 0; j < wpc; ++j) d += std::popcount(w[j] ^ query.words[j]);
        hits[i] = {ids_[i], d};
    }
    const std::size_t keep = std::min<std::size_t>(topk, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep),
                      hits.end(), hit_less);
    hits.resize(keep);
    return hits;
}

std::vector<SearchHit> HashIndex::search_topk(const PackedCode& query,
                                              int topk) const {
    if (query.k != k_) throw std::invalid_argument("search: bit-length mismatch");
    if (topk < 1) throw std::invalid_argument("search: topk must be >= 1");
    const std::size_t m = ids_.size();
    const std::size_t keep = std::min<std::size_t>(topk, m);
    if (m == 0) return {};
#ifdef _OPENMP
    const int nthreads = m >= 8192 ? omp_get_max_threads() : 1;
#else
    const int nthreads = 1;
#endif
    if (nthreads == 1) return search_topk_serial(query, topk);

    const int wpc = words_per_code();
    std::vector<std::vector<SearchHit>> partial(nthreads);
#pragma omp parallel num_threads(nthreads)
    {
#ifdef _OPENMP
        const int t = omp_get_thread_num();
#else
        const int t = 0;
#endif
        const std::size_t lo = m * t / nthreads;
        const std::size_t hi = m * (t + 1) / nthreads;
        std::vector<SearchHit>& mine = partial[t];
        mine.reserve(hi - lo);
        for (std::size_t i = lo; i < hi; ++i) {
            int d = 0;
            const std::uint64_t* w = words_.data() + i * wpc;
            for (int j = 0; j < wpc; ++j) d += std::popcount(w[j] ^ query.words[j]);
            mine.push_back({ids_[i], d});
        }
        const std::size_t kk = std::min(keep, mine.size());
        std::partial_sort(mine.begin(), mine.begin() + static_cast<std::ptrdiff_t>(kk),
                          mine.end(), hit_less);
        mine.resize(kk);
    }
    // Merge partitions in id order (partition order follows id order within
    // the index layout, and hit_less is a total order, so the merged result
    // equals the serial scan).
    std::vector<SearchHit> merged;
    for (const auto& p : partial) merged.insert(merged.end(), p.begin(), p.end());
    std::sort(merged.begin(), merged.end(), hit_less);
    merged.resize(std::min(keep, merged.size()));
    return merged;
}

void HashIndex::save(const std::string& path) const {
    auto out = binio::open_out(path);
    binio::write_magic(out, kIndexMagic);
    binio::write_le<std::uint32_t>(out, kIndexVersion);
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(k_));
    binio::write_le<std::uint64_t>(out, ids_.size());
    const int wpc = words_per_code();
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        binio::write_le<std::uint64_t>(out, ids_[i]);
        for (int j = 0; j < wpc; ++j) binio::write_le<std::uint64_t>(out, words_[i * wpc + j]);
    }
    binio::write_le<std::uint8_t>(out, labels_.empty() ? 0 : 1);
    for (std::uint32_t l : labels_) binio::write_le<std::uint32_t>(out, l);
    if (!out) throw std::runtime_error("index write failed: " + path);
}

HashIndex HashIndex::load(const std::string& path) {
    auto in = binio::open_in(path);
    binio::expect_magic(in, kIndexMagic, "index");
    const auto version = binio::read_le<std::uint32_t>(in);
    if (version != kIndexVersion)
        throw std::runtime_error("index: unsupported version " +
                                 std::to_string(version));
    const int k = static_cast<int>(binio::read_le<std::uint32_t>(in));
    const auto m = binio::read_le<std::uint64_t>(in);
    const int wpc = PackedCode::words_for(k);
    std::vector<std::uint64_t> ids(m);
    std::vector<std::uint64_t> words(m * wpc);
    for (std::uint64_t i = 0; i < m; ++i) {
        ids[i] = binio::read_le<std::uint64_t>(in);
        for (int j = 0; j < wpc; ++j)
            words[i * wpc + j] = binio::read_le<std::uint64_t>(in);
    }
    std::vector<std::uint32_t> labels;
    if (binio::read_le<std::uint8_t>(in) != 0) {
        labels.resize(m);
        for (std::uint64_t i = 0; i < m; ++i)
            labels[i] = binio::read_le<std::uint32_t>(in);
    }
    return HashIndex(k, std::move(ids), std::move(words), std::move(labels));
}

HashIndex build_index(int k, std::span<const signed char> codes,
                      std::span<const std::uint64_t> ids,
                      std::span<const std::uint32_t> labels) {
    if (codes.size() != ids.size() * static_cast<std::size_t>(k))
        throw std::invalid_argument("build_index: codes/ids mismatch");
    const int wpc = PackedCode::words_for(k);
    std::vector<std::uint64_t> words(ids.size() * wpc, 0);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const PackedCode c = pack(codes.subspan(i * k, k));
        std::copy(c.words.begin(), c.words.end(), words.begin() + static_cast<std::ptrdiff_t>(i) * wpc);
    }
    return HashIndex(k, {ids.begin(), ids.end()}, std::move(words),
                     {labels.begin(), labels.end()});
}

}  // namespace a2
