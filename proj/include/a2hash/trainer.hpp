#pragma once

#include <iosfwd>
#include <optional>

#include "a2hash/dataset.hpp"
#include "a2hash/hash_index.hpp"
#include "a2hash/losses.hpp"
#include "a2hash/model.hpp"

namespace a2 {

// Pairwise similarity in {-1,+1}: +1 iff equal class (single-label) or
// non-empty label-set intersection (multi-label). Rows are queries.
Tensor build_similarity(const std::vector<std::vector<std::uint32_t>>& labels_q,
                        const std::vector<std::vector<std::uint32_t>>& labels_db,
                        bool multi_label);

// n distinct ids drawn uniformly without replacement; deterministic per seed.
std::vector<std::size_t> sample_query_set(std::span<const std::size_t> database,
                                          std::size_t n, std::uint64_t seed);

// Binary codes sgn(tanh(W F(I))) for the given items, n x k row-major in
// {-1,+1}. Runs in batches.
std::vector<signed char> encode_items(ModelParams& params,
                                      const DatasetManifest& data,
                                      std::span<const std::size_t> items);

struct TrainConfig {
    int epochs = 10;
    int t_max = 60;                 // mini-batch iterations per epoch
    double lr = 0.01;
    long lr_drop_iteration = -1;    // global iteration where lr /= 10; -1 = never
    int batch = 16;
    int samples_per_epoch = 64;     // |Omega|
    double weight_decay = 1e-4;
    std::uint64_t seed = 1;
    Variant variant = Variant::plus_plus;
    TermSwitches switches;
    bool multi_label = false;
    // Concatenated simple/complex data uses eta 0.5 instead of 0.1.
    bool concat_data = false;
    std::optional<LossWeights> weights;  // default: paper rules from batch and k
};

struct TrainHistoryRow {
    long iteration;
    int epoch;
    double recon_decoder, recon_encoder, decorrelation, hash;
    double image_g, image_gp;
    double total;
};

struct TrainResult {
    ModelParams params;
    std::vector<TrainHistoryRow> history;
    bool aborted = false;  // non-finite loss; params hold the last good state
};

// ADSH-style loop: per epoch refresh the database codes Z, resample the
// query set Omega from the database split, then run t_max mini-batch steps
// of the combined objective. Loss history optionally streamed as CSV.
TrainResult train(const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const DatasetManifest& data, std::ostream* csv = nullptr);

// mAP of the query split ranked against the database split by Hamming
// distance (full ranking, same-class relevance).
double retrieval_map(ModelParams& params, const DatasetManifest& data);

}  // namespace a2
