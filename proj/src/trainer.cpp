#include "a2hash/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>

#include "a2hash/metrics.hpp"

namespace a2 {

Tensor build_similarity(const std::vector<std::vector<std::uint32_t>>& labels_q,
                        const std::vector<std::vector<std::uint32_t>>& labels_db,
                        bool multi_label) {
    for (const auto* side : {&labels_q, &labels_db})
        for (const auto& set : *side)
            if (set.empty())
                throw std::invalid_argument("similarity: empty label set");
    const int n = static_cast<int>(labels_q.size());
    const int m = static_cast<int>(labels_db.size());
    Tensor S({n, m});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            bool similar;
            if (multi_label) {
                similar = false;
                for (std::uint32_t a : labels_q[i]) {
                    if (std::find(labels_db[j].begin(), labels_db[j].end(), a) !=
                        labels_db[j].end()) {
                        similar = true;
                        break;
                    }
                }
            } else {
                similar = labels_q[i][0] == labels_db[j][0];
            }
            S.data[static_cast<std::size_t>(i) * m + j] = similar ? 1.0 : -1.0;
        }
    return S;
}

std::vector<std::size_t> sample_query_set(std::span<const std::size_t> database,
                                          std::size_t n, std::uint64_t seed) {
    if (n > database.size())
        throw std::invalid_argument("sample_query_set: n exceeds database size");
    std::vector<std::size_t> pool(database.begin(), database.end());
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + rng() % (pool.size() - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(n);
    return pool;
}

std::vector<signed char> encode_items(ModelParams& params,
                                      const DatasetManifest& data,
                                      std::span<const std::size_t> items) {
    const int k = params.config.k;
    std::vector<signed char> codes;
    codes.reserve(items.size() * k);
    constexpr std::size_t chunk = 64;
    for (std::size_t lo = 0; lo < items.size(); lo += chunk) {
        const std::size_t hi = std::min(items.size(), lo + chunk);
        const Tensor batch = data.batch(items.subspan(lo, hi - lo));
        const std::vector<double> relaxed = encode_relaxed(params, batch);
        const std::vector<signed char> bits = binarize(relaxed);
        codes.insert(codes.end(), bits.begin(), bits.end());
    }
    return codes;
}

namespace {

std::vector<std::vector<std::uint32_t>> label_sets(const DatasetManifest& data,
                                                   std::span<const std::size_t> items,
                                                   bool multi_label) {
    std::vector<std::vector<std::uint32_t>> out;
    out.reserve(items.size());
    for (std::size_t i : items) {
        if (multi_label && !data.attributes.empty())
            out.push_back(data.attributes[i]);
        else
            out.push_back({data.labels[i]});
    }
    return out;
}

}  // namespace

TrainResult train(const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const DatasetManifest& data, std::ostream* csv) {
    data.validate();
    const std::vector<std::size_t> database = data.items_with_split(Split::database);
    if (database.empty()) throw std::invalid_argument("train: empty database split");
    if (cfg.batch <= 0 || cfg.samples_per_epoch <= 0)
        throw std::invalid_argument("train: batch and samples_per_epoch must be positive");

    const LossWeights weights =
        cfg.weights.value_or(LossWeights::defaults(cfg.batch, model_cfg.k,
                                                   cfg.concat_data));
    const bool with_decoder = cfg.variant == Variant::plus_plus &&
                              (cfg.switches.image_g || cfg.switches.image_gp);
    const int k = model_cfg.k;
    const int m = static_cast<int>(database.size());
    const auto db_labels = label_sets(data, database, cfg.multi_label);

    TrainResult result{ModelParams::init(model_cfg), {}, false};
    ModelParams& params = result.params;
    ModelParams last_good = params;

    if (csv)
        *csv << "iteration,epoch,recon_decoder,recon_encoder,decorrelation,hash,"
                "image_g,image_gp,total\n";

    std::mt19937_64 rng(cfg.seed ^ 0xa5a5a5a5a5a5a5a5ull);
    double lr = cfg.lr;
    long iteration = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Database codes are constants within the epoch (Z refresh cadence).
        const std::vector<signed char> z_bits = encode_items(params, data, database);
        Tensor Z({m, k});
        for (std::size_t i = 0; i < z_bits.size(); ++i)
            Z.data[i] = static_cast<double>(z_bits[i]);

        const std::size_t n_omega =
            std::min<std::size_t>(cfg.samples_per_epoch, database.size());
        const std::vector<std::size_t> omega =
            sample_query_set(database, n_omega, rng());

        for (int t = 0; t < cfg.t_max; ++t) {
            std::vector<std::size_t> batch_items(cfg.batch);
            for (int b = 0; b < cfg.batch; ++b)
                batch_items[b] =
                    omega[(static_cast<std::size_t>(t) * cfg.batch + b) % omega.size()];

            const Tensor images = data.batch(batch_items);
            const Tensor S =
                build_similarity(label_sets(data, batch_items, cfg.multi_label),
                                 db_labels, cfg.multi_label);

            Graph graph;
            const int in = graph.constant(images);
            const ForwardNodes fw = build_forward(graph, params, in, with_decoder);
            const ObjectiveNodes obj = build_objective(
                graph, fw, Z, S, weights, cfg.variant, cfg.switches);

            const double total = graph.value(obj.total).data[0];
            if (!std::isfinite(total)) {
                result.params = last_good;
                result.aborted = true;
                return result;
            }

            params.zero_grads();
            graph.backward(obj.total);
            sgd_step(params.trainable(), lr, cfg.weight_decay);

            TrainHistoryRow row{};
            row.iteration = iteration;
            row.epoch = epoch;
            auto term = [&](int id) {
                return id >= 0 ? graph.value(id).data[0] : 0.0;
            };
            row.recon_decoder = term(obj.recon_decoder);
            row.recon_encoder = term(obj.recon_encoder);
            row.decorrelation = term(obj.decorrelation);
            row.hash = term(obj.hash);
            row.image_g = term(obj.image_g);
            row.image_gp = term(obj.image_gp);
            row.total = total;
            result.history.push_back(row);
            if (csv) {
                char buf[256];
                std::snprintf(buf, sizeof buf,
                              "%ld,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                              row.iteration, row.epoch, row.recon_decoder,
                              row.recon_encoder, row.decorrelation, row.hash,
                              row.image_g, row.image_gp, row.total);
                *csv << buf;
            }

            last_good = params;
            ++iteration;
            if (iteration == cfg.lr_drop_iteration) lr /= 10.0;
        }
    }
    return result;
}

double retrieval_map(ModelParams& params, const DatasetManifest& data) {
    const std::vector<std::size_t> queries = data.items_with_split(Split::query);
    const std::vector<std::size_t> database = data.items_with_split(Split::database);
    if (queries.empty() || database.empty())
        throw std::invalid_argument("retrieval_map: need query and database splits");
    const int k = params.config.k;

    const std::vector<signed char> db_codes = encode_items(params, data, database);
    std::vector<std::uint64_t> ids(database.size());
    for (std::size_t i = 0; i < database.size(); ++i) ids[i] = database[i];
    const HashIndex index = build_index(k, db_codes, ids);

    const std::vector<signed char> q_codes = encode_items(params, data, queries);
    std::vector<double> aps(queries.size());
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        const PackedCode q = pack(std::span(q_codes).subspan(qi * k, k));
        const auto hits = index.search_topk(q, static_cast<int>(database.size()));
        RankedResult r;
        r.ids.reserve(hits.size());
        r.relevance.reserve(hits.size());
        const std::uint32_t cls = data.labels[queries[qi]];
        for (const SearchHit& h : hits) {
            r.ids.push_back(h.id);
            r.relevance.push_back(data.labels[h.id] == cls ? 1.0 : 0.0);
        }
        aps[qi] = average_precision(r);
    }
    return mean_average_precision(aps);
}

}  // namespace a2
