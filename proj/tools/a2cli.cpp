// Command-line front end: dataset creation, training, encoding, indexing,
// querying, evaluation, gradient checking, and the simplicity-bias driver.
//
// Exit codes: 0 success, 1 runtime failure, 2 invalid input or config.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "a2hash/dataset.hpp"
#include "a2hash/metrics.hpp"
#include "a2hash/trainer.hpp"

using namespace a2;
namespace fs = std::filesystem;

namespace {

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

void require_exists(const std::string& path, const char* what) {
    if (!fs::exists(path))
        throw std::invalid_argument(std::string(what) + " not found: " + path);
}

fs::path ensure_out_dir(const std::string& out) {
    fs::path p(out);
    fs::create_directories(p);
    return p;
}

void write_snapshot(const CLI::App& root, const std::string& out) {
    std::ofstream os(ensure_out_dir(out) / "config.resolved");
    os << root.config_to_str(true, false);
}

struct GlobalOpts {
    std::uint64_t seed = 1;
    std::string out;
};

// ---- eval support ---------------------------------------------------------

struct EncodedSplit {
    std::vector<std::size_t> items;
    std::vector<signed char> codes;  // |items| x k
};

EncodedSplit encode_split(ModelParams& params, const DatasetManifest& data,
                          Split split) {
    EncodedSplit e;
    e.items = data.items_with_split(split);
    e.codes = encode_items(params, data, e.items);
    return e;
}

std::vector<std::uint32_t> item_labels(const DatasetManifest& data,
                                       const std::vector<std::size_t>& items) {
    std::vector<std::uint32_t> out;
    out.reserve(items.size());
    for (std::size_t i : items) out.push_back(data.labels[i]);
    return out;
}

// Full Hamming ranking of each query against the database split, reduced to
// one scalar per the requested metric.
double eval_metric(ModelParams& params, const DatasetManifest& data,
                   const std::string& metric, int at_k,
                   const std::string& protocol, double ratio,
                   std::uint64_t seed) {
    const int k = params.config.k;
    EncodedSplit q = encode_split(params, data, Split::query);
    EncodedSplit db = encode_split(params, data, Split::database);

    if (protocol == "zero-shot") {
        std::vector<std::uint32_t> classes(data.class_count);
        for (std::uint32_t c = 0; c < data.class_count; ++c) classes[c] = c;
        const ZeroShotSplit zs = zero_shot_split(classes, ratio, seed);
        auto keep_unseen = [&](EncodedSplit& e) {
            EncodedSplit kept;
            for (std::size_t i = 0; i < e.items.size(); ++i) {
                const std::uint32_t label = data.labels[e.items[i]];
                if (std::find(zs.unseen.begin(), zs.unseen.end(), label) ==
                    zs.unseen.end())
                    continue;
                kept.items.push_back(e.items[i]);
                kept.codes.insert(kept.codes.end(), e.codes.begin() + i * k,
                                  e.codes.begin() + (i + 1) * k);
            }
            e = std::move(kept);
        };
        keep_unseen(q);
        keep_unseen(db);
    }
    if (q.items.empty() || db.items.empty())
        throw std::invalid_argument("eval: empty query or database split");
    if (metric == "ndcg" && data.attributes.empty())
        throw std::invalid_argument("eval: ndcg needs per-item attributes");

    std::vector<std::uint64_t> ids(db.items.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = db.items[i];
    const HashIndex index = build_index(k, db.codes, ids);
    const auto db_labels = item_labels(data, db.items);

    std::vector<double> per_query;
    for (std::size_t qi = 0; qi < q.items.size(); ++qi) {
        const std::span<const signed char> code(q.codes.data() + qi * k, k);
        const auto hits =
            index.search_topk(pack(code), static_cast<int>(index.size()));
        RankedResult result;
        for (const SearchHit& h : hits) {
            result.ids.push_back(h.id);
            if (metric == "ndcg")
                result.relevance.push_back(attribute_relevance(
                    data.attributes[q.items[qi]], data.attributes[h.id]));
            else
                result.relevance.push_back(
                    data.labels[h.id] == data.labels[q.items[qi]] ? 1.0 : 0.0);
        }
        if (metric == "map") {
            long relevant = 0;
            for (std::uint32_t l : db_labels)
                relevant += l == data.labels[q.items[qi]];
            per_query.push_back(average_precision(result, relevant));
        } else if (metric == "precision") {
            per_query.push_back(precision_at_k(result, at_k));
        } else if (metric == "ndcg") {
            per_query.push_back(ndcg(result, at_k));
        } else {
            throw std::invalid_argument("eval: unknown metric " + metric);
        }
    }
    return mean_average_precision(per_query);  // plain mean for any metric
}

// ---- subcommand bodies ----------------------------------------------------

struct MakeDatasetOpts {
    std::string mode;
    int classes = 8, per_class = 100, channels = 3, height = 16, width = 16;
    double difficulty = 0.5;
    std::string simple_dir, complex_dir;
};

int run_make_dataset(const GlobalOpts& g, const MakeDatasetOpts& o,
                     const CLI::App& root) {
    if (g.out.empty()) throw std::invalid_argument("make-dataset needs --out");
    DatasetManifest m;
    if (o.mode == "synthetic") {
        m = make_synthetic(o.classes, o.per_class, o.channels, o.height, o.width,
                           o.difficulty, g.seed);
    } else if (o.mode == "concat") {
        require_exists(o.simple_dir, "simple dataset");
        require_exists(o.complex_dir, "complex dataset");
        const DatasetManifest simple = load_manifest(o.simple_dir);
        const DatasetManifest complex_part = load_manifest(o.complex_dir);
        m = make_concat_dataset({&simple, &complex_part}, g.seed);
    } else {
        throw std::invalid_argument("make-dataset mode must be synthetic|concat");
    }
    m.validate();
    save_manifest(m, ensure_out_dir(g.out).string());
    write_snapshot(root, g.out);
    std::cout << "items," << m.size() << "\nclasses," << m.class_count << "\n";
    return 0;
}

struct TrainOpts {
    std::string data;
    int bits = 12, epochs = 10, t_max = 60, batch = 16, samples = 64;
    double lr = 1e-5, weight_decay = 1e-4;
    long lr_drop = -1;
    std::string variant = "plus_plus";
    std::vector<std::string> ablate;
    bool multi_label = false;
    double alpha = -1.0, beta = -1.0, eta = -1.0, lambda = -1.0;
};

// Loss-weight overrides; negative (unset) values keep the defaults from
// LossWeights::defaults for the given batch size and bit count.
std::optional<LossWeights> weight_overrides(double lambda, double alpha,
                                            double beta, double eta,
                                            int batch, int bits,
                                            bool concat_data) {
    if (lambda < 0 && alpha < 0 && beta < 0 && eta < 0) return std::nullopt;
    LossWeights w = LossWeights::defaults(batch, bits, concat_data);
    if (lambda >= 0) w.lambda = lambda;
    if (alpha >= 0) w.alpha = alpha;
    if (beta >= 0) w.beta = beta;
    if (eta >= 0) w.eta = eta;
    return w;
}

TermSwitches switches_from_ablate(const std::vector<std::string>& ablate) {
    TermSwitches s;
    for (const std::string& a : ablate) {
        if (a == "feature-recon") s.feature_recon = false;
        else if (a == "decorrelation") s.decorrelation = false;
        else if (a == "image-g") s.image_g = false;
        else if (a == "image-gp") s.image_gp = false;
        else throw std::invalid_argument("unknown ablation term: " + a);
    }
    return s;
}

Variant parse_variant(const std::string& v) {
    if (v == "basic") return Variant::basic;
    if (v == "plus_plus") return Variant::plus_plus;
    throw std::invalid_argument("variant must be basic|plus_plus");
}

int run_train(const GlobalOpts& g, const TrainOpts& o, const CLI::App& root) {
    if (g.out.empty()) throw std::invalid_argument("train needs --out");
    require_exists(o.data, "dataset");
    const DatasetManifest data = load_manifest(o.data);

    const ModelConfig model_cfg =
        ModelConfig::desk_default(o.bits, data.c, data.h, data.w, g.seed);
    TrainConfig cfg;
    cfg.epochs = o.epochs;
    cfg.t_max = o.t_max;
    cfg.lr = o.lr;
    cfg.lr_drop_iteration = o.lr_drop;
    cfg.batch = o.batch;
    cfg.samples_per_epoch = o.samples;
    cfg.weight_decay = o.weight_decay;
    cfg.seed = g.seed;
    cfg.variant = parse_variant(o.variant);
    cfg.switches = switches_from_ablate(o.ablate);
    cfg.multi_label = o.multi_label;
    cfg.concat_data = data.concat_boundary > 0;
    cfg.weights = weight_overrides(o.lambda, o.alpha, o.beta, o.eta,
                                   cfg.batch, o.bits, cfg.concat_data);

    const fs::path out = ensure_out_dir(g.out);
    std::ofstream csv(out / "loss.csv");
    const TrainResult r = train(model_cfg, cfg, data, &csv);
    save_checkpoint(r.params, (out / "checkpoint.bin").string());
    write_snapshot(root, g.out);
    if (r.aborted) {
        std::cerr << "training aborted on non-finite loss; last good "
                     "parameters saved\n";
        return 1;
    }
    std::cout << "final_total," << fmt6(r.history.back().total) << "\n";
    return 0;
}

struct EncodeOpts {
    std::string checkpoint, data, split = "all";
};

int run_encode(const GlobalOpts& g, const EncodeOpts& o, const CLI::App& root) {
    if (g.out.empty()) throw std::invalid_argument("encode needs --out");
    require_exists(o.checkpoint, "checkpoint");
    require_exists(o.data, "dataset");
    ModelParams params = load_checkpoint(o.checkpoint);
    const DatasetManifest data = load_manifest(o.data);

    std::vector<std::size_t> items;
    if (o.split == "all") {
        items.resize(data.size());
        for (std::size_t i = 0; i < items.size(); ++i) items[i] = i;
    } else if (o.split == "train") {
        items = data.items_with_split(Split::train);
    } else if (o.split == "database") {
        items = data.items_with_split(Split::database);
    } else if (o.split == "query") {
        items = data.items_with_split(Split::query);
    } else {
        throw std::invalid_argument("split must be all|train|database|query");
    }
    const auto codes = encode_items(params, data, items);
    const int k = params.config.k;

    const fs::path out = ensure_out_dir(g.out);
    std::ofstream os(out / "codes.csv");
    for (std::size_t i = 0; i < items.size(); ++i) {
        os << items[i];
        for (int b = 0; b < k; ++b)
            os << ',' << static_cast<int>(codes[i * k + b]);
        os << '\n';
    }
    write_snapshot(root, g.out);
    std::cout << "encoded," << items.size() << "\nbits," << k << "\n";
    return 0;
}

struct IndexOpts {
    std::string codes;
};

int run_index(const GlobalOpts& g, const IndexOpts& o, const CLI::App& root) {
    if (g.out.empty()) throw std::invalid_argument("index needs --out");
    require_exists(o.codes, "codes file");
    std::ifstream is(o.codes);
    std::vector<std::uint64_t> ids;
    std::vector<signed char> codes;
    int k = -1;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        if (!std::getline(row, cell, ',')) continue;
        ids.push_back(std::stoull(cell));
        int bits = 0;
        while (std::getline(row, cell, ',')) {
            const int v = std::stoi(cell);
            if (v != 1 && v != -1)
                throw std::invalid_argument("codes file entries must be +/-1");
            codes.push_back(static_cast<signed char>(v));
            ++bits;
        }
        if (k < 0) k = bits;
        if (bits != k)
            throw std::invalid_argument("codes file rows have unequal widths");
    }
    if (k <= 0) throw std::invalid_argument("codes file is empty");
    const HashIndex index = build_index(k, codes, ids);
    index.save((ensure_out_dir(g.out) / "index.bin").string());
    write_snapshot(root, g.out);
    std::cout << "indexed," << index.size() << "\nbits," << k << "\n";
    return 0;
}

struct QueryOpts {
    std::string index, checkpoint, data;
    std::size_t item = 0;
    int topk = 10;
};

int run_query(const GlobalOpts&, const QueryOpts& o, const CLI::App&) {
    require_exists(o.index, "index");
    require_exists(o.checkpoint, "checkpoint");
    require_exists(o.data, "dataset");
    const HashIndex index = HashIndex::load(o.index);
    ModelParams params = load_checkpoint(o.checkpoint);
    const DatasetManifest data = load_manifest(o.data);
    if (o.item >= data.size())
        throw std::invalid_argument("query item out of range");
    const std::vector<std::size_t> one{o.item};
    const auto codes = encode_items(params, data, one);
    const auto hits = index.search_topk(pack(codes), o.topk);
    std::cout << "rank,id,distance\n";
    for (std::size_t r = 0; r < hits.size(); ++r)
        std::cout << r + 1 << ',' << hits[r].id << ',' << hits[r].distance
                  << '\n';
    return 0;
}

struct EvalOpts {
    std::string checkpoint, data, metric = "map", protocol = "standard";
    int at_k = 10;
    double ratio = 0.5;
};

int run_eval(const GlobalOpts& g, const EvalOpts& o, const CLI::App& root) {
    require_exists(o.checkpoint, "checkpoint");
    require_exists(o.data, "dataset");
    if (o.protocol != "standard" && o.protocol != "zero-shot")
        throw std::invalid_argument("protocol must be standard|zero-shot");
    ModelParams params = load_checkpoint(o.checkpoint);
    const DatasetManifest data = load_manifest(o.data);
    const double value = eval_metric(params, data, o.metric, o.at_k,
                                     o.protocol, o.ratio, g.seed);
    std::cout << o.metric << ',' << fmt6(value) << '\n';
    if (!g.out.empty()) {
        std::ofstream os(ensure_out_dir(g.out) / "metrics.csv");
        os << "metric,protocol,value\n"
           << o.metric << ',' << o.protocol << ',' << fmt6(value) << '\n';
        write_snapshot(root, g.out);
    }
    return 0;
}

struct SbexpOpts {
    std::string data;
    int bits = 12, epochs = 6, t_max = 30, batch = 8, samples = 32;
    double lr = 1e-5;
    double alpha = -1.0, beta = -1.0, eta = -1.0, lambda = -1.0;
};

int run_sbexp(const GlobalOpts& g, const SbexpOpts& o, const CLI::App& root) {
    if (g.out.empty()) throw std::invalid_argument("sbexp needs --out");
    require_exists(o.data, "dataset");
    const DatasetManifest combined = load_manifest(o.data);
    if (combined.concat_boundary == 0)
        throw std::invalid_argument("sbexp needs a concatenated dataset");
    const DatasetManifest simple_only = mask_part(combined, ConcatPart::simple);
    const DatasetManifest complex_only =
        mask_part(combined, ConcatPart::complex_part);

    const fs::path out = ensure_out_dir(g.out);
    std::ofstream report(out / "report.csv");
    report << "variant,setting,map\n";
    std::cout << "variant,setting,map\n";

    const auto queries = combined.items_with_split(Split::query);
    for (const auto& [name, variant] :
         {std::pair{"basic", Variant::basic},
          std::pair{"plus_plus", Variant::plus_plus}}) {
        TrainConfig cfg;
        cfg.epochs = o.epochs;
        cfg.t_max = o.t_max;
        cfg.lr = o.lr;
        cfg.batch = o.batch;
        cfg.samples_per_epoch = o.samples;
        cfg.seed = g.seed;
        cfg.variant = variant;
        cfg.concat_data = true;
        cfg.weights = weight_overrides(o.lambda, o.alpha, o.beta, o.eta,
                                       cfg.batch, o.bits, true);
        const ModelConfig model_cfg = ModelConfig::desk_default(
            o.bits, combined.c, combined.h, combined.w, g.seed);
        TrainResult r = train(model_cfg, cfg, combined);
        if (r.aborted) throw std::runtime_error("sbexp training aborted");

        for (const auto& [setting, ds] :
             {std::pair{"combined", &combined},
              std::pair{"simple-only", &simple_only},
              std::pair{"complex-only", &complex_only}}) {
            const double m = retrieval_map(r.params, *ds);
            report << name << ',' << setting << ',' << fmt6(m) << '\n';
            std::cout << name << ',' << setting << ',' << fmt6(m) << '\n';
        }
        if (!queries.empty()) {
            const std::vector<std::size_t> one{queries.front()};
            activation_heatmap(r.params, combined.batch(one),
                               (out / (std::string("heat_") + name)).string());
        }
    }
    write_snapshot(root, g.out);
    return 0;
}

struct GradcheckOpts {
    std::string term = "all";
    double tol = 1e-4;
};

int run_gradcheck(const GlobalOpts& g, const GradcheckOpts& o,
                  const CLI::App&) {
    ModelConfig cfg;
    cfg.k = 2;
    cfg.image_c = 3;
    cfg.image_h = 8;
    cfg.image_w = 8;
    cfg.backbone_channels = {4};
    cfg.local_dim = 2;
    cfg.global_dim = 2;
    cfg.d_prime = 2;
    cfg.deconv = {{2, 4, 4, 4, 1, 0}, {4, 4, 4, 3, 2, 1}};
    cfg.seed = g.seed;
    // Finite differences disagree with the relu subgradient when a
    // pre-activation sits within eps of zero, so re-draw the fixture until
    // every relu input clears the kink by a wide margin.
    ModelParams params = ModelParams::init(cfg);
    Tensor images({2, cfg.image_c, cfg.image_h, cfg.image_w});
    for (std::uint64_t attempt = 0;; ++attempt) {
        if (attempt == 64)
            throw std::runtime_error("gradcheck: no kink-free fixture found");
        params = ModelParams::init(cfg);
        std::mt19937_64 rng(g.seed + attempt);
        for (Tensor* t : params.trainable())
            for (double& v : t->data) v += next_uniform(rng, -0.05, 0.05);
        for (double& v : images.data) v = next_uniform(rng, 0.0, 1.0);
        Graph gr;
        build_forward(gr, params, gr.constant(images), true);
        double margin = 1e9;
        for (int id = 0; id < gr.size(); ++id)
            if (gr.op(id) == OpKind::relu)
                for (double v : gr.value(gr.inputs(id)[0]).data)
                    margin = std::min(margin, std::abs(v));
        if (margin > 1e-3) break;
    }
    Tensor Z({3, cfg.k});
    for (std::size_t i = 0; i < Z.data.size(); ++i) Z.data[i] = i % 2 ? 1.0 : -1.0;
    Tensor S({2, 3});
    for (std::size_t i = 0; i < S.data.size(); ++i) S.data[i] = i % 3 ? -1.0 : 1.0;

    auto term_node = [&](Graph& gr, const ForwardNodes& fw,
                         const std::string& term) {
        if (term == "recon-decoder") return gr.frobenius_sq(gr.sub(fw.X, fw.Xp));
        if (term == "recon-encoder") return gr.frobenius_sq(gr.sub(fw.V, fw.Vp));
        if (term == "decorrelation") {
            const int corr = gr.matmul(fw.Vp, fw.Vp, true, false);
            return gr.frobenius_sq(
                gr.sub(corr, gr.constant(Tensor::scaled_identity(cfg.k, 2))));
        }
        if (term == "hash") {
            Tensor ks = S;
            for (double& s : ks.data) s *= cfg.k;
            const int inner = gr.matmul(fw.Vp, gr.constant(Z), false, true);
            return gr.frobenius_sq(gr.sub(inner, gr.constant(ks)));
        }
        if (term == "image-recon")
            return gr.add(gr.frobenius_sq(gr.sub(fw.recon_g, fw.images)),
                          gr.frobenius_sq(gr.sub(fw.recon_gp, fw.images)));
        throw std::invalid_argument("unknown gradcheck term: " + term);
    };

    std::vector<std::string> terms{"recon-decoder", "recon-encoder",
                                   "decorrelation", "hash", "image-recon"};
    if (o.term != "all") terms = {o.term};

    bool all_pass = true;
    std::cout << "term,worst_error,status\n";
    for (const std::string& term : terms) {
        auto eval = [&]() {
            Graph gr;
            const ForwardNodes fw =
                build_forward(gr, params, gr.constant(images), true);
            return gr.value(term_node(gr, fw, term)).data[0];
        };
        params.zero_grads();
        {
            Graph gr;
            const ForwardNodes fw =
                build_forward(gr, params, gr.constant(images), true);
            gr.backward(term_node(gr, fw, term));
        }
        std::vector<Tensor*> ptrs = params.trainable();
        std::vector<std::vector<double>> analytic;
        for (Tensor* t : ptrs) analytic.push_back(t->grad);
        GradCheckDetail detail;
        const double err = finite_diff_check(eval, ptrs, analytic, 1e-5, &detail);
        const bool pass = err <= o.tol;
        all_pass = all_pass && pass;
        std::cout << term << ',' << fmt6(err) << ','
                  << (pass ? "pass" : "FAIL") << '\n';
        if (!pass)
            std::cerr << term << ": worst coordinate param " << detail.param
                      << " index " << detail.index << " analytic "
                      << detail.analytic << " numeric " << detail.numeric
                      << "\n";
    }
    return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"attribute-aware hashing toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "flat key=value config file");

    GlobalOpts g;
    app.add_option("--seed", g.seed, "global RNG seed");
    app.add_option("--out", g.out, "output directory");

    MakeDatasetOpts md;
    CLI::App* c_md = app.add_subcommand("make-dataset", "build a dataset");
    c_md->fallthrough();
    c_md->add_option("mode", md.mode, "synthetic|concat")->required();
    c_md->add_option("--classes", md.classes);
    c_md->add_option("--per-class", md.per_class);
    c_md->add_option("--channels", md.channels);
    c_md->add_option("--height", md.height);
    c_md->add_option("--width", md.width);
    c_md->add_option("--difficulty", md.difficulty);
    c_md->add_option("--simple", md.simple_dir, "simple-part dataset dir");
    c_md->add_option("--complex", md.complex_dir, "complex-part dataset dir");

    TrainOpts tr;
    CLI::App* c_tr = app.add_subcommand("train", "train a model");
    c_tr->fallthrough();
    c_tr->add_option("--data", tr.data)->required();
    c_tr->add_option("--bits", tr.bits);
    c_tr->add_option("--epochs", tr.epochs);
    c_tr->add_option("--t-max", tr.t_max);
    c_tr->add_option("--lr", tr.lr);
    c_tr->add_option("--lr-drop", tr.lr_drop, "global iteration for lr/10");
    c_tr->add_option("--batch", tr.batch);
    c_tr->add_option("--samples", tr.samples, "query-set size per epoch");
    c_tr->add_option("--weight-decay", tr.weight_decay);
    c_tr->add_option("--variant", tr.variant, "basic|plus_plus");
    c_tr->add_option("--ablate", tr.ablate,
                     "drop terms: feature-recon decorrelation image-g image-gp");
    c_tr->add_flag("--multi-label", tr.multi_label);
    c_tr->add_option("--lambda", tr.lambda, "hash loss weight override");
    c_tr->add_option("--alpha", tr.alpha, "decorrelation weight override");
    c_tr->add_option("--beta", tr.beta, "relaxation penalty weight override");
    c_tr->add_option("--eta", tr.eta, "image reconstruction weight override");

    EncodeOpts en;
    CLI::App* c_en = app.add_subcommand("encode", "emit binary codes");
    c_en->fallthrough();
    c_en->add_option("--checkpoint", en.checkpoint)->required();
    c_en->add_option("--data", en.data)->required();
    c_en->add_option("--split", en.split, "all|train|database|query");

    IndexOpts ix;
    CLI::App* c_ix = app.add_subcommand("index", "build a search index");
    c_ix->fallthrough();
    c_ix->add_option("--codes", ix.codes)->required();

    QueryOpts qy;
    CLI::App* c_qy = app.add_subcommand("query", "rank an item's neighbors");
    c_qy->fallthrough();
    c_qy->add_option("--index", qy.index)->required();
    c_qy->add_option("--checkpoint", qy.checkpoint)->required();
    c_qy->add_option("--data", qy.data)->required();
    c_qy->add_option("--item", qy.item)->required();
    c_qy->add_option("--topk", qy.topk);

    EvalOpts ev;
    CLI::App* c_ev = app.add_subcommand("eval", "retrieval metrics");
    c_ev->fallthrough();
    c_ev->add_option("--checkpoint", ev.checkpoint)->required();
    c_ev->add_option("--data", ev.data)->required();
    c_ev->add_option("--metric", ev.metric, "map|precision|ndcg");
    c_ev->add_option("--k", ev.at_k, "cutoff for precision/ndcg");
    c_ev->add_option("--protocol", ev.protocol, "standard|zero-shot");
    c_ev->add_option("--ratio", ev.ratio, "zero-shot seen fraction");

    SbexpOpts sb;
    CLI::App* c_sb = app.add_subcommand("sbexp", "simplicity-bias experiment");
    c_sb->fallthrough();
    c_sb->add_option("--data", sb.data, "concatenated dataset dir")->required();
    c_sb->add_option("--bits", sb.bits);
    c_sb->add_option("--epochs", sb.epochs);
    c_sb->add_option("--t-max", sb.t_max);
    c_sb->add_option("--batch", sb.batch);
    c_sb->add_option("--samples", sb.samples);
    c_sb->add_option("--lr", sb.lr);
    c_sb->add_option("--lambda", sb.lambda, "hash loss weight override");
    c_sb->add_option("--alpha", sb.alpha, "decorrelation weight override");
    c_sb->add_option("--beta", sb.beta, "relaxation penalty weight override");
    c_sb->add_option("--eta", sb.eta, "image reconstruction weight override");

    GradcheckOpts gc;
    CLI::App* c_gc = app.add_subcommand("gradcheck", "finite-difference audit");
    c_gc->fallthrough();
    c_gc->add_option("--term", gc.term,
                     "all|recon-decoder|recon-encoder|decorrelation|hash|"
                     "image-recon");
    c_gc->add_option("--tol", gc.tol);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (c_md->parsed()) return run_make_dataset(g, md, app);
        if (c_tr->parsed()) return run_train(g, tr, app);
        if (c_en->parsed()) return run_encode(g, en, app);
        if (c_ix->parsed()) return run_index(g, ix, app);
        if (c_qy->parsed()) return run_query(g, qy, app);
        if (c_ev->parsed()) return run_eval(g, ev, app);
        if (c_sb->parsed()) return run_sbexp(g, sb, app);
        if (c_gc->parsed()) return run_gradcheck(g, gc, app);
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
