#include "a2hash/model.hpp"

#include <cmath>
#include <random>

#include "a2hash/binio.hpp"
#include "a2hash/kernels.hpp"

namespace a2 {

namespace {
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr char kCheckpointMagic[5] = "A2CK";
}  // namespace

int ModelConfig::feat_h() const {
    int h = image_h;
    for (std::size_t i = 0; i < backbone_channels.size(); ++i)
        h = conv_out(h, 3, 2, 1);
    return h;
}

int ModelConfig::feat_w() const {
    int w = image_w;
    for (std::size_t i = 0; i < backbone_channels.size(); ++i)
        w = conv_out(w, 3, 2, 1);
    return w;
}

void ModelConfig::validate() const {
    if (k <= 0) throw std::invalid_argument("k must be positive");
    if (local_dim <= 0 || global_dim <= 0)
        throw std::invalid_argument("feature widths must be positive");
    if (backbone_channels.empty())
        throw std::invalid_argument("backbone needs at least one layer");
    if (d_prime > d())
        throw std::invalid_argument("d' exceeds d");
    if (feat_h() <= 0 || feat_w() <= 0)
        throw std::invalid_argument("backbone collapses the spatial extent");
    if (deconv.empty()) throw std::invalid_argument("empty deconv spec");
    if (deconv.front().in_ch != d_prime)
        throw std::invalid_argument("deconv input channels must equal d'");
    if (deconv.back().out_ch != image_c)
        throw std::invalid_argument("deconv must end on the image channel count");
    int h = 1, w = 1, ch = d_prime;
    for (const DeconvRow& r : deconv) {
        if (r.in_ch != ch)
            throw std::invalid_argument("deconv channel chain broken");
        h = tconv_out(h, r.kh, r.stride, r.pad);
        w = tconv_out(w, r.kw, r.stride, r.pad);
        if (h <= 0 || w <= 0) throw std::invalid_argument("deconv spatial underflow");
        ch = r.out_ch;
    }
    if (h != image_h || w != image_w)
        throw std::invalid_argument("deconv spec produces " + std::to_string(h) + "x" +
                                    std::to_string(w) + ", image is " +
                                    std::to_string(image_h) + "x" +
                                    std::to_string(image_w));
}

ModelConfig ModelConfig::desk_default(int k, int c, int h, int w,
                                      std::uint64_t seed) {
    ModelConfig cfg;
    cfg.k = k;
    cfg.image_c = c;
    cfg.image_h = h;
    cfg.image_w = w;
    cfg.seed = seed;
    // Decoder: first row stride 1 pad 0 lands on (k0h x k0w), every later
    // row kernel 4 stride 2 pad 1 doubles the spatial size.
    int k0h = h, k0w = w;
    int doublings = 0;
    while (k0h % 2 == 0 && k0w % 2 == 0 && k0h > 4 && k0w > 4) {
        k0h /= 2;
        k0w /= 2;
        ++doublings;
    }
    std::vector<int> chain{cfg.d_prime};
    for (int i = 0; i < doublings; ++i) chain.push_back(i == 0 ? 16 : 8);
    chain.push_back(c);
    cfg.deconv.clear();
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
        DeconvRow r{};
        r.in_ch = chain[i];
        r.out_ch = chain[i + 1];
        if (i == 0) {
            r.kh = k0h;
            r.kw = k0w;
            r.stride = 1;
            r.pad = 0;
        } else {
            r.kh = r.kw = 4;
            r.stride = 2;
            r.pad = 1;
        }
        cfg.deconv.push_back(r);
    }
    cfg.validate();
    return cfg;
}

bool operator==(const ModelConfig& a, const ModelConfig& b) {
    auto row_eq = [](const DeconvRow& x, const DeconvRow& y) {
        return x.in_ch == y.in_ch && x.kh == y.kh && x.kw == y.kw &&
               x.out_ch == y.out_ch && x.stride == y.stride && x.pad == y.pad;
    };
    if (a.deconv.size() != b.deconv.size()) return false;
    for (std::size_t i = 0; i < a.deconv.size(); ++i)
        if (!row_eq(a.deconv[i], b.deconv[i])) return false;
    return a.k == b.k && a.image_c == b.image_c && a.image_h == b.image_h &&
           a.image_w == b.image_w && a.backbone_channels == b.backbone_channels &&
           a.local_dim == b.local_dim && a.global_dim == b.global_dim &&
           a.d_prime == b.d_prime && a.variant == b.variant && a.seed == b.seed;
}

namespace {

Tensor init_weight(std::vector<int> shape, int fan_in, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    // Kaiming-uniform; the wider bound keeps activations from shrinking
    // through the depth of the stack at this small scale.
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (double& v : t.data) v = next_uniform(rng, -bound, bound);
    t.requires_grad = true;
    return t;
}

Tensor init_bias(int n) {
    Tensor t({n});
    t.requires_grad = true;
    return t;
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg) {
    cfg.validate();
    ModelParams p;
    p.config = cfg;
    std::mt19937_64 rng(cfg.seed);
    int cin = cfg.image_c;
    for (int cout : cfg.backbone_channels) {
        p.backbone_w.push_back(init_weight({cout, cin, 3, 3}, cin * 9, rng));
        p.backbone_b.push_back(init_bias(cout));
        cin = cout;
    }
    const int cf = cfg.backbone_out_channels();
    for (int c = 0; c < cfg.k; ++c) {
        p.att_w.push_back(init_weight({1, cf, 1, 1}, cf, rng));
        p.att_b.push_back(init_bias(1));
    }
    p.local_w = init_weight({cfg.local_dim, cf, 1, 1}, cf, rng);
    p.local_b = init_bias(cfg.local_dim);
    p.global_w = init_weight({cfg.global_dim, cf, 1, 1}, cf, rng);
    p.global_b = init_bias(cfg.global_dim);
    p.W = init_weight({cfg.k, cfg.d()}, cfg.d(), rng);
    p.Wp = init_weight({cfg.d_prime, cfg.d()}, cfg.d(), rng);
    for (const DeconvRow& r : cfg.deconv) {
        p.deconv_w.push_back(
            init_weight({r.in_ch, r.out_ch, r.kh, r.kw}, r.in_ch * r.kh * r.kw, rng));
        p.deconv_b.push_back(init_bias(r.out_ch));
    }
    return p;
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::named() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (std::size_t i = 0; i < backbone_w.size(); ++i) {
        out.emplace_back("backbone.w" + std::to_string(i), &backbone_w[i]);
        out.emplace_back("backbone.b" + std::to_string(i), &backbone_b[i]);
    }
    for (std::size_t c = 0; c < att_w.size(); ++c) {
        out.emplace_back("attention.w" + std::to_string(c), &att_w[c]);
        out.emplace_back("attention.b" + std::to_string(c), &att_b[c]);
    }
    out.emplace_back("local.w", &local_w);
    out.emplace_back("local.b", &local_b);
    out.emplace_back("global.w", &global_w);
    out.emplace_back("global.b", &global_b);
    out.emplace_back("encoder.W", &W);
    out.emplace_back("compressor.Wp", &Wp);
    for (std::size_t i = 0; i < deconv_w.size(); ++i) {
        out.emplace_back("decoder.w" + std::to_string(i), &deconv_w[i]);
        out.emplace_back("decoder.b" + std::to_string(i), &deconv_b[i]);
    }
    return out;
}

std::vector<Tensor*> ModelParams::trainable() {
    std::vector<Tensor*> out;
    for (auto& [name, t] : named()) out.push_back(t);
    return out;
}

void ModelParams::zero_grads() {
    for (Tensor* t : trainable()) t->zero_grad();
}

ForwardNodes build_forward(Graph& graph, ModelParams& params, int images,
                           bool with_decoder) {
    const ModelConfig& cfg = params.config;
    ForwardNodes out;
    out.images = images;

    int h = images;
    std::vector<int> bw, bb;
    for (std::size_t i = 0; i < params.backbone_w.size(); ++i) {
        const int w = graph.leaf(params.backbone_w[i]);
        const int b = graph.leaf(params.backbone_b[i]);
        h = graph.relu(graph.conv2d(h, w, b, 2, 1));
    }
    out.T = h;

    const int local_w = graph.leaf(params.local_w);
    const int local_b = graph.leaf(params.local_b);
    const double pool_area =
        static_cast<double>(cfg.feat_h()) * cfg.feat_w();
    std::vector<int> features;
    for (int c = 0; c < cfg.k; ++c) {
        const int aw = graph.leaf(params.att_w[c]);
        const int ab = graph.leaf(params.att_b[c]);
        const int map = graph.spatial_softmax(graph.conv2d(out.T, aw, ab, 1, 0));
        out.attention.push_back(map);
        const int attended = graph.hadamard(out.T, map);
        const int local = graph.relu(graph.conv2d(attended, local_w, local_b, 1, 0));
        // The softmax map already sums to one over positions, so undo the
        // second averaging the pool applies.
        features.push_back(graph.scale(graph.global_avg_pool(local), pool_area));
    }
    const int gw = graph.leaf(params.global_w);
    const int gb = graph.leaf(params.global_b);
    features.push_back(
        graph.global_avg_pool(graph.relu(graph.conv2d(out.T, gw, gb, 1, 0))));
    out.X = graph.concat(features);

    const int W = graph.leaf(params.W);
    out.V = graph.matmul(out.X, W, false, true);
    out.Vp = graph.tanh_(out.V);
    out.Xp = graph.matmul(out.Vp, W);

    if (with_decoder) {
        const int Wp = graph.leaf(params.Wp);
        out.g = graph.matmul(out.X, Wp, false, true);
        out.gp = graph.matmul(out.Xp, Wp, false, true);
        auto decode = [&](int code) {
            int x = code;
            for (std::size_t i = 0; i < params.deconv_w.size(); ++i) {
                const int dw = graph.leaf(params.deconv_w[i]);
                const int db = graph.leaf(params.deconv_b[i]);
                const DeconvRow& row = cfg.deconv[i];
                x = graph.transposed_conv2d(x, dw, db, row.stride, row.pad);
                if (i + 1 < params.deconv_w.size()) x = graph.relu(x);
            }
            return x;
        };
        out.recon_g = decode(out.g);
        out.recon_gp = decode(out.gp);
    }
    return out;
}

std::vector<double> encode_relaxed(ModelParams& params, const Tensor& images) {
    Graph g;
    Tensor imgs = images;
    imgs.requires_grad = false;
    const int in = g.constant(std::move(imgs));
    const ForwardNodes fw = build_forward(g, params, in, false);
    return g.value(fw.Vp).data;
}

std::vector<signed char> binarize(const std::vector<double>& v) {
    std::vector<signed char> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = std::tanh(v[i]) < 0.0 ? -1 : 1;
    return out;
}

namespace {

void write_config(std::ostream& os, const ModelConfig& cfg) {
    using binio::write_le;
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.k));
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.image_c));
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.image_h));
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.image_w));
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.backbone_channels.size()));
    for (int c : cfg.backbone_channels) write_le<std::uint32_t>(os, c);
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.local_dim));
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.global_dim));
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.d_prime));
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.deconv.size()));
    for (const DeconvRow& r : cfg.deconv) {
        write_le<std::uint32_t>(os, r.in_ch);
        write_le<std::uint32_t>(os, r.kh);
        write_le<std::uint32_t>(os, r.kw);
        write_le<std::uint32_t>(os, r.out_ch);
        write_le<std::uint32_t>(os, r.stride);
        write_le<std::uint32_t>(os, r.pad);
    }
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.variant));
    write_le<std::uint64_t>(os, cfg.seed);
}

ModelConfig read_config(std::istream& is) {
    using binio::read_le;
    ModelConfig cfg;
    cfg.k = read_le<std::uint32_t>(is);
    cfg.image_c = read_le<std::uint32_t>(is);
    cfg.image_h = read_le<std::uint32_t>(is);
    cfg.image_w = read_le<std::uint32_t>(is);
    cfg.backbone_channels.resize(read_le<std::uint32_t>(is));
    for (int& c : cfg.backbone_channels) c = read_le<std::uint32_t>(is);
    cfg.local_dim = read_le<std::uint32_t>(is);
    cfg.global_dim = read_le<std::uint32_t>(is);
    cfg.d_prime = read_le<std::uint32_t>(is);
    cfg.deconv.resize(read_le<std::uint32_t>(is));
    for (DeconvRow& r : cfg.deconv) {
        r.in_ch = read_le<std::uint32_t>(is);
        r.kh = read_le<std::uint32_t>(is);
        r.kw = read_le<std::uint32_t>(is);
        r.out_ch = read_le<std::uint32_t>(is);
        r.stride = read_le<std::uint32_t>(is);
        r.pad = read_le<std::uint32_t>(is);
    }
    cfg.variant = static_cast<Variant>(read_le<std::uint32_t>(is));
    cfg.seed = read_le<std::uint64_t>(is);
    return cfg;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
    auto out = binio::open_out(path);
    binio::write_magic(out, kCheckpointMagic);
    binio::write_le<std::uint32_t>(out, kCheckpointVersion);
    write_config(out, params.config);
    auto& mut = const_cast<ModelParams&>(params);
    for (auto& [name, t] : mut.named()) {
        binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t->rank()));
        for (int e : t->shape) binio::write_le<std::uint32_t>(out, e);
        binio::write_f64s(out, t->data);
    }
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
    auto in = binio::open_in(path);
    binio::expect_magic(in, kCheckpointMagic, "checkpoint");
    const auto version = binio::read_le<std::uint32_t>(in);
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version " +
                                 std::to_string(version));
    const ModelConfig cfg = read_config(in);
    ModelParams params = ModelParams::init(cfg);
    for (auto& [name, t] : params.named()) {
        const auto len = binio::read_le<std::uint32_t>(in);
        std::string got(len, '\0');
        in.read(got.data(), len);
        if (got != name)
            throw std::runtime_error("checkpoint: expected tensor " + name + ", got " +
                                     got);
        const auto rank = binio::read_le<std::uint32_t>(in);
        std::vector<int> shape(rank);
        for (int& e : shape) e = binio::read_le<std::uint32_t>(in);
        if (shape != t->shape)
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        binio::read_f64s(in, t->data);
    }
    return params;
}

}  // namespace a2
