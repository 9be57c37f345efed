#include "a2hash/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <stdexcept>

#include "a2hash/binio.hpp"
#include "a2hash/graph.hpp"
#include "a2hash/model.hpp"

namespace a2 {

namespace {
constexpr char kBlobMagic[5] = "A2DS";
constexpr std::uint32_t kBlobVersion = 1;
namespace fs = std::filesystem;
}  // namespace

void DatasetManifest::validate() const {
    const std::size_t n = labels.size();
    if (images.size() != n * pixels_per_item())
        throw std::runtime_error("manifest: image blob size mismatch");
    if (splits.size() != n) throw std::runtime_error("manifest: split tags mismatch");
    if (!attributes.empty() && attributes.size() != n)
        throw std::runtime_error("manifest: attribute count mismatch");
    for (std::uint32_t l : labels)
        if (l >= class_count)
            throw std::runtime_error("manifest: label id beyond class table");
    for (Split s : splits)
        if (static_cast<int>(s) > 2)
            throw std::runtime_error("manifest: invalid split tag");
    if (concat_boundary > static_cast<std::uint32_t>(h))
        throw std::runtime_error("manifest: concat boundary beyond image height");
}

std::vector<std::size_t> DatasetManifest::items_with_split(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < splits.size(); ++i)
        if (splits[i] == s) out.push_back(i);
    return out;
}

Tensor DatasetManifest::batch(std::span<const std::size_t> items) const {
    const std::size_t px = pixels_per_item();
    Tensor t({static_cast<int>(items.size()), c, h, w});
    for (std::size_t i = 0; i < items.size(); ++i) {
        const float* src = images.data() + items[i] * px;
        double* dst = t.data.data() + i * px;
        for (std::size_t p = 0; p < px; ++p) dst[p] = static_cast<double>(src[p]);
    }
    return t;
}

void save_manifest(const DatasetManifest& m, const std::string& dir) {
    m.validate();
    fs::create_directories(dir);
    {
        auto out = binio::open_out((fs::path(dir) / "images.bin").string());
        binio::write_magic(out, kBlobMagic);
        binio::write_le<std::uint32_t>(out, kBlobVersion);
        binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.size()));
        binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.c));
        binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.h));
        binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.w));
        for (float v : m.images) binio::write_le<float>(out, v);
    }
    {
        auto out = binio::open_out((fs::path(dir) / "labels.bin").string());
        for (std::uint32_t l : m.labels) binio::write_le<std::uint32_t>(out, l);
    }
    {
        auto out = binio::open_out((fs::path(dir) / "splits.bin").string());
        for (Split s : m.splits)
            binio::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(s));
    }
    {
        auto out = binio::open_out((fs::path(dir) / "meta.bin").string());
        binio::write_le<std::uint32_t>(out, m.class_count);
        binio::write_le<std::uint32_t>(out, m.concat_boundary);
    }
    const fs::path attr_path = fs::path(dir) / "attributes.bin";
    if (!m.attributes.empty()) {
        auto out = binio::open_out(attr_path.string());
        binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.size()));
        for (const auto& set : m.attributes) {
            binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.size()));
            for (std::uint32_t a : set) binio::write_le<std::uint32_t>(out, a);
        }
    } else {
        fs::remove(attr_path);
    }
}

DatasetManifest load_manifest(const std::string& dir) {
    DatasetManifest m;
    std::uint32_t count = 0;
    {
        auto in = binio::open_in((fs::path(dir) / "images.bin").string());
        binio::expect_magic(in, kBlobMagic, "dataset blob");
        const auto version = binio::read_le<std::uint32_t>(in);
        if (version != kBlobVersion)
            throw std::runtime_error("dataset blob: unsupported version");
        count = binio::read_le<std::uint32_t>(in);
        m.c = static_cast<int>(binio::read_le<std::uint32_t>(in));
        m.h = static_cast<int>(binio::read_le<std::uint32_t>(in));
        m.w = static_cast<int>(binio::read_le<std::uint32_t>(in));
        m.images.resize(static_cast<std::size_t>(count) * m.pixels_per_item());
        for (float& v : m.images) v = binio::read_le<float>(in);
    }
    {
        auto in = binio::open_in((fs::path(dir) / "labels.bin").string());
        m.labels.resize(count);
        for (std::uint32_t& l : m.labels) l = binio::read_le<std::uint32_t>(in);
    }
    {
        auto in = binio::open_in((fs::path(dir) / "splits.bin").string());
        m.splits.resize(count);
        for (Split& s : m.splits)
            s = static_cast<Split>(binio::read_le<std::uint8_t>(in));
    }
    {
        auto in = binio::open_in((fs::path(dir) / "meta.bin").string());
        m.class_count = binio::read_le<std::uint32_t>(in);
        m.concat_boundary = binio::read_le<std::uint32_t>(in);
    }
    const fs::path attr_path = fs::path(dir) / "attributes.bin";
    if (fs::exists(attr_path)) {
        auto in = binio::open_in(attr_path.string());
        const auto n = binio::read_le<std::uint32_t>(in);
        if (n != count) throw std::runtime_error("attributes: item count mismatch");
        m.attributes.resize(n);
        for (auto& set : m.attributes) {
            set.resize(binio::read_le<std::uint32_t>(in));
            for (std::uint32_t& a : set) a = binio::read_le<std::uint32_t>(in);
        }
    }
    m.validate();
    return m;
}

namespace {

// Deterministic per-attribute blob geometry and color.
struct AttrPattern {
    double cy, cx, radius;
    double color[3];
};

// Difficulty shrinks the blob radius and washes the palette out toward a
// shared gray: easy classes are broad washes of distinctive color that
// survive aggressive pooling, hard ones are small, near-monochrome marks
// whose location and extent carry the class.
AttrPattern attr_pattern(std::uint32_t attr, int h, int w, double difficulty) {
    std::mt19937_64 rng(0x9e3779b97f4a7c15ull ^ (static_cast<std::uint64_t>(attr) * 0x100000001b3ull));
    AttrPattern p{};
    p.cy = next_uniform(rng, 0.18, 0.82) * h;
    p.cx = next_uniform(rng, 0.18, 0.82) * w;
    const double shrink = 1.0 - 0.65 * difficulty;
    p.radius = next_uniform(rng, 0.22, 0.40) * shrink * std::min(h, w);
    const double wash = 0.8 * difficulty;
    for (double& c : p.color)
        c = (1.0 - wash) * next_uniform(rng, 0.05, 0.95) + wash * 0.5;
    return p;
}

}  // namespace

DatasetManifest make_synthetic(int classes, int per_class, int c, int h, int w,
                               double difficulty, std::uint64_t seed) {
    if (classes < 2) throw std::invalid_argument("make_synthetic: need >= 2 classes");
    if (c < 1 || h < 4 || w < 4)
        throw std::invalid_argument("make_synthetic: degenerate shape");
    difficulty = std::clamp(difficulty, 0.0, 1.0);

    DatasetManifest m;
    m.c = c;
    m.h = h;
    m.w = w;
    m.class_count = static_cast<std::uint32_t>(classes);
    const int pool = std::max(2, classes / 2);
    const double contrast = 0.9 - 0.45 * difficulty;
    const double noise = 0.02 + 0.05 * difficulty;
    const int query_per_class = per_class / 6;

    std::mt19937_64 rng(seed);
    for (int cls = 0; cls < classes; ++cls) {
        std::vector<std::uint32_t> attrs{
            static_cast<std::uint32_t>(cls),
            static_cast<std::uint32_t>(classes + cls % pool),
            static_cast<std::uint32_t>(classes + pool + (cls + 1) % pool)};
        for (int item = 0; item < per_class; ++item) {
            std::vector<float> img(m.pixels_per_item());
            for (int ch = 0; ch < c; ++ch)
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x) {
                        const double bg = 0.35 +
                                          0.15 * std::sin((y + 2.0 * ch) * 0.5) *
                                              std::cos(x * 0.4);
                        img[(static_cast<std::size_t>(ch) * h + y) * w + x] =
                            static_cast<float>(bg + next_uniform(rng, -noise, noise));
                    }
            const double jy = next_uniform(rng, -1.0, 1.0);
            const double jx = next_uniform(rng, -1.0, 1.0);
            for (std::uint32_t a : attrs) {
                const AttrPattern p = attr_pattern(a, h, w, difficulty);
                for (int ch = 0; ch < c; ++ch)
                    for (int y = 0; y < h; ++y)
                        for (int x = 0; x < w; ++x) {
                            const double dy = y - (p.cy + jy);
                            const double dx = x - (p.cx + jx);
                            const double mask =
                                contrast *
                                std::exp(-(dy * dy + dx * dx) / (p.radius * p.radius));
                            float& px = img[(static_cast<std::size_t>(ch) * h + y) * w + x];
                            px = static_cast<float>((1.0 - mask) * px +
                                                    mask * p.color[ch % 3]);
                        }
            }
            for (float& v : img) v = std::clamp(v, 0.0f, 1.0f);
            m.images.insert(m.images.end(), img.begin(), img.end());
            m.labels.push_back(static_cast<std::uint32_t>(cls));
            m.attributes.push_back(attrs);
            m.splits.push_back(item < query_per_class ? Split::query
                                                      : Split::database);
        }
    }
    m.validate();
    return m;
}

namespace {

// Nearest-neighbor width resize of one CHW image.
std::vector<float> resize_width(const float* src, int c, int h, int w_in,
                                int w_out) {
    std::vector<float> out(static_cast<std::size_t>(c) * h * w_out);
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w_out; ++x) {
                const int sx = std::min(w_in - 1, x * w_in / w_out);
                out[(static_cast<std::size_t>(ch) * h + y) * w_out + x] =
                    src[(static_cast<std::size_t>(ch) * h + y) * w_in + sx];
            }
    return out;
}

}  // namespace

DatasetManifest make_concat_dataset(const ConcatSpec& spec, std::uint64_t seed) {
    const DatasetManifest& s = *spec.simple;
    const DatasetManifest& x = *spec.complex_part;
    if (s.class_count != x.class_count)
        throw std::invalid_argument("concat: class counts differ");
    if (s.c != x.c) throw std::invalid_argument("concat: channel counts differ");

    DatasetManifest m;
    m.c = x.c;
    m.w = x.w;
    m.h = s.h + x.h;
    m.class_count = s.class_count;
    m.concat_boundary = static_cast<std::uint32_t>(s.h);

    const std::uint32_t attr_offset =
        s.attributes.empty() ? 0 : [&] {
            std::uint32_t mx = 0;
            for (const auto& set : s.attributes)
                for (std::uint32_t a : set) mx = std::max(mx, a + 1);
            return mx;
        }();

    std::mt19937_64 rng(seed);
    auto shuffled = [&](std::vector<std::size_t> v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[rng() % i]);
        return v;
    };

    const std::size_t spx = s.pixels_per_item();
    const std::size_t xpx = x.pixels_per_item();
    for (std::uint32_t cls = 0; cls < m.class_count; ++cls) {
        for (Split split : {Split::train, Split::database, Split::query}) {
            std::vector<std::size_t> si, xi;
            for (std::size_t i = 0; i < s.size(); ++i)
                if (s.labels[i] == cls && s.splits[i] == split) si.push_back(i);
            for (std::size_t i = 0; i < x.size(); ++i)
                if (x.labels[i] == cls && x.splits[i] == split) xi.push_back(i);
            si = shuffled(std::move(si));
            xi = shuffled(std::move(xi));
            const std::size_t n = std::min(si.size(), xi.size());
            for (std::size_t p = 0; p < n; ++p) {
                const std::vector<float> top = resize_width(
                    s.images.data() + si[p] * spx, s.c, s.h, s.w, m.w);
                const float* bottom = x.images.data() + xi[p] * xpx;
                for (int ch = 0; ch < m.c; ++ch) {
                    m.images.insert(m.images.end(),
                                    top.begin() + static_cast<std::ptrdiff_t>(ch) * s.h * m.w,
                                    top.begin() + static_cast<std::ptrdiff_t>(ch + 1) * s.h * m.w);
                    m.images.insert(
                        m.images.end(),
                        bottom + static_cast<std::ptrdiff_t>(ch) * x.h * x.w,
                        bottom + static_cast<std::ptrdiff_t>(ch + 1) * x.h * x.w);
                }
                m.labels.push_back(cls);
                m.splits.push_back(split);
                std::vector<std::uint32_t> attrs;
                if (!s.attributes.empty()) attrs = s.attributes[si[p]];
                if (!x.attributes.empty())
                    for (std::uint32_t a : x.attributes[xi[p]])
                        attrs.push_back(a + attr_offset);
                if (!attrs.empty() || !s.attributes.empty() || !x.attributes.empty())
                    m.attributes.push_back(std::move(attrs));
            }
        }
    }
    if (!m.attributes.empty() && m.attributes.size() != m.size())
        m.attributes.clear();
    m.validate();
    return m;
}

DatasetManifest mask_part(const DatasetManifest& m, ConcatPart keep) {
    if (m.concat_boundary == 0)
        throw std::invalid_argument("mask_part: not a concatenated dataset");
    DatasetManifest out = m;
    const int boundary = static_cast<int>(m.concat_boundary);
    const std::size_t px = m.pixels_per_item();
    for (std::size_t i = 0; i < m.size(); ++i) {
        float* img = out.images.data() + i * px;
        for (int ch = 0; ch < m.c; ++ch)
            for (int y = 0; y < m.h; ++y) {
                const bool in_simple = y < boundary;
                const bool zero = keep == ConcatPart::simple ? !in_simple : in_simple;
                if (!zero) continue;
                float* row = img + (static_cast<std::size_t>(ch) * m.h + y) * m.w;
                std::fill(row, row + m.w, 0.0f);
            }
    }
    return out;
}

std::vector<double> activation_heatmap(ModelParams& params, const Tensor& image,
                                       const std::string& out_base) {
    Tensor batch = image;
    if (batch.rank() == 3)
        batch.shape = {1, batch.shape[0], batch.shape[1], batch.shape[2]};
    Graph g;
    const int in = g.constant(batch);
    const ForwardNodes fw = build_forward(g, params, in, false);
    const Tensor& T = g.value(fw.T);
    const int C = T.shape[1], Hf = T.shape[2], Wf = T.shape[3];
    std::vector<double> acc(static_cast<std::size_t>(Hf) * Wf, 0.0);
    for (int c = 0; c < C; ++c)
        for (int p = 0; p < Hf * Wf; ++p)
            acc[p] += std::abs(T.data[static_cast<std::size_t>(c) * Hf * Wf + p]);

    const int H = batch.shape[2], W = batch.shape[3];
    std::vector<double> up(static_cast<std::size_t>(H) * W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            up[static_cast<std::size_t>(y) * W + x] =
                acc[static_cast<std::size_t>(y * Hf / H) * Wf + x * Wf / W];

    double lo = up[0], hi = up[0];
    for (double v : up) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double range = hi - lo;
    for (double& v : up) v = range > 0.0 ? (v - lo) / range : 0.0;

    {
        auto out = binio::open_out(out_base + ".pgm");
        out << "P5\n" << W << " " << H << "\n255\n";
        for (double v : up)
            out.put(static_cast<char>(static_cast<unsigned char>(
                std::lround(v * 255.0))));
        if (!out) throw std::runtime_error("heatmap write failed");
    }
    {
        auto out = binio::open_out(out_base + ".csv");
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                if (x) out << ",";
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.6f", up[static_cast<std::size_t>(y) * W + x]);
                out << buf;
            }
            out << "\n";
        }
        if (!out) throw std::runtime_error("heatmap csv write failed");
    }
    return up;
}

DatasetManifest load_idx(const std::string& images_path,
                         const std::string& labels_path) {
    auto imgs = binio::open_in(images_path);
    auto read_be32 = [](std::istream& in) {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            const int c = in.get();
            if (c < 0) throw std::runtime_error("idx: truncated header");
            v = (v << 8) | static_cast<std::uint32_t>(c);
        }
        return v;
    };
    if (read_be32(imgs) != 0x00000803)
        throw std::runtime_error("idx: bad image magic");
    const std::uint32_t n = read_be32(imgs);
    const int h = static_cast<int>(read_be32(imgs));
    const int w = static_cast<int>(read_be32(imgs));

    DatasetManifest m;
    m.c = 1;
    m.h = h;
    m.w = w;
    m.images.resize(static_cast<std::size_t>(n) * h * w);
    std::vector<char> buf(static_cast<std::size_t>(h) * w);
    for (std::uint32_t i = 0; i < n; ++i) {
        imgs.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!imgs) throw std::runtime_error("idx: truncated image data");
        for (std::size_t p = 0; p < buf.size(); ++p)
            m.images[static_cast<std::size_t>(i) * buf.size() + p] =
                static_cast<float>(static_cast<unsigned char>(buf[p])) / 255.0f;
    }

    auto labs = binio::open_in(labels_path);
    if (read_be32(labs) != 0x00000801)
        throw std::runtime_error("idx: bad label magic");
    if (read_be32(labs) != n) throw std::runtime_error("idx: label count mismatch");
    m.labels.resize(n);
    std::uint32_t max_label = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
        const int c = labs.get();
        if (c < 0) throw std::runtime_error("idx: truncated labels");
        m.labels[i] = static_cast<std::uint32_t>(c);
        max_label = std::max(max_label, m.labels[i]);
    }
    m.class_count = max_label + 1;
    m.splits.assign(n, Split::database);
    m.validate();
    return m;
}

DatasetManifest load_cifar_batch(const std::string& path) {
    auto in = binio::open_in(path);
    constexpr std::size_t record = 1 + 3 * 32 * 32;
    DatasetManifest m;
    m.c = 3;
    m.h = 32;
    m.w = 32;
    std::vector<char> buf(record);
    std::uint32_t max_label = 0;
    while (in.read(buf.data(), static_cast<std::streamsize>(record))) {
        m.labels.push_back(static_cast<unsigned char>(buf[0]));
        max_label = std::max(max_label, m.labels.back());
        for (std::size_t p = 1; p < record; ++p)
            m.images.push_back(
                static_cast<float>(static_cast<unsigned char>(buf[p])) / 255.0f);
    }
    if (m.labels.empty()) throw std::runtime_error("cifar batch: no records");
    m.class_count = max_label + 1;
    m.splits.assign(m.labels.size(), Split::database);
    m.validate();
    return m;
}

}  // namespace a2
