#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>

#include "a2hash/graph.hpp"
#include "a2hash/tensor.hpp"

namespace a2 {

enum class Variant : std::uint32_t { basic = 0, plus_plus = 1 };

struct DeconvRow {
    int in_ch, kh, kw, out_ch, stride, pad;
};

struct ModelConfig {
    int k = 12;                      // hash bits == number of attention maps
    int image_c = 3, image_h = 16, image_w = 16;
    std::vector<int> backbone_channels{8, 16};  // 3x3 stride-2 conv+relu stack
    int local_dim = 4;
    int global_dim = 8;
    int d_prime = 8;
    std::vector<DeconvRow> deconv;
    Variant variant = Variant::plus_plus;
    std::uint64_t seed = 1;

    int d() const { return k * local_dim + global_dim; }
    int backbone_out_channels() const { return backbone_channels.back(); }
    // Spatial size after the stride-2 stack.
    int feat_h() const;
    int feat_w() const;

    // Throws std::invalid_argument on inconsistency (d' > d, deconv shape
    // arithmetic not landing on the image shape, channel mismatches).
    void validate() const;

    // Small config for square images whose side is a power of two times 4;
    // fills a matching decoder spec.
    static ModelConfig desk_default(int k, int c, int h, int w,
                                    std::uint64_t seed = 1);
};

bool operator==(const ModelConfig& a, const ModelConfig& b);

// All trainable weights of the graph, in fixed declaration order.
struct ModelParams {
    ModelConfig config;
    std::vector<Tensor> backbone_w, backbone_b;
    std::vector<Tensor> att_w, att_b;      // k heads, 1x1 conv to one map
    Tensor local_w, local_b;               // shared across attention branches
    Tensor global_w, global_b;
    Tensor W;    // k x d encoder; decoder is its transpose
    Tensor Wp;   // d' x d compressor
    std::vector<Tensor> deconv_w, deconv_b;

    // Kaiming-uniform weights (bound sqrt(6/fan_in)), zero biases,
    // deterministic per config.seed.
    static ModelParams init(const ModelConfig& cfg);

    std::vector<std::pair<std::string, Tensor*>> named();
    std::vector<Tensor*> trainable();
    void zero_grads();
};

// Node ids of the interesting tensors of one forward pass.
struct ForwardNodes {
    int images = -1;      // (N,C,H,W)
    int T = -1;           // backbone activations (N,C',H',W')
    std::vector<int> attention;  // k maps (N,1,H',W')
    int X = -1;           // holistic features (N,d)
    int V = -1;           // W x (N,k)
    int Vp = -1;          // tanh(W x), rows are relaxed codes (N,k)
    int Xp = -1;          // decoded features V' W (N,d)
    int g = -1, gp = -1;  // compressed features (N,d')
    int recon_g = -1, recon_gp = -1;  // decoded images (N,C,H,W)
};

// Builds the network over a batch leaf already inserted in `graph`.
// with_decoder controls the image-reconstruction branch (needed for the
// plus_plus objective only).
ForwardNodes build_forward(Graph& graph, ModelParams& params, int images,
                           bool with_decoder);

// Inference helpers (no gradient bookkeeping).
// Returns the relaxed codes tanh(W F(I)) as an n x k row-major matrix.
std::vector<double> encode_relaxed(ModelParams& params,
                                   const Tensor& images);
// sgn(tanh(v)) with sgn(0) = +1.
std::vector<signed char> binarize(const std::vector<double>& v);

// Checkpoint file: "A2CK", version, config, tensors in declaration order.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace a2
