#pragma once

#include <optional>

#include "a2hash/model.hpp"

namespace a2 {

// Trade-off weights of the combined objective. Defaults follow the paper's
// rules: lambda 1, alpha 1/(n*k), beta 12/k, eta 0.5 for concatenated
// simple/complex data and 0.1 otherwise.
struct LossWeights {
    double lambda = 1.0;
    double alpha = 0.0;
    double beta = 0.0;
    double eta = 0.0;

    static LossWeights defaults(int batch_n, int bits, bool concat_data = false) {
        LossWeights w;
        w.lambda = 1.0;
        w.alpha = 1.0 / (static_cast<double>(batch_n) * bits);
        w.beta = 12.0 / bits;
        w.eta = concat_data ? 0.5 : 0.1;
        return w;
    }
};

// Per-term ablation switches (all on = full model).
struct TermSwitches {
    bool feature_recon = true;
    bool decorrelation = true;
    bool image_g = true;
    bool image_gp = true;

    static TermSwitches vanilla() { return {false, false, false, false}; }
};

// --- Standalone loss evaluations over plain tensors (row convention:
// X is n x d, Vp is n x k, Z is m x k, S is n x m). Sums, not means. ---

// ||X - Vp W||_F^2 + lambda ||X W^T - Vp||_F^2
double feature_recon_loss(const Tensor& X, const Tensor& Vp, const Tensor& W,
                          double lambda);

// ||Vp^T Vp - n I||_F^2 over the k x k bit-correlation matrix.
double decorrelation_loss(const Tensor& Vp, int n);

// sum_ij (q_i . z_j - k S_ij)^2 with relaxed queries and constant codes.
double hash_similarity_loss(const Tensor& Qt, const Tensor& Z, const Tensor& S,
                            int k);

// ||from_g - I||^2 + ||from_gp - I||^2; either branch may be absent for the
// single-branch ablations.
double image_recon_loss(const Tensor& image, const Tensor* from_g,
                        const Tensor* from_gp);

struct LossTerms {
    double recon_decoder = 0.0;  // ||X - W^T V'||^2
    double recon_encoder = 0.0;  // ||W X - V'||^2
    double decorrelation = 0.0;
    double hash = 0.0;
    std::optional<double> image_g;
    std::optional<double> image_gp;
};

// basic: t1 + lambda t2 + alpha t3 + beta t4; plus_plus adds eta (t5 + t6).
// Throws if the variant and the supplied terms disagree.
double total_loss(const LossTerms& t, const LossWeights& w, Variant variant);

// --- Graph route used by training: same objective assembled from autodiff
// primitives so gradients flow to every parameter. ---
struct ObjectiveNodes {
    int recon_decoder = -1, recon_encoder = -1, decorrelation = -1, hash = -1;
    int image_g = -1, image_gp = -1;
    int total = -1;
};

// Z entries must be in {-1,+1} (no gradient), S in {-1,+1}.
ObjectiveNodes build_objective(Graph& graph, const ForwardNodes& fw,
                               const Tensor& Z, const Tensor& S,
                               const LossWeights& weights, Variant variant,
                               const TermSwitches& on = {});

}  // namespace a2
