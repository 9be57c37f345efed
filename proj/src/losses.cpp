#include "a2hash/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace a2 {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

double feature_recon_loss(const Tensor& X, const Tensor& Vp, const Tensor& W,
                          double lambda) {
    require(X.rank() == 2 && Vp.rank() == 2 && W.rank() == 2,
            "feature_recon_loss expects matrices");
    const int n = X.shape[0], d = X.shape[1], k = W.shape[0];
    require(Vp.shape[0] == n && Vp.shape[1] == k && W.shape[1] == d,
            "feature_recon_loss shape mismatch");
    double decoder = 0.0, encoder = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* x = X.data.data() + static_cast<std::size_t>(i) * d;
        const double* v = Vp.data.data() + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < d; ++j) {
            double rec = 0.0;
            for (int b = 0; b < k; ++b) rec += v[b] * W.data[static_cast<std::size_t>(b) * d + j];
            const double e = x[j] - rec;
            decoder += e * e;
        }
        for (int b = 0; b < k; ++b) {
            double wx = 0.0;
            const double* wrow = W.data.data() + static_cast<std::size_t>(b) * d;
            for (int j = 0; j < d; ++j) wx += wrow[j] * x[j];
            const double e = wx - v[b];
            encoder += e * e;
        }
    }
    return decoder + lambda * encoder;
}

double decorrelation_loss(const Tensor& Vp, int n) {
    require(Vp.rank() == 2, "decorrelation_loss expects a matrix");
    require(Vp.shape[0] == n, "decorrelation_loss: V' must have n rows (items)");
    const int k = Vp.shape[1];
    double loss = 0.0;
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) {
            double dot = 0.0;
            for (int i = 0; i < n; ++i)
                dot += Vp.data[static_cast<std::size_t>(i) * k + a] *
                       Vp.data[static_cast<std::size_t>(i) * k + b];
            const double e = dot - (a == b ? static_cast<double>(n) : 0.0);
            loss += e * e;
        }
    return loss;
}

double hash_similarity_loss(const Tensor& Qt, const Tensor& Z, const Tensor& S,
                            int k) {
    require(Qt.rank() == 2 && Z.rank() == 2 && S.rank() == 2,
            "hash_similarity_loss expects matrices");
    const int n = Qt.shape[0], m = Z.shape[0];
    require(Qt.shape[1] == k && Z.shape[1] == k, "hash_similarity_loss: bad k");
    require(S.shape[0] == n && S.shape[1] == m, "hash_similarity_loss: bad S shape");
    for (double s : S.data)
        require(s == 1.0 || s == -1.0, "similarity entries must be +/-1");
    double loss = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            double dot = 0.0;
            for (int b = 0; b < k; ++b)
                dot += Qt.data[static_cast<std::size_t>(i) * k + b] *
                       Z.data[static_cast<std::size_t>(j) * k + b];
            const double e = dot - k * S.data[static_cast<std::size_t>(i) * m + j];
            loss += e * e;
        }
    return loss;
}

double image_recon_loss(const Tensor& image, const Tensor* from_g,
                        const Tensor* from_gp) {
    double loss = 0.0;
    for (const Tensor* rec : {from_g, from_gp}) {
        if (!rec) continue;
        require(rec->same_shape(image), "image_recon_loss shape mismatch");
        for (std::size_t i = 0; i < image.data.size(); ++i) {
            const double e = rec->data[i] - image.data[i];
            loss += e * e;
        }
    }
    return loss;
}

double total_loss(const LossTerms& t, const LossWeights& w, Variant variant) {
    double loss = t.recon_decoder + w.lambda * t.recon_encoder +
                  w.alpha * t.decorrelation + w.beta * t.hash;
    if (variant == Variant::plus_plus) {
        if (!t.image_g && !t.image_gp)
            throw std::invalid_argument("plus_plus objective without image terms");
        loss += w.eta * (t.image_g.value_or(0.0) + t.image_gp.value_or(0.0));
    } else if (t.image_g || t.image_gp) {
        throw std::invalid_argument("basic objective given image terms");
    }
    return loss;
}

ObjectiveNodes build_objective(Graph& graph, const ForwardNodes& fw,
                               const Tensor& Z, const Tensor& S,
                               const LossWeights& weights, Variant variant,
                               const TermSwitches& on) {
    const int n = graph.value(fw.X).shape[0];
    const int k = graph.value(fw.Vp).shape[1];
    for (double z : Z.data)
        if (z != 1.0 && z != -1.0)
            throw std::invalid_argument("database codes must be +/-1");

    ObjectiveNodes obj;
    std::vector<int> weighted;

    if (on.feature_recon) {
        obj.recon_decoder = graph.frobenius_sq(graph.sub(fw.X, fw.Xp));
        obj.recon_encoder = graph.frobenius_sq(graph.sub(fw.V, fw.Vp));
        weighted.push_back(obj.recon_decoder);
        weighted.push_back(graph.scale(obj.recon_encoder, weights.lambda));
    }
    if (on.decorrelation) {
        const int corr = graph.matmul(fw.Vp, fw.Vp, true, false);
        const int target = graph.constant(Tensor::scaled_identity(k, n));
        obj.decorrelation = graph.frobenius_sq(graph.sub(corr, target));
        weighted.push_back(graph.scale(obj.decorrelation, weights.alpha));
    }
    {
        Tensor zc = Z;
        zc.requires_grad = false;
        const int zn = graph.constant(std::move(zc));
        Tensor ks = S;
        for (double& s : ks.data) s *= k;
        const int target = graph.constant(std::move(ks));
        const int inner = graph.matmul(fw.Vp, zn, false, true);
        obj.hash = graph.frobenius_sq(graph.sub(inner, target));
        weighted.push_back(graph.scale(obj.hash, weights.beta));
    }
    if (variant == Variant::plus_plus && (on.image_g || on.image_gp)) {
        if (fw.recon_g < 0)
            throw std::invalid_argument("objective needs a decoder forward pass");
        if (on.image_g) {
            obj.image_g = graph.frobenius_sq(graph.sub(fw.recon_g, fw.images));
            weighted.push_back(graph.scale(obj.image_g, weights.eta));
        }
        if (on.image_gp) {
            obj.image_gp = graph.frobenius_sq(graph.sub(fw.recon_gp, fw.images));
            weighted.push_back(graph.scale(obj.image_gp, weights.eta));
        }
    }

    int total = weighted.front();
    for (std::size_t i = 1; i < weighted.size(); ++i)
        total = graph.add(total, weighted[i]);
    obj.total = total;
    return obj;
}

}  // namespace a2
