#include <cmath>
#include <random>

#include "a2hash/hash_index.hpp"
#include "a2hash/losses.hpp"
#include "doctest.h"

using namespace a2;

namespace {

Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng,
                     double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = next_uniform(rng, lo, hi);
    t.requires_grad = true;
    return t;
}

double gradcheck(const std::function<int(Graph&, std::vector<int>&)>& build,
                 std::vector<Tensor>& params, double eps = 1e-5) {
    auto eval = [&]() {
        Graph g;
        std::vector<int> leaves;
        for (Tensor& p : params) leaves.push_back(g.leaf(p));
        return g.value(build(g, leaves)).data[0];
    };
    Graph g;
    std::vector<int> leaves;
    for (Tensor& p : params) {
        p.zero_grad();
        leaves.push_back(g.leaf(p));
    }
    g.backward(build(g, leaves));
    std::vector<Tensor*> ptrs;
    std::vector<std::vector<double>> analytic;
    for (Tensor& p : params) {
        ptrs.push_back(&p);
        analytic.push_back(p.grad);
    }
    return finite_diff_check(eval, ptrs, analytic, eps);
}

Tensor sign_tensor(std::vector<int> shape, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = next_uniform(rng) < 0.5 ? -1.0 : 1.0;
    return t;
}

}  // namespace

TEST_CASE("feature_recon_loss: pinned values") {
    {
        // zero fixed point with W = I
        Tensor X({2, 2}), Vp({2, 2});
        Tensor W = Tensor::scaled_identity(2, 1.0);
        CHECK(feature_recon_loss(X, Vp, W, 1.0) == 0.0);
    }
    {
        // scalar case: both residuals are (1 - tanh 1)
        Tensor X({1, 1}, {1.0}), W({1, 1}, {1.0});
        Tensor Vp({1, 1}, {std::tanh(1.0)});
        const double r = 1.0 - std::tanh(1.0);
        CHECK(feature_recon_loss(X, Vp, W, 1.0) ==
              doctest::Approx(2.0 * r * r).epsilon(1e-12));
        CHECK(feature_recon_loss(X, Vp, W, 1.0) == doctest::Approx(0.113665).epsilon(1e-5));
    }
}

TEST_CASE("feature_recon_loss is affine in lambda") {
    std::mt19937_64 rng(31);
    Tensor X = random_tensor({3, 5}, rng);
    Tensor Vp = random_tensor({3, 4}, rng);
    Tensor W = random_tensor({4, 5}, rng);
    const double l0 = feature_recon_loss(X, Vp, W, 0.0);
    const double l1 = feature_recon_loss(X, Vp, W, 1.0);
    const double l7 = feature_recon_loss(X, Vp, W, 7.0);
    CHECK(l7 == doctest::Approx(l0 + 7.0 * (l1 - l0)).epsilon(1e-12));
    CHECK(l0 >= 0.0);
    CHECK(l1 - l0 >= 0.0);  // encoder term alone
}

TEST_CASE("feature_recon_loss rejects inconsistent shapes") {
    Tensor X({2, 3}), Vp({2, 2}), W({2, 4});
    CHECK_THROWS_AS(feature_recon_loss(X, Vp, W, 1.0), std::invalid_argument);
}

TEST_CASE("decorrelation_loss: pinned values") {
    {
        Tensor Vp({2, 2}, {1, 1, 1, -1});  // orthogonal bits with squared norm n
        CHECK(decorrelation_loss(Vp, 2) == 0.0);
    }
    {
        Tensor Vp({2, 2}, {1, 1, 1, 1});
        CHECK(decorrelation_loss(Vp, 2) == doctest::Approx(8.0).epsilon(1e-12));
    }
    {
        Tensor Vp({2, 2});  // all zero: ||n I||^2 = k n^2
        CHECK(decorrelation_loss(Vp, 2) == doctest::Approx(8.0).epsilon(1e-12));
    }
    {
        Tensor Vp({3, 4});
        CHECK(decorrelation_loss(Vp, 3) == doctest::Approx(4 * 9.0).epsilon(1e-12));
    }
}

TEST_CASE("decorrelation_loss is invariant under bit permutation") {
    std::mt19937_64 rng(5);
    const int n = 5, k = 4;
    Tensor Vp = random_tensor({n, k}, rng);
    Tensor perm({n, k});
    const int order[k] = {2, 0, 3, 1};
    for (int i = 0; i < n; ++i)
        for (int b = 0; b < k; ++b)
            perm.data[i * k + b] = Vp.data[i * k + order[b]];
    CHECK(decorrelation_loss(perm, n) ==
          doctest::Approx(decorrelation_loss(Vp, n)).epsilon(1e-12));
}

TEST_CASE("hash_similarity_loss: pinned values") {
    Tensor S1({1, 1}, {1.0}), Sm({1, 1}, {-1.0});
    {
        Tensor q({1, 4}, {1, 1, 1, 1}), z({1, 4}, {1, 1, 1, 1});
        CHECK(hash_similarity_loss(q, z, S1, 4) == 0.0);
    }
    {
        Tensor q({1, 4}, {1, 1, 1, 1}), z({1, 4}, {-1, -1, -1, -1});
        CHECK(hash_similarity_loss(q, z, Sm, 4) == 0.0);
    }
    {
        Tensor q({1, 4}, {1, 1, 1, 1}), z({1, 4}, {1, 1, 1, -1});
        CHECK(hash_similarity_loss(q, z, S1, 4) == doctest::Approx(4.0).epsilon(1e-12));
    }
}

TEST_CASE("hash_similarity_loss validates its inputs") {
    Tensor q({1, 4}), z({1, 4}, {1, 1, 1, 1});
    Tensor Sbad({1, 1}, {0.5});
    CHECK_THROWS_AS(hash_similarity_loss(q, z, Sbad, 4), std::invalid_argument);
    Tensor S({1, 2}, {1, 1});  // wrong m
    CHECK_THROWS_AS(hash_similarity_loss(q, z, S, 4), std::invalid_argument);
}

TEST_CASE("binarized hash loss agrees with Hamming distance: u.z = k - 2 d_H") {
    std::mt19937_64 rng(77);
    const int k = 12;
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor u = sign_tensor({1, k}, rng);
        const Tensor z = sign_tensor({1, k}, rng);
        double dot = 0.0;
        for (int b = 0; b < k; ++b) dot += u.data[b] * z.data[b];
        std::vector<signed char> us(k), zs(k);
        for (int b = 0; b < k; ++b) {
            us[b] = static_cast<signed char>(u.data[b]);
            zs[b] = static_cast<signed char>(z.data[b]);
        }
        const PackedCode pu = pack(us), pz = pack(zs);
        CHECK(dot == doctest::Approx(k - 2.0 * hamming(pu, pz)).epsilon(1e-12));
        // the loss sees exactly that inner product
        Tensor S({1, 1}, {1.0});
        CHECK(hash_similarity_loss(u, z, S, k) ==
              doctest::Approx((dot - k) * (dot - k)).epsilon(1e-12));
    }
}

TEST_CASE("image_recon_loss: pinned values and single-branch forms") {
    Tensor I({1, 3, 2, 2});
    Tensor ones = Tensor::full({1, 3, 2, 2}, 1.0);
    CHECK(image_recon_loss(I, &I, &I) == 0.0);
    CHECK(image_recon_loss(I, &ones, &ones) == doctest::Approx(24.0).epsilon(1e-12));
    CHECK(image_recon_loss(I, &ones, nullptr) == doctest::Approx(12.0).epsilon(1e-12));
    CHECK(image_recon_loss(I, nullptr, &ones) == doctest::Approx(12.0).epsilon(1e-12));
    CHECK(image_recon_loss(I, nullptr, nullptr) == 0.0);
    Tensor bad({1, 3, 2, 3});
    CHECK_THROWS_AS(image_recon_loss(I, &bad, nullptr), std::invalid_argument);
}

TEST_CASE("total_loss: weighted sum and variant checks") {
    LossWeights w;
    w.lambda = 1.0;
    w.alpha = 2.0;
    w.beta = 3.0;
    w.eta = 0.5;
    LossTerms t;
    CHECK(total_loss(t, w, Variant::basic) == 0.0);
    t = {1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
    CHECK(total_loss(t, w, Variant::plus_plus) == doctest::Approx(8.0).epsilon(1e-12));
    CHECK_THROWS_AS(total_loss(t, w, Variant::basic), std::invalid_argument);
    LossTerms no_image{1.0, 1.0, 1.0, 1.0, {}, {}};
    CHECK_THROWS_AS(total_loss(no_image, w, Variant::plus_plus), std::invalid_argument);
    CHECK(total_loss(no_image, w, Variant::basic) == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("default weights follow the n,k rules") {
    const LossWeights w = LossWeights::defaults(16, 12);
    CHECK(w.lambda == 1.0);
    CHECK(w.alpha == doctest::Approx(1.0 / 192.0).epsilon(1e-15));
    CHECK(w.beta == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(w.eta == 0.1);
    CHECK(LossWeights::defaults(16, 12, true).eta == 0.5);
    CHECK(LossWeights::defaults(2, 2).alpha == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(LossWeights::defaults(2, 2).beta == doctest::Approx(6.0).epsilon(1e-15));
}

TEST_CASE("every loss term passes finite differences through the graph") {
    std::mt19937_64 rng(101);
    constexpr double tol = 1e-4;
    const int n = 3, d = 5, k = 4, m = 2;
    for (int trial = 0; trial < 5; ++trial) {
        {
            // feature reconstruction, both terms
            std::vector<Tensor> p{random_tensor({n, d}, rng), random_tensor({n, k}, rng),
                                  random_tensor({k, d}, rng)};
            CHECK(gradcheck([](Graph& g, std::vector<int>& l) {
                      const int dec = g.frobenius_sq(g.sub(l[0], g.matmul(l[1], l[2])));
                      const int enc = g.frobenius_sq(
                          g.sub(g.matmul(l[0], l[2], false, true), l[1]));
                      return g.add(dec, g.scale(enc, 0.7));
                  }, p) < tol);
        }
        {
            // decorrelation
            std::vector<Tensor> p{random_tensor({n, k}, rng)};
            CHECK(gradcheck([&](Graph& g, std::vector<int>& l) {
                      const int corr = g.matmul(l[0], l[0], true, false);
                      const int tgt = g.constant(Tensor::scaled_identity(k, n));
                      return g.frobenius_sq(g.sub(corr, tgt));
                  }, p) < tol);
        }
        {
            // hash similarity; Z and S are constants so only Q gets a gradient
            Tensor Z = sign_tensor({m, k}, rng);
            Tensor kS = sign_tensor({n, m}, rng);
            for (double& s : kS.data) s *= k;
            std::vector<Tensor> p{random_tensor({n, k}, rng)};
            CHECK(gradcheck([&](Graph& g, std::vector<int>& l) {
                      const int inner = g.matmul(l[0], g.constant(Z), false, true);
                      return g.frobenius_sq(g.sub(inner, g.constant(kS)));
                  }, p) < tol);
        }
    }
}

TEST_CASE("graph objective equals the standalone losses on a forward pass") {
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
    cfg.seed = 5;
    ModelParams params = ModelParams::init(cfg);
    std::mt19937_64 rng(13);
    Tensor images({2, cfg.image_c, cfg.image_h, cfg.image_w});
    for (double& v : images.data) v = next_uniform(rng, 0.0, 1.0);
    Tensor Z = sign_tensor({3, cfg.k}, rng);
    Tensor S = sign_tensor({2, 3}, rng);
    const LossWeights w = LossWeights::defaults(2, cfg.k);

    Graph g;
    const ForwardNodes fw = build_forward(g, params, g.constant(images), true);
    const ObjectiveNodes obj = build_objective(g, fw, Z, S, w, Variant::plus_plus, {});

    const Tensor& X = g.value(fw.X);
    const Tensor& Vp = g.value(fw.Vp);
    const double feat = feature_recon_loss(X, Vp, params.W, w.lambda);
    const double graph_feat = g.value(obj.recon_decoder).data[0] +
                              w.lambda * g.value(obj.recon_encoder).data[0];
    CHECK(graph_feat == doctest::Approx(feat).epsilon(1e-10));
    CHECK(g.value(obj.decorrelation).data[0] ==
          doctest::Approx(decorrelation_loss(Vp, 2)).epsilon(1e-10));
    CHECK(g.value(obj.hash).data[0] ==
          doctest::Approx(hash_similarity_loss(Vp, Z, S, cfg.k)).epsilon(1e-10));
    const Tensor& rg = g.value(fw.recon_g);
    const Tensor& rgp = g.value(fw.recon_gp);
    CHECK(g.value(obj.image_g).data[0] + g.value(obj.image_gp).data[0] ==
          doctest::Approx(image_recon_loss(images, &rg, &rgp)).epsilon(1e-10));

    LossTerms t;
    t.recon_decoder = g.value(obj.recon_decoder).data[0];
    t.recon_encoder = g.value(obj.recon_encoder).data[0];
    t.decorrelation = g.value(obj.decorrelation).data[0];
    t.hash = g.value(obj.hash).data[0];
    t.image_g = g.value(obj.image_g).data[0];
    t.image_gp = g.value(obj.image_gp).data[0];
    CHECK(g.value(obj.total).data[0] ==
          doctest::Approx(total_loss(t, w, Variant::plus_plus)).epsilon(1e-10));
}

TEST_CASE("ablation switches drop exactly the disabled terms") {
    ModelConfig cfg;
    cfg.k = 2;
    cfg.image_c = 1;
    cfg.image_h = 8;
    cfg.image_w = 8;
    cfg.backbone_channels = {2};
    cfg.local_dim = 2;
    cfg.global_dim = 2;
    cfg.d_prime = 2;
    cfg.deconv = {{2, 4, 4, 2, 1, 0}, {2, 4, 4, 1, 2, 1}};
    cfg.seed = 2;
    ModelParams params = ModelParams::init(cfg);
    std::mt19937_64 rng(3);
    Tensor images({2, 1, 8, 8});
    for (double& v : images.data) v = next_uniform(rng, 0.0, 1.0);
    Tensor Z = sign_tensor({2, cfg.k}, rng);
    Tensor S = sign_tensor({2, 2}, rng);
    const LossWeights w = LossWeights::defaults(2, cfg.k);

    Graph g;
    const ForwardNodes fw = build_forward(g, params, g.constant(images), true);
    const ObjectiveNodes full = build_objective(g, fw, Z, S, w, Variant::plus_plus, {});
    const ObjectiveNodes vanilla =
        build_objective(g, fw, Z, S, w, Variant::plus_plus, TermSwitches::vanilla());
    CHECK(vanilla.recon_decoder == -1);
    CHECK(vanilla.decorrelation == -1);
    CHECK(vanilla.image_g == -1);
    CHECK(g.value(vanilla.total).data[0] ==
          doctest::Approx(w.beta * g.value(full.hash).data[0]).epsilon(1e-12));

    TermSwitches only_g{false, false, true, false};
    const ObjectiveNodes og = build_objective(g, fw, Z, S, w, Variant::plus_plus, only_g);
    CHECK(og.image_gp == -1);
    CHECK(g.value(og.total).data[0] ==
          doctest::Approx(w.beta * g.value(full.hash).data[0] +
                          w.eta * g.value(full.image_g).data[0]).epsilon(1e-12));
}

TEST_CASE("build_objective rejects non-sign database codes") {
    ModelConfig cfg;
    cfg.k = 2;
    cfg.image_c = 1;
    cfg.image_h = 8;
    cfg.image_w = 8;
    cfg.backbone_channels = {2};
    cfg.local_dim = 2;
    cfg.global_dim = 2;
    cfg.d_prime = 2;
    cfg.deconv = {{2, 4, 4, 2, 1, 0}, {2, 4, 4, 1, 2, 1}};
    cfg.seed = 2;
    ModelParams params = ModelParams::init(cfg);
    Tensor images = Tensor::full({1, 1, 8, 8}, 0.5);
    Graph g;
    const ForwardNodes fw = build_forward(g, params, g.constant(images), false);
    Tensor Zbad({1, 2}, {0.5, 1.0});
    Tensor S({1, 1}, {1.0});
    CHECK_THROWS_AS(build_objective(g, fw, Zbad, S, LossWeights::defaults(1, 2),
                                    Variant::basic, {}),
                    std::invalid_argument);
}
