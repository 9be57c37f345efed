#pragma once

#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace a2 {

// Dense row-major tensor of 64-bit reals. Gradient storage is attached
// lazily by the graph; `grad` is empty unless requires_grad is set and a
// backward pass has run.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;

    Tensor() = default;

    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        data.assign(numel(), 0.0);
    }

    Tensor(std::vector<int> s, std::vector<double> d)
        : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<std::int64_t>(data.size()) != numel())
            throw std::invalid_argument("tensor data length does not match shape");
    }

    std::int64_t numel() const {
        std::int64_t n = 1;
        for (int e : shape) {
            if (e <= 0) throw std::invalid_argument("non-positive tensor extent");
            n *= e;
        }
        return n;
    }

    int rank() const { return static_cast<int>(shape.size()); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    void zero_grad() {
        if (requires_grad) grad.assign(data.size(), 0.0);
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }

    static Tensor full(std::vector<int> s, double v) {
        Tensor t(std::move(s));
        std::fill(t.data.begin(), t.data.end(), v);
        return t;
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    // k-by-k identity scaled by c.
    static Tensor scaled_identity(int k, double c) {
        Tensor t({k, k});
        for (int i = 0; i < k; ++i) t.data[static_cast<std::size_t>(i) * k + i] = c;
        return t;
    }
};

inline std::string shape_str(const std::vector<int>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

// Deterministic uniform double in [0,1), independent of libstdc++
// distribution internals.
inline double next_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double next_uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * next_uniform(rng);
}

}  // namespace a2
