// Timing comparison of the OpenMP kernels against their serial references.
//
// Prints one CSV row per workload: name, serial seconds, parallel seconds,
// speedup, and a throughput column (codes/s for the Hamming scan, values/s
// for the convolutions). Both variants are checked for matching output
// before timing, so a regression in the parallel path shows up here too.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <vector>

#include "a2hash/hash_index.hpp"
#include "a2hash/kernels.hpp"
#include "a2hash/tensor.hpp"

namespace {

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point start) {
    return std::chrono::duration<double>(clock_type::now() - start).count();
}

a2::Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng) {
    a2::Tensor t(std::move(shape));
    for (double& v : t.data) v = a2::next_uniform(rng, -1.0, 1.0);
    return t;
}

// The reference kernels accumulate in a different loop order than the
// parallel ones, so allow rounding noise when comparing them.
bool same_data(const a2::Tensor& a, const a2::Tensor& b) {
    if (a.shape != b.shape) return false;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        if (std::abs(a.data[i] - b.data[i]) > 1e-9) return false;
    return true;
}

void bench_conv(int n, int cin, int hw, int cout, std::mt19937_64& rng) {
    const int kern = 3, stride = 2, pad = 1;
    a2::Tensor x = random_tensor({n, cin, hw, hw}, rng);
    a2::Tensor w = random_tensor({cout, cin, kern, kern}, rng);
    a2::Tensor b = random_tensor({cout}, rng);
    const int out = a2::conv_out(hw, kern, stride, pad);
    a2::Tensor y_ref({n, cout, out, out});
    a2::Tensor y_omp({n, cout, out, out});

    a2::kernels::ref::conv2d_forward(x, w, b, y_ref, stride, pad);
    a2::kernels::conv2d_forward(x, w, b, y_omp, stride, pad);
    if (!same_data(y_ref, y_omp)) {
        std::printf("conv2d %dx%dx%d,MISMATCH,,,\n", n, cin, hw);
        return;
    }

    const int reps = 20;
    auto t0 = clock_type::now();
    for (int r = 0; r < reps; ++r)
        a2::kernels::ref::conv2d_forward(x, w, b, y_ref, stride, pad);
    const double serial = seconds_since(t0) / reps;
    t0 = clock_type::now();
    for (int r = 0; r < reps; ++r)
        a2::kernels::conv2d_forward(x, w, b, y_omp, stride, pad);
    const double parallel = seconds_since(t0) / reps;

    const double values = static_cast<double>(y_ref.numel());
    std::printf("conv2d n=%d c=%d->%d s=%d,%.6f,%.6f,%.2f,%.3e\n", n, cin,
                cout, hw, serial, parallel, serial / parallel,
                values / parallel);
}

void bench_tconv(int n, int cin, int hw, int cout, std::mt19937_64& rng) {
    const int kern = 4, stride = 2, pad = 1;
    a2::Tensor x = random_tensor({n, cin, hw, hw}, rng);
    a2::Tensor w = random_tensor({cin, cout, kern, kern}, rng);
    a2::Tensor b = random_tensor({cout}, rng);
    const int out = a2::tconv_out(hw, kern, stride, pad);
    a2::Tensor y_ref({n, cout, out, out});
    a2::Tensor y_omp({n, cout, out, out});

    a2::kernels::ref::tconv2d_forward(x, w, b, y_ref, stride, pad);
    a2::kernels::tconv2d_forward(x, w, b, y_omp, stride, pad);
    if (!same_data(y_ref, y_omp)) {
        std::printf("tconv2d %dx%dx%d,MISMATCH,,,\n", n, cin, hw);
        return;
    }

    const int reps = 20;
    auto t0 = clock_type::now();
    for (int r = 0; r < reps; ++r)
        a2::kernels::ref::tconv2d_forward(x, w, b, y_ref, stride, pad);
    const double serial = seconds_since(t0) / reps;
    t0 = clock_type::now();
    for (int r = 0; r < reps; ++r)
        a2::kernels::tconv2d_forward(x, w, b, y_omp, stride, pad);
    const double parallel = seconds_since(t0) / reps;

    const double values = static_cast<double>(y_ref.numel());
    std::printf("tconv2d n=%d c=%d->%d s=%d,%.6f,%.6f,%.2f,%.3e\n", n, cin,
                cout, hw, serial, parallel, serial / parallel,
                values / parallel);
}

void bench_scan(int k, std::size_t m, int queries, std::mt19937_64& rng) {
    std::vector<signed char> codes(m * static_cast<std::size_t>(k));
    for (signed char& c : codes) c = (rng() & 1) ? 1 : -1;
    std::vector<std::uint64_t> ids(m);
    for (std::size_t i = 0; i < m; ++i) ids[i] = i;
    a2::HashIndex index = a2::build_index(k, codes, ids);

    std::vector<a2::PackedCode> qs;
    for (int q = 0; q < queries; ++q) {
        std::vector<signed char> code(k);
        for (signed char& c : code) c = (rng() & 1) ? 1 : -1;
        qs.push_back(a2::pack(code));
    }

    for (const a2::PackedCode& q : qs) {
        const auto a = index.search_topk(q, 10);
        const auto b = index.search_topk_serial(q, 10);
        bool same = a.size() == b.size();
        for (std::size_t i = 0; same && i < a.size(); ++i)
            same = a[i].id == b[i].id && a[i].distance == b[i].distance;
        if (!same) {
            std::printf("hamming_scan k=%d m=%zu,MISMATCH,,,\n", k, m);
            return;
        }
    }

    auto t0 = clock_type::now();
    for (const a2::PackedCode& q : qs) index.search_topk_serial(q, 10);
    const double serial = seconds_since(t0) / queries;
    t0 = clock_type::now();
    for (const a2::PackedCode& q : qs) index.search_topk(q, 10);
    const double parallel = seconds_since(t0) / queries;

    std::printf("hamming_scan k=%d m=%zu,%.6f,%.6f,%.2f,%.3e\n", k, m, serial,
                parallel, serial / parallel,
                static_cast<double>(m) / parallel);
}

}  // namespace

int main() {
    std::mt19937_64 rng(7);
    std::printf("workload,serial_s,parallel_s,speedup,throughput_per_s\n");
    bench_conv(32, 8, 32, 16, rng);
    bench_conv(32, 16, 16, 32, rng);
    bench_tconv(32, 16, 8, 8, rng);
    bench_tconv(32, 8, 16, 3, rng);
    bench_scan(48, 200000, 20, rng);
    bench_scan(64, 200000, 20, rng);
    bench_scan(128, 100000, 20, rng);
    return 0;
}
