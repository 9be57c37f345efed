#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace a2::binio {

// Fixed-width little-endian scalar I/O. Byte-swaps on big-endian hosts so
// the on-disk formats stay portable.

namespace detail {
constexpr bool host_little() {
    return std::endian::native == std::endian::little;
}
template <typename T>
T bswap(T v) {
    unsigned char* p = reinterpret_cast<unsigned char*>(&v);
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
        std::swap(p[i], p[sizeof(T) - 1 - i]);
    return v;
}
}  // namespace detail

template <typename T>
void write_le(std::ostream& out, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    if constexpr (sizeof(T) > 1)
        if (!detail::host_little()) v = detail::bswap(v);
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("truncated file");
    if constexpr (sizeof(T) > 1)
        if (!detail::host_little()) v = detail::bswap(v);
    return v;
}

inline void write_f64s(std::ostream& out, const std::vector<double>& v) {
    for (double x : v) write_le(out, x);
}

inline void read_f64s(std::istream& in, std::vector<double>& v) {
    for (double& x : v) x = read_le<double>(in);
}

inline void write_magic(std::ostream& out, const char (&magic)[5]) {
    out.write(magic, 4);
}

inline void expect_magic(std::istream& in, const char (&magic)[5],
                         const std::string& what) {
    char buf[4];
    in.read(buf, 4);
    if (!in || std::memcmp(buf, magic, 4) != 0)
        throw std::runtime_error(what + ": bad magic");
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    return in;
}

}  // namespace a2::binio
