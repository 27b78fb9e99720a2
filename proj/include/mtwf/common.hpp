#pragma once

#include <charconv>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace mtwf {

// Malformed or out-of-contract input data (CSV parse failures, range
// violations, schema mismatches). CLI maps this to exit code 2.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training divergence (non-finite loss). CLI maps this to exit code 3.
class TrainError : public std::runtime_error {
public:
    explicit TrainError(const std::string& msg) : std::runtime_error(msg) {}
};

// Dense row-major matrix of 64-bit reals. All numeric state in the project
// lives in these or in nn::Tensor.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> v;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}

    double* row(std::size_t i) { return v.data() + i * cols; }
    const double* row(std::size_t i) const { return v.data() + i * cols; }
    double& at(std::size_t i, std::size_t j) { return v[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return v[i * cols + j]; }
    std::size_t size() const { return v.size(); }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

// Shortest decimal string that round-trips the exact double. Used for every
// number we serialize (CSV, metric logs, JSON-adjacent text) so that re-loading
// reproduces bit-identical values and identical runs produce identical bytes.
inline std::string format_double(double x) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    (void)ec;
    return std::string(buf, p);
}

// FNV-1a over raw bytes.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a_doubles(const double* d, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a(d, n * sizeof(double), h);
}

inline std::string to_hex(std::uint64_t x) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[x & 0xf];
        x >>= 4;
    }
    return s;
}

} // namespace mtwf
