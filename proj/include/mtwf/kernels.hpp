#pragma once

#include "mtwf/common.hpp"

#include <vector>

// Numeric inner loops. The primary implementations are OpenMP-parallel; the
// kernels::ref namespace keeps plain serial versions for cross-checking.
//
// Parallel loops only ever split independent output elements and every
// element's accumulation order is fixed, so the parallel results are
// bit-identical to the serial ones for any thread count. Tests assert exact
// equality; tools/bench_kernels compares timings.

namespace mtwf::kernels {

// c = a * b; a: m x k, b: k x n.
void matmul(const Matrix& a, const Matrix& b, Matrix& c);

// c = a^T * b; a: m x k, b: m x n, c: k x n. (weight gradients)
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c);

// c = a * b^T; a: m x k, b: n x k, c: m x n. (input gradients)
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c);

// y[i][j] += bias[j]
void add_row_bias(Matrix& y, const std::vector<double>& bias);

// out[j] = sum_i m[i][j]
void column_sums(const Matrix& m, std::vector<double>& out);

// Valid 1D convolution, stride 1. Rows are channel-major: sample row =
// [ch0 pos0..L-1 | ch1 ... ]. w rows are filters laid out [ci][t].
//   x: batch x (in_ch*len), w: out_ch x (in_ch*k), y: batch x (out_ch*(len-k+1))
void conv1d_forward(const Matrix& x, const Matrix& w, const std::vector<double>& bias,
                    std::size_t in_ch, std::size_t len, std::size_t k, Matrix& y);

// Gradients of the above. dx is overwritten, dw/db are overwritten.
void conv1d_backward(const Matrix& x, const Matrix& w, const Matrix& dy,
                     std::size_t in_ch, std::size_t len, std::size_t k,
                     Matrix& dx, Matrix& dw, std::vector<double>& db);

namespace ref {

void matmul(const Matrix& a, const Matrix& b, Matrix& c);
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c);
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c);
void conv1d_forward(const Matrix& x, const Matrix& w, const std::vector<double>& bias,
                    std::size_t in_ch, std::size_t len, std::size_t k, Matrix& y);
void conv1d_backward(const Matrix& x, const Matrix& w, const Matrix& dy,
                     std::size_t in_ch, std::size_t len, std::size_t k,
                     Matrix& dx, Matrix& dw, std::vector<double>& db);

} // namespace ref

} // namespace mtwf::kernels
