// Timing comparison between the OpenMP kernels and the serial reference
// implementations, plus a bitwise-equality check on every result.

#include "mtwf/kernels.hpp"
#include "mtwf/rng.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace mtwf;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Matrix m(rows, cols);
    Xoshiro256ss rng(seed);
    for (auto& x : m.v) x = rng.uniform(-1.0, 1.0);
    return m;
}

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
    std::vector<double> v(n);
    Xoshiro256ss rng(seed);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
    return a.rows == b.rows && a.cols == b.cols && a.v == b.v;
}

void print_row(const char* name, double serial_s, double parallel_s, bool exact) {
    std::printf("%-18s %10.4f s %10.4f s %8.2fx  %s\n", name, serial_s, parallel_s,
                serial_s / parallel_s, exact ? "bitwise-equal" : "MISMATCH");
}

} // namespace

int main(int argc, char** argv) {
    int reps = 5;
    if (argc > 1) reps = std::atoi(argv[1]);
    if (reps < 1) reps = 1;

#ifdef _OPENMP
    std::printf("OpenMP threads: %d, reps: %d\n", omp_get_max_threads(), reps);
#else
    std::printf("OpenMP not enabled, reps: %d\n", reps);
#endif
    std::printf("%-18s %12s %12s %9s\n", "kernel", "serial", "openmp", "speedup");

    // Dense shapes from the wide-input regression head: 512-row batch,
    // 428 inputs, 520 hidden units.
    const std::size_t m = 512, k = 428, n = 520;
    Matrix a = random_matrix(m, k, 11);
    Matrix b = random_matrix(k, n, 12);
    Matrix bt = random_matrix(k, n, 13);
    Matrix am = random_matrix(m, n, 14);

    bool all_exact = true;

    {
        Matrix cs, cp;
        auto t0 = std::chrono::steady_clock::now();
        for (int r = 0; r < reps; ++r) kernels::ref::matmul(a, b, cs);
        double ts = seconds_since(t0);
        t0 = std::chrono::steady_clock::now();
        for (int r = 0; r < reps; ++r) kernels::matmul(a, b, cp);
        double tp = seconds_since(t0);
        bool ok = bitwise_equal(cs, cp);
        all_exact = all_exact && ok;
        print_row("matmul", ts, tp, ok);
    }
    {
        Matrix cs, cp;
        auto t0 = std::chrono::steady_clock::now();
        for (int r = 0; r < reps; ++r) kernels::ref::matmul_tn(a, am, cs);
        double ts = seconds_since(t0);
        t0 = std::chrono::steady_clock::now();
        for (int r = 0; r < reps; ++r) kernels::matmul_tn(a, am, cp);
        double tp = seconds_since(t0);
        bool ok = bitwise_equal(cs, cp);
        all_exact = all_exact && ok;
        print_row("matmul_tn", ts, tp, ok);
    }
    {
        Matrix cs, cp;
        auto t0 = std::chrono::steady_clock::now();
        for (int r = 0; r < reps; ++r) kernels::ref::matmul_nt(am, bt, cs);
        double ts = seconds_since(t0);
        t0 = std::chrono::steady_clock::now();
        for (int r = 0; r < reps; ++r) kernels::matmul_nt(am, bt, cp);
        double tp = seconds_since(t0);
        bool ok = bitwise_equal(cs, cp);
        all_exact = all_exact && ok;
        print_row("matmul_nt", ts, tp, ok);
    }

    // Convolution shapes from the deepest conv layer: 99 -> 66 channels,
    // kernel 22 over length 109, batch 128.
    const std::size_t in_ch = 99, len = 109, kk = 22, out_ch = 66, batch = 128;
    const std::size_t out_len = len - kk + 1;
    Matrix x = random_matrix(batch, in_ch * len, 21);
    Matrix w = random_matrix(out_ch, in_ch * kk, 22);
    std::vector<double> bias = random_vector(out_ch, 23);
    Matrix dy = random_matrix(batch, out_ch * out_len, 24);

    {
        Matrix ys, yp;
        auto t0 = std::chrono::steady_clock::now();
        for (int r = 0; r < reps; ++r) kernels::ref::conv1d_forward(x, w, bias, in_ch, len, kk, ys);
        double ts = seconds_since(t0);
        t0 = std::chrono::steady_clock::now();
        for (int r = 0; r < reps; ++r) kernels::conv1d_forward(x, w, bias, in_ch, len, kk, yp);
        double tp = seconds_since(t0);
        bool ok = bitwise_equal(ys, yp);
        all_exact = all_exact && ok;
        print_row("conv1d_forward", ts, tp, ok);
    }
    {
        Matrix dxs, dws, dxp, dwp;
        std::vector<double> dbs, dbp;
        auto t0 = std::chrono::steady_clock::now();
        for (int r = 0; r < reps; ++r)
            kernels::ref::conv1d_backward(x, w, dy, in_ch, len, kk, dxs, dws, dbs);
        double ts = seconds_since(t0);
        t0 = std::chrono::steady_clock::now();
        for (int r = 0; r < reps; ++r)
            kernels::conv1d_backward(x, w, dy, in_ch, len, kk, dxp, dwp, dbp);
        double tp = seconds_since(t0);
        bool ok = bitwise_equal(dxs, dxp) && bitwise_equal(dws, dwp) && dbs == dbp;
        all_exact = all_exact && ok;
        print_row("conv1d_backward", ts, tp, ok);
    }

    if (!all_exact) {
        std::fprintf(stderr, "kernel outputs diverged between serial and parallel paths\n");
        return 1;
    }
    return 0;
}
