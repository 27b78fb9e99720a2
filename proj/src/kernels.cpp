#include "mtwf/kernels.hpp"

#include <cstring>
#include <stdexcept>

namespace mtwf::kernels {

namespace {

void check_mul(const Matrix& a, const Matrix& b, std::size_t ak, std::size_t bk) {
    if (ak != bk)
        throw std::invalid_argument("matmul: inner dimensions disagree (" +
                                    std::to_string(a.rows) + "x" + std::to_string(a.cols) + " vs " +
                                    std::to_string(b.rows) + "x" + std::to_string(b.cols) + ")");
}

} // namespace

void matmul(const Matrix& a, const Matrix& b, Matrix& c) {
    check_mul(a, b, a.cols, b.rows);
    c = Matrix(a.rows, b.cols);
    const std::size_t m = a.rows, k = a.cols, n = b.cols;
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < m; ++i) {
        double* ci = c.v.data() + i * n;
        const double* ai = a.v.data() + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = ai[p];
            const double* bp = b.v.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
        }
    }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c) {
    check_mul(a, b, a.rows, b.rows);
    c = Matrix(a.cols, b.cols);
    const std::size_t m = a.rows, k = a.cols, n = b.cols;
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < k; ++i) {
        double* ci = c.v.data() + i * n;
        for (std::size_t r = 0; r < m; ++r) {
            const double ari = a.v[r * k + i];
            const double* br = b.v.data() + r * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += ari * br[j];
        }
    }
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c) {
    check_mul(a, b, a.cols, b.cols);
    c = Matrix(a.rows, b.rows);
    const std::size_t m = a.rows, k = a.cols, n = b.rows;
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a.v.data() + i * k;
        double* ci = c.v.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* bj = b.v.data() + j * k;
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
            ci[j] = s;
        }
    }
}

void add_row_bias(Matrix& y, const std::vector<double>& bias) {
    if (bias.size() != y.cols) throw std::invalid_argument("add_row_bias: width mismatch");
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < y.rows; ++i) {
        double* yi = y.row(i);
        for (std::size_t j = 0; j < y.cols; ++j) yi[j] += bias[j];
    }
}

void column_sums(const Matrix& m, std::vector<double>& out) {
    out.assign(m.cols, 0.0);
#pragma omp parallel for schedule(static)
    for (std::size_t j = 0; j < m.cols; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < m.rows; ++i) s += m.v[i * m.cols + j];
        out[j] = s;
    }
}

void conv1d_forward(const Matrix& x, const Matrix& w, const std::vector<double>& bias,
                    std::size_t in_ch, std::size_t len, std::size_t k, Matrix& y) {
    if (x.cols != in_ch * len) throw std::invalid_argument("conv1d: input width != in_ch*len");
    if (len < k) throw std::invalid_argument("conv1d: kernel longer than input");
    const std::size_t out_ch = w.rows;
    if (w.cols != in_ch * k) throw std::invalid_argument("conv1d: filter width != in_ch*k");
    if (bias.size() != out_ch) throw std::invalid_argument("conv1d: bias size != out_ch");
    const std::size_t lo = len - k + 1;
    y = Matrix(x.rows, out_ch * lo);
#pragma omp parallel for schedule(static)
    for (std::size_t b = 0; b < x.rows; ++b) {
        const double* xb = x.row(b);
        double* yb = y.row(b);
        for (std::size_t co = 0; co < out_ch; ++co) {
            double* yc = yb + co * lo;
            for (std::size_t p = 0; p < lo; ++p) yc[p] = bias[co];
            const double* wc = w.row(co);
            for (std::size_t ci = 0; ci < in_ch; ++ci) {
                const double* xc = xb + ci * len;
                for (std::size_t t = 0; t < k; ++t) {
                    const double wv = wc[ci * k + t];
                    const double* xs = xc + t;
                    for (std::size_t p = 0; p < lo; ++p) yc[p] += wv * xs[p];
                }
            }
        }
    }
}

void conv1d_backward(const Matrix& x, const Matrix& w, const Matrix& dy,
                     std::size_t in_ch, std::size_t len, std::size_t k,
                     Matrix& dx, Matrix& dw, std::vector<double>& db) {
    const std::size_t out_ch = w.rows;
    const std::size_t lo = len - k + 1;
    if (dy.rows != x.rows || dy.cols != out_ch * lo)
        throw std::invalid_argument("conv1d_backward: dy shape mismatch");

    dx = Matrix(x.rows, x.cols);
#pragma omp parallel for schedule(static)
    for (std::size_t b = 0; b < x.rows; ++b) {
        const double* dyb = dy.row(b);
        double* dxb = dx.row(b);
        for (std::size_t co = 0; co < out_ch; ++co) {
            const double* dyc = dyb + co * lo;
            const double* wc = w.row(co);
            for (std::size_t ci = 0; ci < in_ch; ++ci) {
                double* dxc = dxb + ci * len;
                for (std::size_t t = 0; t < k; ++t) {
                    const double wv = wc[ci * k + t];
                    double* dxs = dxc + t;
                    for (std::size_t p = 0; p < lo; ++p) dxs[p] += wv * dyc[p];
                }
            }
        }
    }

    dw = Matrix(out_ch, in_ch * k);
    db.assign(out_ch, 0.0);
#pragma omp parallel for schedule(static)
    for (std::size_t co = 0; co < out_ch; ++co) {
        double* dwc = dw.row(co);
        double bs = 0.0;
        for (std::size_t b = 0; b < x.rows; ++b) {
            const double* dyc = dy.row(b) + co * lo;
            const double* xb = x.row(b);
            for (std::size_t ci = 0; ci < in_ch; ++ci) {
                const double* xc = xb + ci * len;
                for (std::size_t t = 0; t < k; ++t) {
                    const double* xs = xc + t;
                    double s = 0.0;
                    for (std::size_t p = 0; p < lo; ++p) s += dyc[p] * xs[p];
                    dwc[ci * k + t] += s;
                }
            }
            for (std::size_t p = 0; p < lo; ++p) bs += dyc[p];
        }
        db[co] = bs;
    }
}

namespace ref {

void matmul(const Matrix& a, const Matrix& b, Matrix& c) {
    check_mul(a, b, a.cols, b.rows);
    c = Matrix(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t p = 0; p < a.cols; ++p) {
            const double aip = a.at(i, p);
            for (std::size_t j = 0; j < b.cols; ++j) c.at(i, j) += aip * b.at(p, j);
        }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c) {
    check_mul(a, b, a.rows, b.rows);
    c = Matrix(a.cols, b.cols);
    for (std::size_t i = 0; i < a.cols; ++i)
        for (std::size_t r = 0; r < a.rows; ++r) {
            const double ari = a.at(r, i);
            for (std::size_t j = 0; j < b.cols; ++j) c.at(i, j) += ari * b.at(r, j);
        }
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c) {
    check_mul(a, b, a.cols, b.cols);
    c = Matrix(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < b.rows; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < a.cols; ++p) s += a.at(i, p) * b.at(j, p);
            c.at(i, j) = s;
        }
}

void conv1d_forward(const Matrix& x, const Matrix& w, const std::vector<double>& bias,
                    std::size_t in_ch, std::size_t len, std::size_t k, Matrix& y) {
    const std::size_t out_ch = w.rows;
    const std::size_t lo = len - k + 1;
    y = Matrix(x.rows, out_ch * lo);
    for (std::size_t b = 0; b < x.rows; ++b)
        for (std::size_t co = 0; co < out_ch; ++co)
            for (std::size_t p = 0; p < lo; ++p) {
                double s = bias[co];
                for (std::size_t ci = 0; ci < in_ch; ++ci)
                    for (std::size_t t = 0; t < k; ++t)
                        s += w.at(co, ci * k + t) * x.at(b, ci * len + p + t);
                y.at(b, co * lo + p) = s;
            }
}

void conv1d_backward(const Matrix& x, const Matrix& w, const Matrix& dy,
                     std::size_t in_ch, std::size_t len, std::size_t k,
                     Matrix& dx, Matrix& dw, std::vector<double>& db) {
    const std::size_t out_ch = w.rows;
    const std::size_t lo = len - k + 1;
    dx = Matrix(x.rows, x.cols);
    dw = Matrix(out_ch, in_ch * k);
    db.assign(out_ch, 0.0);
    for (std::size_t b = 0; b < x.rows; ++b)
        for (std::size_t co = 0; co < out_ch; ++co)
            for (std::size_t ci = 0; ci < in_ch; ++ci)
                for (std::size_t t = 0; t < k; ++t) {
                    const double wv = w.at(co, ci * k + t);
                    for (std::size_t p = 0; p < lo; ++p)
                        dx.at(b, ci * len + t + p) += wv * dy.at(b, co * lo + p);
                }
    for (std::size_t co = 0; co < out_ch; ++co) {
        for (std::size_t b = 0; b < x.rows; ++b) {
            for (std::size_t ci = 0; ci < in_ch; ++ci)
                for (std::size_t t = 0; t < k; ++t) {
                    double s = 0.0;
                    for (std::size_t p = 0; p < lo; ++p)
                        s += dy.at(b, co * lo + p) * x.at(b, ci * len + p + t);
                    dw.at(co, ci * k + t) += s;
                }
            for (std::size_t p = 0; p < lo; ++p) db[co] += dy.at(b, co * lo + p);
        }
    }
}

} // namespace ref

} // namespace mtwf::kernels
