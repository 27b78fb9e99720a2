#include "mtwf/nn.hpp"

#include "mtwf/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace mtwf::nn {

/* ------------------------------------------------------------------ */
/* Parameters                                                          */
/* ------------------------------------------------------------------ */

Tensor& Parameters::add(const std::string& name, std::vector<std::size_t> shape) {
    if (index_.count(name))
        throw TrainError("duplicate parameter name: " + name);
    index_.emplace(name, tensors_.size());
    names_.push_back(name);
    tensors_.emplace_back(std::move(shape));
    return tensors_.back();
}

Tensor& Parameters::get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end())
        throw TrainError("unknown parameter: " + name);
    return tensors_[it->second];
}

const Tensor& Parameters::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end())
        throw TrainError("unknown parameter: " + name);
    return tensors_[it->second];
}

std::size_t Parameters::total_values() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.v.size();
    return n;
}

bool Parameters::same_schema(const Parameters& o) const {
    if (names_ != o.names_) return false;
    for (std::size_t i = 0; i < tensors_.size(); ++i)
        if (tensors_[i].shape != o.tensors_[i].shape) return false;
    return true;
}

void Parameters::require_same_schema(const Parameters& o, const char* what) const {
    if (!same_schema(o))
        throw TrainError(std::string("parameter schema mismatch in ") + what);
}

void Parameters::ema_blend(const Parameters& other, double alpha) {
    require_same_schema(other, "ema_blend");
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
        auto& dst = tensors_[i].v;
        const auto& src = other.tensors_[i].v;
        for (std::size_t j = 0; j < dst.size(); ++j)
            dst[j] = alpha * dst[j] + (1.0 - alpha) * src[j];
    }
}

void Parameters::fill(double value) {
    for (auto& t : tensors_)
        std::fill(t.v.begin(), t.v.end(), value);
}

std::uint64_t Parameters::value_hash() const {
    std::uint64_t h = 1469598103934665603ull;
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
        h ^= fnv1a(names_[i].data(), names_[i].size());
        h ^= fnv1a_doubles(tensors_[i].v.data(), tensors_[i].v.size());
        h *= 1099511628211ull;
    }
    return h;
}

/* ------------------------------------------------------------------ */
/* LayerSpec                                                           */
/* ------------------------------------------------------------------ */

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
    LayerSpec s;
    s.kind = Kind::Dense;
    s.in = in;
    s.out = out;
    return s;
}

LayerSpec LayerSpec::conv1d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel) {
    LayerSpec s;
    s.kind = Kind::Conv1D;
    s.in_ch = in_ch;
    s.out_ch = out_ch;
    s.kernel = kernel;
    return s;
}

LayerSpec LayerSpec::dropout(double rate) {
    LayerSpec s;
    s.kind = Kind::Dropout;
    s.rate = rate;
    return s;
}

LayerSpec LayerSpec::activation(Activation a) {
    LayerSpec s;
    s.kind = Kind::Act;
    s.act = a;
    return s;
}

LayerSpec LayerSpec::flatten() {
    LayerSpec s;
    s.kind = Kind::Flatten;
    return s;
}

/* ------------------------------------------------------------------ */
/* Sequential                                                          */
/* ------------------------------------------------------------------ */

Sequential::Sequential(std::string prefix, std::size_t input_width, std::vector<LayerSpec> layers)
    : prefix_(std::move(prefix)), input_width_(input_width), layers_(std::move(layers)) {
    if (input_width_ == 0)
        throw TrainError("sequential '" + prefix_ + "': input width must be positive");

    Shape cur{1, 0};
    cur.ch = 1;
    cur.len = 0; // flat until a conv asks for channels
    std::size_t flat = input_width_;

    shapes_.reserve(layers_.size());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& l = layers_[i];
        shapes_.push_back(cur.len == 0 ? Shape{1, flat} : cur);
        switch (l.kind) {
        case LayerSpec::Kind::Dense: {
            if (cur.len != 0)
                throw TrainError("sequential '" + prefix_ + "': dense layer needs flat input");
            if (l.in != flat)
                throw TrainError("sequential '" + prefix_ + "': dense input width mismatch");
            if (l.out == 0)
                throw TrainError("sequential '" + prefix_ + "': dense output width must be positive");
            flat = l.out;
            break;
        }
        case LayerSpec::Kind::Conv1D: {
            std::size_t ch = cur.len == 0 ? 1 : cur.ch;
            std::size_t len = cur.len == 0 ? flat : cur.len;
            if (ch != l.in_ch)
                throw TrainError("sequential '" + prefix_ + "': conv channel mismatch");
            if (l.kernel == 0 || l.kernel > len)
                throw TrainError("sequential '" + prefix_ + "': conv kernel exceeds input length");
            shapes_.back() = Shape{ch, len};
            cur.ch = l.out_ch;
            cur.len = len - l.kernel + 1;
            flat = cur.width();
            break;
        }
        case LayerSpec::Kind::Dropout:
            if (l.rate < 0.0 || l.rate >= 1.0)
                throw TrainError("sequential '" + prefix_ + "': dropout rate out of range");
            break;
        case LayerSpec::Kind::Act:
            break;
        case LayerSpec::Kind::Flatten:
            cur.ch = 1;
            cur.len = 0;
            break;
        }
    }
    if (cur.len != 0)
        throw TrainError("sequential '" + prefix_ + "': stack must end flat (missing flatten?)");
    output_width_ = flat;
}

std::string Sequential::pname(std::size_t layer, const char* which) const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), ".%zu.%s", layer, which);
    return prefix_ + buf;
}

void Sequential::init_params(Parameters& params, Xoshiro256ss& rng) const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& l = layers_[i];
        if (l.kind == LayerSpec::Kind::Dense) {
            auto& w = params.add(pname(i, "w"), {l.in, l.out});
            double limit = std::sqrt(6.0 / double(l.in + l.out));
            for (auto& x : w.v) x = rng.uniform(-limit, limit);
            params.add(pname(i, "b"), {l.out});
        } else if (l.kind == LayerSpec::Kind::Conv1D) {
            // Stored as out_ch x (in_ch*kernel); fan_in = in_ch*kernel,
            // fan_out = out_ch*kernel.
            auto& w = params.add(pname(i, "w"), {l.out_ch, l.in_ch, l.kernel});
            double limit = std::sqrt(6.0 / double(l.in_ch * l.kernel + l.out_ch * l.kernel));
            for (auto& x : w.v) x = rng.uniform(-limit, limit);
            params.add(pname(i, "b"), {l.out_ch});
        }
    }
}

namespace {

void apply_activation(Activation a, Matrix& x) {
    switch (a) {
    case Activation::Elu:
        for (auto& v : x.v) v = v > 0.0 ? v : std::expm1(v);
        break;
    case Activation::Tanh:
        for (auto& v : x.v) v = std::tanh(v);
        break;
    case Activation::Sigmoid:
        for (auto& v : x.v) v = 1.0 / (1.0 + std::exp(-v));
        break;
    case Activation::Softmax:
        for (std::size_t r = 0; r < x.rows; ++r) {
            double* row = x.row(r);
            double mx = row[0];
            for (std::size_t c = 1; c < x.cols; ++c) mx = std::max(mx, row[c]);
            double sum = 0.0;
            for (std::size_t c = 0; c < x.cols; ++c) {
                row[c] = std::exp(row[c] - mx);
                sum += row[c];
            }
            for (std::size_t c = 0; c < x.cols; ++c) row[c] /= sum;
        }
        break;
    case Activation::Linear:
        break;
    }
}

// Gradient through an activation given its *output* y and upstream dy.
// Softmax is handled jointly with CE by the loss (see loss_eval); a softmax
// followed by any other loss applies the full Jacobian here.
void activation_backward(Activation a, const Matrix& y, Matrix& dy) {
    switch (a) {
    case Activation::Elu:
        for (std::size_t i = 0; i < y.v.size(); ++i)
            dy.v[i] *= y.v[i] > 0.0 ? 1.0 : y.v[i] + 1.0;
        break;
    case Activation::Tanh:
        for (std::size_t i = 0; i < y.v.size(); ++i)
            dy.v[i] *= 1.0 - y.v[i] * y.v[i];
        break;
    case Activation::Sigmoid:
        for (std::size_t i = 0; i < y.v.size(); ++i)
            dy.v[i] *= y.v[i] * (1.0 - y.v[i]);
        break;
    case Activation::Softmax:
        for (std::size_t r = 0; r < y.rows; ++r) {
            const double* yr = y.row(r);
            double* dr = dy.row(r);
            double dot = 0.0;
            for (std::size_t c = 0; c < y.cols; ++c) dot += dr[c] * yr[c];
            for (std::size_t c = 0; c < y.cols; ++c) dr[c] = yr[c] * (dr[c] - dot);
        }
        break;
    case Activation::Linear:
        break;
    }
}

Matrix as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    m.v = t.v;
    return m;
}

Matrix dense_forward(const Tensor& w, const Tensor& b, const Matrix& x) {
    Matrix wm = as_matrix(w, w.shape[0], w.shape[1]);
    Matrix y;
    kernels::matmul(x, wm, y);
    kernels::add_row_bias(y, b.v);
    return y;
}

} // namespace

Matrix Sequential::forward(const Parameters& params, const Matrix& x, Mode mode,
                           std::uint64_t dropout_seed, Cache* cache) const {
    if (x.cols != input_width_)
        throw TrainError("sequential '" + prefix_ + "': input width mismatch in forward");
    if (cache) {
        cache->acts.clear();
        cache->dropout_masks.assign(layers_.size(), Matrix{});
        cache->acts.push_back(x);
        cache->valid = true;
    }

    Matrix cur = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& l = layers_[i];
        switch (l.kind) {
        case LayerSpec::Kind::Dense:
            cur = dense_forward(params.get(pname(i, "w")), params.get(pname(i, "b")), cur);
            break;
        case LayerSpec::Kind::Conv1D: {
            const Tensor& w = params.get(pname(i, "w"));
            const Tensor& b = params.get(pname(i, "b"));
            Matrix wm = as_matrix(w, l.out_ch, l.in_ch * l.kernel);
            Matrix y;
            kernels::conv1d_forward(cur, wm, b.v, l.in_ch, shapes_[i].len, l.kernel, y);
            cur = std::move(y);
            break;
        }
        case LayerSpec::Kind::Dropout: {
            if (mode == Mode::Train && l.rate > 0.0) {
                // One stream per (call, layer); inverted scaling so eval is
                // the identity.
                Xoshiro256ss rng(derive_seed(dropout_seed, 0x1000 + i));
                Matrix mask(cur.rows, cur.cols);
                double keep = 1.0 - l.rate;
                for (std::size_t j = 0; j < mask.v.size(); ++j)
                    mask.v[j] = rng.next_unit() < l.rate ? 0.0 : 1.0 / keep;
                for (std::size_t j = 0; j < cur.v.size(); ++j)
                    cur.v[j] *= mask.v[j];
                if (cache) cache->dropout_masks[i] = std::move(mask);
            }
            break;
        }
        case LayerSpec::Kind::Act:
            apply_activation(l.act, cur);
            break;
        case LayerSpec::Kind::Flatten:
            break; // row-major layout already flat
        }
        if (cache) cache->acts.push_back(cur);
    }
    return cur;
}

Matrix Sequential::backward(const Parameters& params, const Cache& cache, const Matrix& d_out,
                            Parameters& grads) const {
    if (!cache.valid || cache.acts.size() != layers_.size() + 1)
        throw TrainError("sequential '" + prefix_ + "': backward without matching forward cache");

    Matrix d = d_out;
    for (std::size_t ri = layers_.size(); ri-- > 0;) {
        const auto& l = layers_[ri];
        const Matrix& in = cache.acts[ri];
        const Matrix& out = cache.acts[ri + 1];
        switch (l.kind) {
        case LayerSpec::Kind::Dense: {
            const Tensor& w = params.get(pname(ri, "w"));
            Matrix wm = as_matrix(w, w.shape[0], w.shape[1]);
            std::string wn = pname(ri, "w"), bn = pname(ri, "b");
            if (!grads.has(wn)) {
                grads.add(wn, w.shape);
                grads.add(bn, params.get(bn).shape);
            }
            Matrix dw;
            kernels::matmul_tn(in, d, dw);
            auto& gw = grads.get(wn).v;
            for (std::size_t j = 0; j < gw.size(); ++j) gw[j] += dw.v[j];
            std::vector<double> db;
            kernels::column_sums(d, db);
            auto& gb = grads.get(bn).v;
            for (std::size_t j = 0; j < gb.size(); ++j) gb[j] += db[j];
            Matrix dx;
            kernels::matmul_nt(d, wm, dx);
            d = std::move(dx);
            break;
        }
        case LayerSpec::Kind::Conv1D: {
            const Tensor& w = params.get(pname(ri, "w"));
            Matrix wm = as_matrix(w, l.out_ch, l.in_ch * l.kernel);
            std::string wn = pname(ri, "w"), bn = pname(ri, "b");
            if (!grads.has(wn)) {
                grads.add(wn, w.shape);
                grads.add(bn, params.get(bn).shape);
            }
            Matrix dw, dx;
            std::vector<double> db;
            kernels::conv1d_backward(in, wm, d, l.in_ch, shapes_[ri].len, l.kernel, dx, dw, db);
            auto& gw = grads.get(wn).v;
            for (std::size_t j = 0; j < gw.size(); ++j) gw[j] += dw.v[j];
            auto& gb = grads.get(bn).v;
            for (std::size_t j = 0; j < gb.size(); ++j) gb[j] += db[j];
            d = std::move(dx);
            break;
        }
        case LayerSpec::Kind::Dropout:
            if (cache.dropout_masks[ri].v.size() == d.v.size())
                for (std::size_t j = 0; j < d.v.size(); ++j)
                    d.v[j] *= cache.dropout_masks[ri].v[j];
            break;
        case LayerSpec::Kind::Act:
            activation_backward(l.act, out, d);
            break;
        case LayerSpec::Kind::Flatten:
            break;
        }
    }
    return d;
}

std::size_t Sequential::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) {
        if (l.kind == LayerSpec::Kind::Dense)
            n += l.in * l.out + l.out;
        else if (l.kind == LayerSpec::Kind::Conv1D)
            n += l.out_ch * l.in_ch * l.kernel + l.out_ch;
    }
    return n;
}

/* ------------------------------------------------------------------ */
/* Losses                                                              */
/* ------------------------------------------------------------------ */

const char* loss_name(LossKind k) {
    switch (k) {
    case LossKind::MSE: return "mse";
    case LossKind::BCE: return "bce";
    case LossKind::CE: return "ce";
    }
    return "?";
}

namespace {
constexpr double kProbEps = 1e-7;

double clamp_prob(double p) {
    return std::min(std::max(p, kProbEps), 1.0 - kProbEps);
}
} // namespace

LossValue loss_eval(LossKind kind, const Matrix& pred, const Matrix& target) {
    if (pred.rows != target.rows || pred.cols != target.cols)
        throw TrainError("loss: prediction/target shape mismatch");
    if (pred.rows == 0)
        throw TrainError("loss: empty batch");

    LossValue out;
    out.grad = Matrix(pred.rows, pred.cols);
    const double n = double(pred.v.size());
    const double rows = double(pred.rows);

    switch (kind) {
    case LossKind::MSE: {
        double acc = 0.0;
        for (std::size_t i = 0; i < pred.v.size(); ++i) {
            double diff = pred.v[i] - target.v[i];
            acc += diff * diff;
            out.grad.v[i] = 2.0 * diff / n;
        }
        out.value = acc / n;
        break;
    }
    case LossKind::BCE: {
        double acc = 0.0;
        for (std::size_t i = 0; i < pred.v.size(); ++i) {
            double p = clamp_prob(pred.v[i]);
            double y = target.v[i];
            acc += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
            out.grad.v[i] = (p - y) / (p * (1.0 - p)) / n;
        }
        out.value = acc / n;
        break;
    }
    case LossKind::CE: {
        // Mean over rows of -sum_c y*log(p). With a softmax immediately
        // before, the chained gradient collapses to (p - y)/rows.
        double acc = 0.0;
        for (std::size_t i = 0; i < pred.v.size(); ++i) {
            double p = clamp_prob(pred.v[i]);
            double y = target.v[i];
            acc += -y * std::log(p);
            out.grad.v[i] = -y / p / rows;
        }
        out.value = acc / rows;
        break;
    }
    }
    if (!std::isfinite(out.value))
        throw TrainError("loss diverged (non-finite value)");
    return out;
}

/* ------------------------------------------------------------------ */
/* Adam                                                                */
/* ------------------------------------------------------------------ */

void adam_step(Parameters& params, const Parameters& grads, AdamState& state,
               const std::unordered_map<std::string, double>& lr_by_tensor) {
    state.step += 1;
    const double b1 = state.beta1, b2 = state.beta2;
    const double bc1 = 1.0 - std::pow(b1, double(state.step));
    const double bc2 = 1.0 - std::pow(b2, double(state.step));

    // Gradients are looked up by name: backward passes accumulate tensors in
    // visit order, which need not match the parameter order. A tensor absent
    // from grads took no part in the step and contributes a zero gradient.
    for (const auto& name : params.names()) {
        auto lr_it = lr_by_tensor.find(name);
        if (lr_it == lr_by_tensor.end())
            throw TrainError("adam_step: no learning rate for tensor " + name);
        const double lr = lr_it->second;

        auto& p = params.get(name).v;
        const std::vector<double>* g = grads.has(name) ? &grads.get(name).v : nullptr;
        if (g && g->size() != p.size())
            throw TrainError("adam_step: gradient shape mismatch for tensor " + name);
        auto& m = state.m[name];
        auto& v = state.v[name];
        if (m.v.size() != p.size()) { m.v.assign(p.size(), 0.0); }
        if (v.v.size() != p.size()) { v.v.assign(p.size(), 0.0); }

        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g ? (*g)[i] : 0.0;
            m.v[i] = b1 * m.v[i] + (1.0 - b1) * gi;
            v.v[i] = b2 * v.v[i] + (1.0 - b2) * gi * gi;
            double mhat = m.v[i] / bc1;
            double vhat = v.v[i] / bc2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
            if (!std::isfinite(p[i]))
                throw TrainError("training diverged (non-finite parameter after update)");
        }
    }
}

/* ------------------------------------------------------------------ */
/* Schedules                                                           */
/* ------------------------------------------------------------------ */

bool PlateauScheduler::observe(double epoch_loss) {
    if (!started || epoch_loss < best) {
        best = epoch_loss;
        started = true;
        since_improve = 0;
        return false;
    }
    if (++since_improve > patience) {
        since_improve = 0;
        return true;
    }
    return false;
}

bool EarlyStopping::observe(double epoch_loss) {
    if (!started || epoch_loss < best) {
        best = epoch_loss;
        started = true;
        since_improve = 0;
        return false;
    }
    return ++since_improve > patience;
}

} // namespace mtwf::nn
