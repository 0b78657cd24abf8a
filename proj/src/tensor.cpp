#include "pulseforge/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

namespace pulseforge::tg {

namespace {

std::atomic<bool> g_finite_checks{true};

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

void check_finite(const Tensor& t, const char* op) {
    if (!g_finite_checks.load(std::memory_order_relaxed)) return;
    for (double v : t.data()) {
        if (!std::isfinite(v))
            throw Error("NonFiniteDetected", std::string("non-finite value produced by ") + op);
    }
}

Tensor make_result(std::vector<std::size_t> shape, std::vector<NodePtr> parents) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->data.assign(shape_numel(n->shape), 0.0);
    n->parents = std::move(parents);
    return Tensor(std::move(n));
}

// Interprets a tensor as B x R x C: 2D tensors get B = 1, 3D tensors use
// the leading dim as batch.
struct Mat3 {
    std::size_t batch, rows, cols;
};

Mat3 as_mat3(const Tensor& t, const char* op) {
    const auto& s = t.shape();
    if (s.size() == 2) return {1, s[0], s[1]};
    if (s.size() == 3) return {s[0], s[1], s[2]};
    throw Error("ShapeMismatch", std::string(op) + ": expected 2D or 3D tensor");
}

}  // namespace

void set_finite_checks(bool enabled) { g_finite_checks.store(enabled); }
bool finite_checks_enabled() { return g_finite_checks.load(); }

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->data.assign(shape_numel(n->shape), 0.0);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::from_data(std::vector<double> data, std::vector<std::size_t> shape,
                         bool requires_grad) {
    if (data.size() != shape_numel(shape))
        throw Error("ShapeMismatch", "from_data: data length does not match shape");
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v) { return from_data({v}, {1}); }

// ---- matmul ------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    const Mat3 ma = as_mat3(a, "matmul");
    const Mat3 mb = as_mat3(b, "matmul");
    if (ma.cols != mb.rows)
        throw Error("ShapeMismatch", "matmul: inner dimensions disagree");
    const bool b_shared = b.shape().size() == 2;
    if (!b_shared && a.shape().size() == 3 && ma.batch != mb.batch)
        throw Error("ShapeMismatch", "matmul: batch dimensions disagree");
    if (b.shape().size() == 3 && a.shape().size() == 2)
        throw Error("ShapeMismatch", "matmul: 2D @ 3D is not supported");

    std::vector<std::size_t> out_shape;
    if (a.shape().size() == 3)
        out_shape = {ma.batch, ma.rows, mb.cols};
    else
        out_shape = {ma.rows, mb.cols};
    Tensor out = make_result(out_shape, {a.node(), b.node()});

    const std::size_t R = ma.rows, K = ma.cols, C = mb.cols, B = ma.batch;
    const double* ad = a.data().data();
    const double* bd = b.data().data();
    double* od = out.data().data();
    for (std::size_t n = 0; n < B; ++n) {
        const double* A = ad + n * R * K;
        const double* Bm = bd + (b_shared ? 0 : n * K * C);
        double* O = od + n * R * C;
        for (std::size_t i = 0; i < R; ++i) {
            double* orow = O + i * C;
            for (std::size_t k = 0; k < K; ++k) {
                const double av = A[i * K + k];
                const double* brow = Bm + k * C;
                for (std::size_t j = 0; j < C; ++j) orow[j] += av * brow[j];
            }
        }
    }

    auto an = a.node();
    auto bn = b.node();
    out.node()->backward_fn = [an, bn, B, R, K, C, b_shared](Node& self) {
        an->ensure_grad();
        bn->ensure_grad();
        const double* g = self.grad.data();
        const double* ad = an->data.data();
        const double* bd = bn->data.data();
        double* ga = an->grad.data();
        double* gb = bn->grad.data();
        for (std::size_t n = 0; n < B; ++n) {
            const double* G = g + n * R * C;
            const double* A = ad + n * R * K;
            const double* Bm = bd + (b_shared ? 0 : n * K * C);
            double* GA = ga + n * R * K;
            double* GB = gb + (b_shared ? 0 : n * K * C);
            // dA = G @ B^T
            for (std::size_t i = 0; i < R; ++i)
                for (std::size_t k = 0; k < K; ++k) {
                    double acc = 0.0;
                    const double* grow = G + i * C;
                    const double* brow = Bm + k * C;
                    for (std::size_t j = 0; j < C; ++j) acc += grow[j] * brow[j];
                    GA[i * K + k] += acc;
                }
            // dB = A^T @ G
            for (std::size_t i = 0; i < R; ++i) {
                const double* grow = G + i * C;
                for (std::size_t k = 0; k < K; ++k) {
                    const double av = A[i * K + k];
                    double* gbrow = GB + k * C;
                    for (std::size_t j = 0; j < C; ++j) gbrow[j] += av * grow[j];
                }
            }
        }
    };
    check_finite(out, "matmul");
    return out;
}

Tensor transpose_last2(const Tensor& x) {
    const Mat3 m = as_mat3(x, "transpose_last2");
    std::vector<std::size_t> out_shape = x.shape();
    std::swap(out_shape[out_shape.size() - 1], out_shape[out_shape.size() - 2]);
    Tensor out = make_result(out_shape, {x.node()});
    const std::size_t B = m.batch, R = m.rows, C = m.cols;
    const double* xd = x.data().data();
    double* od = out.data().data();
    for (std::size_t n = 0; n < B; ++n)
        for (std::size_t i = 0; i < R; ++i)
            for (std::size_t j = 0; j < C; ++j)
                od[n * R * C + j * R + i] = xd[n * R * C + i * C + j];
    auto xn = x.node();
    out.node()->backward_fn = [xn, B, R, C](Node& self) {
        xn->ensure_grad();
        const double* g = self.grad.data();
        double* gx = xn->grad.data();
        for (std::size_t n = 0; n < B; ++n)
            for (std::size_t i = 0; i < R; ++i)
                for (std::size_t j = 0; j < C; ++j)
                    gx[n * R * C + i * C + j] += g[n * R * C + j * R + i];
    };
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    const auto& sa = a.shape();
    const auto& sb = b.shape();
    const bool same = sa == sb;
    bool suffix = sb.size() <= sa.size();
    if (suffix)
        for (std::size_t i = 0; i < sb.size(); ++i)
            if (sb[i] != sa[sa.size() - sb.size() + i]) suffix = false;
    if (!same && !suffix)
        throw Error("ShapeMismatch", "add: shapes are not identical or suffix-broadcastable");

    Tensor out = make_result(sa, {a.node(), b.node()});
    const std::size_t n = a.size(), nb = b.size();
    const double* ad = a.data().data();
    const double* bd = b.data().data();
    double* od = out.data().data();
    for (std::size_t i = 0; i < n; ++i) od[i] = ad[i] + bd[i % nb];

    auto an = a.node();
    auto bn = b.node();
    out.node()->backward_fn = [an, bn, n, nb](Node& self) {
        an->ensure_grad();
        bn->ensure_grad();
        const double* g = self.grad.data();
        double* ga = an->grad.data();
        double* gb = bn->grad.data();
        for (std::size_t i = 0; i < n; ++i) {
            ga[i] += g[i];
            gb[i % nb] += g[i];
        }
    };
    check_finite(out, "add");
    return out;
}

Tensor mul_scalar(const Tensor& x, double c) {
    Tensor out = make_result(x.shape(), {x.node()});
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] * c;
    auto xn = x.node();
    out.node()->backward_fn = [xn, c, n](Node& self) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) xn->grad[i] += self.grad[i] * c;
    };
    check_finite(out, "mul_scalar");
    return out;
}

Tensor conv1d_k1(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.shape().size() != 3 || w.shape().size() != 2 || b.shape().size() != 1)
        throw Error("ShapeMismatch", "conv1d_k1: expected x N x L_in x T, w L_out x L_in, b L_out");
    const std::size_t N = x.shape()[0], Lin = x.shape()[1], T = x.shape()[2];
    const std::size_t Lout = w.shape()[0];
    if (w.shape()[1] != Lin || b.shape()[0] != Lout)
        throw Error("ShapeMismatch", "conv1d_k1: weight/bias dims disagree with input");

    Tensor out = make_result({N, Lout, T}, {x.node(), w.node(), b.node()});
    const double* xd = x.data().data();
    const double* wd = w.data().data();
    const double* bd = b.data().data();
    double* od = out.data().data();
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < Lout; ++o) {
            double* orow = od + (n * Lout + o) * T;
            for (std::size_t t = 0; t < T; ++t) orow[t] = bd[o];
            for (std::size_t k = 0; k < Lin; ++k) {
                const double wv = wd[o * Lin + k];
                const double* xrow = xd + (n * Lin + k) * T;
                for (std::size_t t = 0; t < T; ++t) orow[t] += wv * xrow[t];
            }
        }

    auto xn = x.node();
    auto wn = w.node();
    auto bn = b.node();
    out.node()->backward_fn = [xn, wn, bn, N, Lin, Lout, T](Node& self) {
        xn->ensure_grad();
        wn->ensure_grad();
        bn->ensure_grad();
        const double* g = self.grad.data();
        const double* xd = xn->data.data();
        const double* wd = wn->data.data();
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t o = 0; o < Lout; ++o) {
                const double* grow = g + (n * Lout + o) * T;
                for (std::size_t t = 0; t < T; ++t) bn->grad[o] += grow[t];
                for (std::size_t k = 0; k < Lin; ++k) {
                    const double* xrow = xd + (n * Lin + k) * T;
                    double* gxrow = xn->grad.data() + (n * Lin + k) * T;
                    const double wv = wd[o * Lin + k];
                    double acc = 0.0;
                    for (std::size_t t = 0; t < T; ++t) {
                        acc += grow[t] * xrow[t];
                        gxrow[t] += grow[t] * wv;
                    }
                    wn->grad[o * Lin + k] += acc;
                }
            }
    };
    check_finite(out, "conv1d_k1");
    return out;
}

Tensor relu(const Tensor& x) {
    Tensor out = make_result(x.shape(), {x.node()});
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
    auto xn = x.node();
    out.node()->backward_fn = [xn, n](Node& self) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < n; ++i)
            if (xn->data[i] > 0.0) xn->grad[i] += self.grad[i];
    };
    return out;
}

Tensor softmax_lastdim(const Tensor& x) {
    if (x.shape().empty()) throw Error("ShapeMismatch", "softmax_lastdim: scalar input");
    const std::size_t D = x.shape().back();
    const std::size_t rows = x.size() / D;
    Tensor out = make_result(x.shape(), {x.node()});
    const double* xd = x.data().data();
    double* od = out.data().data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = xd + r * D;
        double* orow = od + r * D;
        double mx = xr[0];
        for (std::size_t j = 1; j < D; ++j) mx = std::max(mx, xr[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < D; ++j) {
            orow[j] = std::exp(xr[j] - mx);
            sum += orow[j];
        }
        for (std::size_t j = 0; j < D; ++j) orow[j] /= sum;
    }
    auto xn = x.node();
    // note: capture only parents here -- capturing the output node itself
    // would create a shared_ptr cycle and leak the whole subgraph.
    out.node()->backward_fn = [xn, rows, D](Node& self) {
        xn->ensure_grad();
        const double* y = self.data.data();
        const double* g = self.grad.data();
        for (std::size_t r = 0; r < rows; ++r) {
            const double* yr = y + r * D;
            const double* gr = g + r * D;
            double dot = 0.0;
            for (std::size_t j = 0; j < D; ++j) dot += yr[j] * gr[j];
            double* gx = xn->grad.data() + r * D;
            for (std::size_t j = 0; j < D; ++j) gx[j] += yr[j] * (gr[j] - dot);
        }
    };
    check_finite(out, "softmax_lastdim");
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    if (x.shape().empty()) throw Error("ShapeMismatch", "layer_norm: scalar input");
    const std::size_t D = x.shape().back();
    if (gain.shape() != std::vector<std::size_t>{D} || bias.shape() != std::vector<std::size_t>{D})
        throw Error("ShapeMismatch", "layer_norm: gain/bias must have the feature length");
    const std::size_t rows = x.size() / D;
    Tensor out = make_result(x.shape(), {x.node(), gain.node(), bias.node()});

    // Stash normalized values and inverse stddev per row for backward.
    auto xhat = std::make_shared<std::vector<double>>(x.size());
    auto inv_std = std::make_shared<std::vector<double>>(rows);
    const double* xd = x.data().data();
    const double* gd = gain.data().data();
    const double* bd = bias.data().data();
    double* od = out.data().data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = xd + r * D;
        double mean = 0.0;
        for (std::size_t j = 0; j < D; ++j) mean += xr[j];
        mean /= static_cast<double>(D);
        double var = 0.0;
        for (std::size_t j = 0; j < D; ++j) {
            const double d = xr[j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(D);
        const double istd = 1.0 / std::sqrt(var + eps);
        (*inv_std)[r] = istd;
        for (std::size_t j = 0; j < D; ++j) {
            const double xh = (xr[j] - mean) * istd;
            (*xhat)[r * D + j] = xh;
            od[r * D + j] = gd[j] * xh + bd[j];
        }
    }

    auto xn = x.node();
    auto gn = gain.node();
    auto bn = bias.node();
    out.node()->backward_fn = [xn, gn, bn, xhat, inv_std, rows, D](Node& self) {
        xn->ensure_grad();
        gn->ensure_grad();
        bn->ensure_grad();
        const double* g = self.grad.data();
        const double* gd = gn->data.data();
        for (std::size_t r = 0; r < rows; ++r) {
            const double* gr = g + r * D;
            const double* xh = xhat->data() + r * D;
            double sum_gy = 0.0, sum_gyx = 0.0;
            for (std::size_t j = 0; j < D; ++j) {
                const double gy = gr[j] * gd[j];
                sum_gy += gy;
                sum_gyx += gy * xh[j];
                gn->grad[j] += gr[j] * xh[j];
                bn->grad[j] += gr[j];
            }
            const double istd = (*inv_std)[r];
            const double inv_d = 1.0 / static_cast<double>(D);
            double* gx = xn->grad.data() + r * D;
            for (std::size_t j = 0; j < D; ++j) {
                const double gy = gr[j] * gd[j];
                gx[j] += istd * (gy - inv_d * sum_gy - xh[j] * inv_d * sum_gyx);
            }
        }
    };
    check_finite(out, "layer_norm");
    return out;
}

Tensor dropout(const Tensor& x, double keep_prob, Rng& rng) {
    if (keep_prob <= 0.0 || keep_prob > 1.0)
        throw Error("InvalidConfig", "dropout: keep probability must be in (0, 1]");
    if (keep_prob == 1.0) {
        // identity; deliberately does not consume randomness
        Tensor out = make_result(x.shape(), {x.node()});
        out.data() = x.data();
        auto xn = x.node();
        const std::size_t n = x.size();
        out.node()->backward_fn = [xn, n](Node& self) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) xn->grad[i] += self.grad[i];
        };
        return out;
    }
    const std::size_t n = x.size();
    auto mask = std::make_shared<std::vector<double>>(n);
    const double scale = 1.0 / keep_prob;
    for (std::size_t i = 0; i < n; ++i)
        (*mask)[i] = rng.uniform() < keep_prob ? scale : 0.0;
    Tensor out = make_result(x.shape(), {x.node()});
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] * (*mask)[i];
    auto xn = x.node();
    out.node()->backward_fn = [xn, mask, n](Node& self) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) xn->grad[i] += self.grad[i] * (*mask)[i];
    };
    return out;
}

Tensor mean_pool_time(const Tensor& x, std::size_t factor) {
    if (x.shape().size() != 3) throw Error("ShapeMismatch", "mean_pool_time: expected N x T x D");
    const std::size_t N = x.shape()[0], T = x.shape()[1], D = x.shape()[2];
    if (factor == 0 || T % factor != 0)
        throw Error("IndivisibleLength", "mean_pool_time: factor must divide T");
    const std::size_t To = T / factor;
    Tensor out = make_result({N, To, D}, {x.node()});
    const double* xd = x.data().data();
    double* od = out.data().data();
    const double inv = 1.0 / static_cast<double>(factor);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t to = 0; to < To; ++to)
            for (std::size_t f = 0; f < factor; ++f) {
                const double* xrow = xd + (n * T + to * factor + f) * D;
                double* orow = od + (n * To + to) * D;
                for (std::size_t j = 0; j < D; ++j) orow[j] += xrow[j] * inv;
            }
    auto xn = x.node();
    out.node()->backward_fn = [xn, N, T, D, To, factor, inv](Node& self) {
        xn->ensure_grad();
        const double* g = self.grad.data();
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t to = 0; to < To; ++to)
                for (std::size_t f = 0; f < factor; ++f) {
                    const double* grow = g + (n * To + to) * D;
                    double* gxrow = xn->grad.data() + (n * T + to * factor + f) * D;
                    for (std::size_t j = 0; j < D; ++j) gxrow[j] += grow[j] * inv;
                }
    };
    return out;
}

Tensor reshape(const Tensor& x, std::vector<std::size_t> shape) {
    if (shape_numel(shape) != x.size())
        throw Error("ShapeMismatch", "reshape: element count must be preserved");
    Tensor out = make_result(std::move(shape), {x.node()});
    out.data() = x.data();
    auto xn = x.node();
    const std::size_t n = x.size();
    out.node()->backward_fn = [xn, n](Node& self) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) xn->grad[i] += self.grad[i];
    };
    return out;
}

Tensor concat_lastdim(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw Error("ShapeMismatch", "concat_lastdim: no inputs");
    const auto& s0 = xs[0].shape();
    std::size_t total_d = 0;
    std::vector<std::size_t> ds;
    for (const auto& x : xs) {
        const auto& s = x.shape();
        if (s.size() != s0.size())
            throw Error("ShapeMismatch", "concat_lastdim: rank mismatch");
        for (std::size_t i = 0; i + 1 < s.size(); ++i)
            if (s[i] != s0[i]) throw Error("ShapeMismatch", "concat_lastdim: leading dims disagree");
        ds.push_back(s.back());
        total_d += s.back();
    }
    std::vector<std::size_t> out_shape = s0;
    out_shape.back() = total_d;
    std::vector<NodePtr> parents;
    for (const auto& x : xs) parents.push_back(x.node());
    Tensor out = make_result(out_shape, parents);

    const std::size_t rows = out.size() / total_d;
    double* od = out.data().data();
    std::size_t offset = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const double* xd = xs[k].data().data();
        for (std::size_t r = 0; r < rows; ++r)
            std::copy(xd + r * ds[k], xd + (r + 1) * ds[k], od + r * total_d + offset);
        offset += ds[k];
    }

    out.node()->backward_fn = [parents, ds, rows, total_d](Node& self) {
        const double* g = self.grad.data();
        std::size_t offset = 0;
        for (std::size_t k = 0; k < parents.size(); ++k) {
            parents[k]->ensure_grad();
            double* gx = parents[k]->grad.data();
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t j = 0; j < ds[k]; ++j)
                    gx[r * ds[k] + j] += g[r * total_d + offset + j];
            offset += ds[k];
        }
    };
    return out;
}

Tensor sum_all(const Tensor& x) {
    Tensor out = make_result({1}, {x.node()});
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    out.data()[0] = acc;
    auto xn = x.node();
    const std::size_t n = x.size();
    out.node()->backward_fn = [xn, n](Node& self) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) xn->grad[i] += self.grad[0];
    };
    check_finite(out, "sum_all");
    return out;
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape())
        throw Error("ShapeMismatch", "mse_loss: prediction/target shapes disagree");
    Tensor out = make_result({1}, {pred.node(), target.node()});
    const std::size_t n = pred.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = pred.data()[i] - target.data()[i];
        acc += d * d;
    }
    out.data()[0] = acc / static_cast<double>(n);
    auto pn = pred.node();
    auto tn = target.node();
    out.node()->backward_fn = [pn, tn, n](Node& self) {
        pn->ensure_grad();
        tn->ensure_grad();
        const double g = self.grad[0] * 2.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = pn->data[i] - tn->data[i];
            pn->grad[i] += g * d;
            tn->grad[i] -= g * d;
        }
    };
    check_finite(out, "mse_loss");
    return out;
}

void backward(const Tensor& loss) {
    if (loss.size() != 1) throw Error("ShapeMismatch", "backward: loss must be scalar");
    // iterative post-order topological sort
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss.node()->ensure_grad();
    loss.node()->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
    }
    if (finite_checks_enabled()) {
        for (Node* n : order) {
            if (!n->requires_grad) continue;
            for (double v : n->grad)
                if (!std::isfinite(v)) throw Error("NonFiniteGradient", "non-finite gradient");
        }
    }
}

void adam_step(AdamState& state, std::vector<Tensor>& params) {
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i].size(), 0.0);
            state.v[i].assign(params[i].size(), 0.0);
        }
    }
    if (state.m.size() != params.size())
        throw Error("ShapeMismatch", "adam_step: parameter count changed");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params[i];
        if (p.grad().size() != p.size())
            throw Error("MissingGradient", "adam_step: parameter has no gradient");
        auto& m = state.m[i];
        auto& v = state.v[i];
        if (m.size() != p.size())
            throw Error("ShapeMismatch", "adam_step: parameter shape changed");
        double* pd = p.data().data();
        const double* g = p.grad().data();
        for (std::size_t j = 0; j < p.size(); ++j) {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            pd[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
            pd[j] -= state.weight_decay * pd[j];
        }
    }
}

}  // namespace pulseforge::tg
