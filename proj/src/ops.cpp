#include "prnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace prnet {

namespace {

void require_rank(const Tensor& t, size_t rank, const char* what) {
    if (t.rank() != rank)
        throw ShapeMismatch(std::string(what) + ": rank " + std::to_string(t.rank()) + ", want " +
                            std::to_string(rank));
}

size_t pad_before(size_t in, size_t kernel, size_t stride, size_t out, Padding pad) {
    if (pad == Padding::Valid) return 0;
    size_t needed = (out - 1) * stride + kernel;
    size_t total = needed > in ? needed - in : 0;
    return total / 2;
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

Tensor affine_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
    require_rank(x, 2, "affine x");
    require_rank(w, 2, "affine w");
    require_rank(b, 1, "affine b");
    if (x.dim(1) != w.dim(0) || w.dim(1) != b.dim(0))
        throw ShapeMismatch("affine " + x.shape_str() + " . " + w.shape_str() + " + " +
                            b.shape_str());
    Tensor y = matmul(x, w);
    const size_t rows = y.dim(0), cols = y.dim(1);
    for (size_t r = 0; r < rows; ++r)
        for (size_t c = 0; c < cols; ++c) y[r * cols + c] += b[c];
    return y;
}

AffineGrads affine_backward(const Tensor& dy, const Tensor& x, const Tensor& w) {
    if (dy.rank() != 2 || dy.dim(0) != x.dim(0) || dy.dim(1) != w.dim(1))
        throw ShapeMismatch("affine backward dy " + dy.shape_str());
    AffineGrads g;
    g.dx = matmul(dy, transpose(w));
    g.dw = matmul(transpose(x), dy);
    g.db = colsum(dy);
    return g;
}

Tensor relu_forward(const Tensor& x) {
    Tensor y = x;
    for (size_t i = 0; i < y.size(); ++i)
        if (y[i] < 0.0) y[i] = 0.0;
    return y;
}

Tensor relu_backward(const Tensor& dy, const Tensor& x) {
    if (!dy.same_shape(x)) throw ShapeMismatch("relu backward");
    Tensor dx = dy;
    for (size_t i = 0; i < dx.size(); ++i)
        if (x[i] <= 0.0) dx[i] = 0.0;
    return dx;
}

size_t conv_out_size(size_t in, size_t kernel, size_t stride, Padding pad) {
    if (stride == 0) throw ShapeMismatch("stride 0");
    if (pad == Padding::Same) return (in + stride - 1) / stride;
    if (in < kernel) throw ShapeMismatch("valid conv: input smaller than kernel");
    return (in - kernel) / stride + 1;
}

namespace {

// Rows: one per output position (b, oh, ow). Columns: (kh, kw, cin).
Tensor im2col(const Tensor& x, size_t kh, size_t kw, const Conv2dSpec& spec, size_t oh, size_t ow) {
    const size_t b = x.dim(0), h = x.dim(1), w = x.dim(2), cin = x.dim(3);
    const size_t ph = pad_before(h, kh, spec.stride, oh, spec.padding);
    const size_t pw = pad_before(w, kw, spec.stride, ow, spec.padding);
    Tensor cols({b * oh * ow, kh * kw * cin});
    double* out = cols.data();
    const double* in = x.data();
    for (size_t bi = 0; bi < b; ++bi) {
        for (size_t oy = 0; oy < oh; ++oy) {
            for (size_t ox = 0; ox < ow; ++ox) {
                double* row = out + ((bi * oh + oy) * ow + ox) * (kh * kw * cin);
                for (size_t ky = 0; ky < kh; ++ky) {
                    long iy = static_cast<long>(oy * spec.stride + ky) - static_cast<long>(ph);
                    for (size_t kx = 0; kx < kw; ++kx) {
                        long ix = static_cast<long>(ox * spec.stride + kx) - static_cast<long>(pw);
                        double* dst = row + (ky * kw + kx) * cin;
                        if (iy < 0 || iy >= static_cast<long>(h) || ix < 0 ||
                            ix >= static_cast<long>(w)) {
                            std::fill(dst, dst + cin, 0.0);
                        } else {
                            const double* src = in + ((bi * h + iy) * w + ix) * cin;
                            std::copy(src, src + cin, dst);
                        }
                    }
                }
            }
        }
    }
    return cols;
}

void col2im_add(Tensor& dx, const Tensor& cols, size_t kh, size_t kw, const Conv2dSpec& spec,
                size_t oh, size_t ow) {
    const size_t b = dx.dim(0), h = dx.dim(1), w = dx.dim(2), cin = dx.dim(3);
    const size_t ph = pad_before(h, kh, spec.stride, oh, spec.padding);
    const size_t pw = pad_before(w, kw, spec.stride, ow, spec.padding);
    const double* in = cols.data();
    double* out = dx.data();
    for (size_t bi = 0; bi < b; ++bi) {
        for (size_t oy = 0; oy < oh; ++oy) {
            for (size_t ox = 0; ox < ow; ++ox) {
                const double* row = in + ((bi * oh + oy) * ow + ox) * (kh * kw * cin);
                for (size_t ky = 0; ky < kh; ++ky) {
                    long iy = static_cast<long>(oy * spec.stride + ky) - static_cast<long>(ph);
                    if (iy < 0 || iy >= static_cast<long>(h)) continue;
                    for (size_t kx = 0; kx < kw; ++kx) {
                        long ix = static_cast<long>(ox * spec.stride + kx) - static_cast<long>(pw);
                        if (ix < 0 || ix >= static_cast<long>(w)) continue;
                        const double* src = row + (ky * kw + kx) * cin;
                        double* dst = out + ((bi * h + iy) * w + ix) * cin;
                        for (size_t c = 0; c < cin; ++c) dst[c] += src[c];
                    }
                }
            }
        }
    }
}

}  // namespace

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, const Conv2dSpec& spec) {
    require_rank(x, 4, "conv2d x");
    require_rank(w, 4, "conv2d w");
    if (x.dim(3) != w.dim(2)) throw ShapeMismatch("conv2d channels: x " + x.shape_str() + " w " + w.shape_str());
    if (b.size() != w.dim(3)) throw ShapeMismatch("conv2d bias");
    const size_t kh = w.dim(0), kw = w.dim(1), cout = w.dim(3);
    const size_t oh = conv_out_size(x.dim(1), kh, spec.stride, spec.padding);
    const size_t ow = conv_out_size(x.dim(2), kw, spec.stride, spec.padding);
    Tensor cols = im2col(x, kh, kw, spec, oh, ow);
    Tensor wmat = w.reshaped({kh * kw * x.dim(3), cout});
    Tensor y2 = matmul(cols, wmat);
    const size_t rows = y2.dim(0);
    for (size_t r = 0; r < rows; ++r)
        for (size_t c = 0; c < cout; ++c) y2[r * cout + c] += b[c];
    return y2.reshaped({x.dim(0), oh, ow, cout});
}

Conv2dGrads conv2d_backward(const Tensor& dy, const Tensor& x, const Tensor& w,
                            const Conv2dSpec& spec) {
    require_rank(dy, 4, "conv2d dy");
    const size_t kh = w.dim(0), kw = w.dim(1), cin = w.dim(2), cout = w.dim(3);
    const size_t oh = dy.dim(1), ow = dy.dim(2);
    Tensor dy2 = dy.reshaped({dy.dim(0) * oh * ow, cout});
    Tensor cols = im2col(x, kh, kw, spec, oh, ow);
    Conv2dGrads g;
    g.db = colsum(dy2);
    g.dw = matmul(transpose(cols), dy2).reshaped({kh, kw, cin, cout});
    Tensor dcols = matmul(dy2, transpose(w.reshaped({kh * kw * cin, cout})));
    g.dx = Tensor(x.shape());
    col2im_add(g.dx, dcols, kh, kw, spec, oh, ow);
    return g;
}

MaxPoolResult maxpool_forward(const Tensor& x, size_t kernel, size_t stride, Padding pad) {
    require_rank(x, 4, "maxpool x");
    const size_t b = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    const size_t oh = conv_out_size(h, kernel, stride, pad);
    const size_t ow = conv_out_size(w, kernel, stride, pad);
    const size_t ph = pad_before(h, kernel, stride, oh, pad);
    const size_t pw = pad_before(w, kernel, stride, ow, pad);
    MaxPoolResult r;
    r.y = Tensor({b, oh, ow, c});
    r.argmax.assign(r.y.size(), 0);
    const double* in = x.data();
    double* out = r.y.data();
    for (size_t bi = 0; bi < b; ++bi) {
        for (size_t oy = 0; oy < oh; ++oy) {
            for (size_t ox = 0; ox < ow; ++ox) {
                for (size_t ci = 0; ci < c; ++ci) {
                    double best = -std::numeric_limits<double>::infinity();
                    size_t best_idx = 0;
                    for (size_t ky = 0; ky < kernel; ++ky) {
                        long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(ph);
                        if (iy < 0 || iy >= static_cast<long>(h)) continue;
                        for (size_t kx = 0; kx < kernel; ++kx) {
                            long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pw);
                            if (ix < 0 || ix >= static_cast<long>(w)) continue;
                            size_t idx = ((bi * h + iy) * w + ix) * c + ci;
                            if (in[idx] > best) {
                                best = in[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    size_t oidx = ((bi * oh + oy) * ow + ox) * c + ci;
                    out[oidx] = best;
                    r.argmax[oidx] = best_idx;
                }
            }
        }
    }
    return r;
}

Tensor maxpool_backward(const Tensor& dy, const Tensor& x, const MaxPoolResult& fwd) {
    if (!dy.same_shape(fwd.y)) throw ShapeMismatch("maxpool backward dy");
    Tensor dx(x.shape());
    for (size_t i = 0; i < dy.size(); ++i) dx[fwd.argmax[i]] += dy[i];
    return dx;
}

Tensor batch_norm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                          BatchNormCache* cache) {
    require_rank(x, 2, "batch_norm x");
    const size_t rows = x.dim(0), cols = x.dim(1);
    if (rows < 2) throw DegenerateBatch("batch_norm training needs >= 2 rows, got " +
                                        std::to_string(rows));
    if (gamma.size() != cols || beta.size() != cols) throw ShapeMismatch("batch_norm gamma/beta");
    Tensor mean({cols}), var({cols});
    for (size_t r = 0; r < rows; ++r)
        for (size_t c = 0; c < cols; ++c) mean[c] += x[r * cols + c];
    mean *= 1.0 / static_cast<double>(rows);
    for (size_t r = 0; r < rows; ++r)
        for (size_t c = 0; c < cols; ++c) {
            double d = x[r * cols + c] - mean[c];
            var[c] += d * d;
        }
    var *= 1.0 / static_cast<double>(rows);
    Tensor inv_std({cols});
    for (size_t c = 0; c < cols; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
    Tensor xhat({rows, cols}), y({rows, cols});
    for (size_t r = 0; r < rows; ++r)
        for (size_t c = 0; c < cols; ++c) {
            double v = (x[r * cols + c] - mean[c]) * inv_std[c];
            xhat[r * cols + c] = v;
            y[r * cols + c] = gamma[c] * v + beta[c];
        }
    if (cache) {
        cache->xhat = xhat;
        cache->inv_std = inv_std;
        cache->mean = mean;
        cache->var = var;
    }
    return y;
}

Tensor batch_norm_infer(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                        const Tensor& running_mean, const Tensor& running_var, double eps) {
    require_rank(x, 2, "batch_norm x");
    const size_t rows = x.dim(0), cols = x.dim(1);
    Tensor y({rows, cols});
    for (size_t c = 0; c < cols; ++c) {
        double inv = 1.0 / std::sqrt(running_var[c] + eps);
        for (size_t r = 0; r < rows; ++r)
            y[r * cols + c] = gamma[c] * (x[r * cols + c] - running_mean[c]) * inv + beta[c];
    }
    return y;
}

BatchNormGrads batch_norm_backward(const Tensor& dy, const BatchNormCache& cache,
                                   const Tensor& gamma) {
    const size_t rows = dy.dim(0), cols = dy.dim(1);
    BatchNormGrads g;
    g.dgamma = Tensor({cols});
    g.dbeta = Tensor({cols});
    Tensor sum_dxhat({cols}), sum_dxhat_xhat({cols});
    Tensor dxhat({rows, cols});
    for (size_t r = 0; r < rows; ++r)
        for (size_t c = 0; c < cols; ++c) {
            const size_t i = r * cols + c;
            g.dgamma[c] += dy[i] * cache.xhat[i];
            g.dbeta[c] += dy[i];
            dxhat[i] = dy[i] * gamma[c];
            sum_dxhat[c] += dxhat[i];
            sum_dxhat_xhat[c] += dxhat[i] * cache.xhat[i];
        }
    g.dx = Tensor({rows, cols});
    const double n = static_cast<double>(rows);
    for (size_t r = 0; r < rows; ++r)
        for (size_t c = 0; c < cols; ++c) {
            const size_t i = r * cols + c;
            g.dx[i] = cache.inv_std[c] / n *
                      (n * dxhat[i] - sum_dxhat[c] - cache.xhat[i] * sum_dxhat_xhat[c]);
        }
    return g;
}

BatchNormGrads batch_norm_infer_backward(const Tensor& dy, const Tensor& x, const Tensor& gamma,
                                         const Tensor& running_mean, const Tensor& running_var,
                                         double eps) {
    const size_t rows = dy.dim(0), cols = dy.dim(1);
    BatchNormGrads g;
    g.dx = Tensor({rows, cols});
    g.dgamma = Tensor({cols});
    g.dbeta = Tensor({cols});
    for (size_t c = 0; c < cols; ++c) {
        double inv = 1.0 / std::sqrt(running_var[c] + eps);
        for (size_t r = 0; r < rows; ++r) {
            const size_t i = r * cols + c;
            g.dx[i] = dy[i] * gamma[c] * inv;
            g.dgamma[c] += dy[i] * (x[i] - running_mean[c]) * inv;
            g.dbeta[c] += dy[i];
        }
    }
    return g;
}

LstmState lstm_cell_forward(const Tensor& x, const LstmState& state, const LstmWeights& w,
                            LstmCache* cache) {
    require_rank(x, 2, "lstm x");
    const size_t bsz = x.dim(0), d = x.dim(1);
    const size_t hid = w.wh.dim(0);
    if (w.wx.dim(0) != d || w.wx.dim(1) != 4 * hid || w.wh.dim(1) != 4 * hid ||
        w.b.size() != 4 * hid)
        throw ShapeMismatch("lstm weights");
    require_shape(state.hidden, {bsz, hid}, "lstm hidden");
    require_shape(state.cell, {bsz, hid}, "lstm cell");

    Tensor pre = matmul(x, w.wx);
    pre += matmul(state.hidden, w.wh);
    for (size_t r = 0; r < bsz; ++r)
        for (size_t c = 0; c < 4 * hid; ++c) pre[r * 4 * hid + c] += w.b[c];

    Tensor i({bsz, hid}), f({bsz, hid}), g({bsz, hid}), o({bsz, hid});
    Tensor c_new({bsz, hid}), tanh_c({bsz, hid}), h_new({bsz, hid});
    for (size_t r = 0; r < bsz; ++r) {
        const double* p = pre.data() + r * 4 * hid;
        for (size_t k = 0; k < hid; ++k) {
            const size_t idx = r * hid + k;
            i[idx] = sigmoid(p[k]);
            f[idx] = sigmoid(p[hid + k]);
            g[idx] = std::tanh(p[2 * hid + k]);
            o[idx] = sigmoid(p[3 * hid + k]);
            c_new[idx] = f[idx] * state.cell[idx] + i[idx] * g[idx];
            tanh_c[idx] = std::tanh(c_new[idx]);
            h_new[idx] = o[idx] * tanh_c[idx];
        }
    }
    if (cache) {
        cache->x = x;
        cache->h_prev = state.hidden;
        cache->c_prev = state.cell;
        cache->i = i;
        cache->f = f;
        cache->g = g;
        cache->o = o;
        cache->c_new = c_new;
        cache->tanh_c = tanh_c;
    }
    return LstmState{h_new, c_new};
}

LstmGrads lstm_cell_backward(const Tensor& dh, const Tensor& dc, const LstmCache& cache,
                             const LstmWeights& w) {
    const size_t bsz = dh.dim(0), hid = dh.dim(1);
    Tensor dpre({bsz, 4 * hid});
    LstmGrads out;
    out.dc_prev = Tensor({bsz, hid});
    for (size_t r = 0; r < bsz; ++r) {
        for (size_t k = 0; k < hid; ++k) {
            const size_t idx = r * hid + k;
            const double i = cache.i[idx], f = cache.f[idx], g = cache.g[idx], o = cache.o[idx];
            const double tc = cache.tanh_c[idx];
            double dct = dc[idx] + dh[idx] * o * (1.0 - tc * tc);
            double di = dct * g;
            double df = dct * cache.c_prev[idx];
            double dg = dct * i;
            double do_ = dh[idx] * tc;
            out.dc_prev[idx] = dct * f;
            double* p = dpre.data() + r * 4 * hid;
            p[k] = di * i * (1.0 - i);
            p[hid + k] = df * f * (1.0 - f);
            p[2 * hid + k] = dg * (1.0 - g * g);
            p[3 * hid + k] = do_ * o * (1.0 - o);
        }
    }
    out.dx = matmul(dpre, transpose(w.wx));
    out.dh_prev = matmul(dpre, transpose(w.wh));
    out.dwx = matmul(transpose(cache.x), dpre);
    out.dwh = matmul(transpose(cache.h_prev), dpre);
    out.db = colsum(dpre);
    return out;
}

SoftmaxCE softmax_cross_entropy(const Tensor& logits, const std::vector<size_t>& labels) {
    require_rank(logits, 2, "softmax logits");
    const size_t bsz = logits.dim(0), k = logits.dim(1);
    if (labels.size() != bsz) throw ShapeMismatch("softmax labels count");
    for (size_t lbl : labels)
        if (lbl >= k)
            throw LabelOutOfRange("label " + std::to_string(lbl) + " with " + std::to_string(k) +
                                  " classes");
    SoftmaxCE out;
    out.probs = Tensor({bsz, k});
    out.dlogits = Tensor({bsz, k});
    double total = 0.0;
    for (size_t r = 0; r < bsz; ++r) {
        const double* row = logits.data() + r * k;
        double mx = row[0];
        for (size_t c = 1; c < k; ++c) mx = std::max(mx, row[c]);
        double denom = 0.0;
        for (size_t c = 0; c < k; ++c) denom += std::exp(row[c] - mx);
        double log_denom = std::log(denom);
        for (size_t c = 0; c < k; ++c) out.probs[r * k + c] = std::exp(row[c] - mx) / denom;
        total += log_denom - (row[labels[r]] - mx);
    }
    out.loss = total / static_cast<double>(bsz);
    for (size_t r = 0; r < bsz; ++r)
        for (size_t c = 0; c < k; ++c)
            out.dlogits[r * k + c] =
                (out.probs[r * k + c] - (labels[r] == c ? 1.0 : 0.0)) / static_cast<double>(bsz);
    return out;
}

Tensor gather_rows(const Tensor& x, const std::vector<size_t>& idx) {
    require_rank(x, 2, "gather_rows");
    const size_t cols = x.dim(1);
    Tensor out({idx.size(), cols});
    for (size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] >= x.dim(0)) throw ShapeMismatch("gather_rows index out of range");
        std::copy(x.data() + idx[r] * cols, x.data() + (idx[r] + 1) * cols,
                  out.data() + r * cols);
    }
    return out;
}

void scatter_add_rows(Tensor& dst, const std::vector<size_t>& idx, const Tensor& src) {
    const size_t cols = dst.dim(1);
    if (src.dim(0) != idx.size() || src.dim(1) != cols) throw ShapeMismatch("scatter_add_rows");
    for (size_t r = 0; r < idx.size(); ++r) {
        double* d = dst.data() + idx[r] * cols;
        const double* s = src.data() + r * cols;
        for (size_t c = 0; c < cols; ++c) d[c] += s[c];
    }
}

Tensor concat_cols(const std::vector<const Tensor*>& parts) {
    if (parts.empty()) throw ShapeMismatch("concat_cols: no parts");
    const size_t rows = parts[0]->dim(0);
    size_t cols = 0;
    for (const Tensor* p : parts) {
        if (p->rank() != 2 || p->dim(0) != rows) throw ShapeMismatch("concat_cols rows");
        cols += p->dim(1);
    }
    Tensor out({rows, cols});
    for (size_t r = 0; r < rows; ++r) {
        double* dst = out.data() + r * cols;
        for (const Tensor* p : parts) {
            const size_t pc = p->dim(1);
            std::copy(p->data() + r * pc, p->data() + (r + 1) * pc, dst);
            dst += pc;
        }
    }
    return out;
}

Tensor sum_row_groups(const Tensor& x, size_t group, double scale) {
    require_rank(x, 2, "sum_row_groups");
    if (group == 0 || x.dim(0) % group != 0) throw ShapeMismatch("sum_row_groups group size");
    const size_t out_rows = x.dim(0) / group, cols = x.dim(1);
    Tensor out({out_rows, cols});
    for (size_t r = 0; r < out_rows; ++r) {
        double* dst = out.data() + r * cols;
        for (size_t gi = 0; gi < group; ++gi) {
            const double* src = x.data() + (r * group + gi) * cols;
            for (size_t c = 0; c < cols; ++c) dst[c] += src[c];
        }
        if (scale != 1.0)
            for (size_t c = 0; c < cols; ++c) dst[c] *= scale;
    }
    return out;
}

Tensor colsum(const Tensor& x) {
    require_rank(x, 2, "colsum");
    const size_t rows = x.dim(0), cols = x.dim(1);
    Tensor out({cols});
    for (size_t r = 0; r < rows; ++r)
        for (size_t c = 0; c < cols; ++c) out[c] += x[r * cols + c];
    return out;
}

}  // namespace prnet
