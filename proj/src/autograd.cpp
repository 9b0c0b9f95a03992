#include "poseforge/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include <Eigen/Dense>

namespace poseforge::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

int conv_out(int n, int k, int s, int p) { return (n + 2 * p - k) / s + 1; }

/// Rows indexed (c, ki, kj); columns indexed by output position.
RowMat im2col(const Tensor& x, int k, int s, int p, int ho, int wo) {
    const int C = x.channels(), H = x.height(), W = x.width();
    RowMat cols = RowMat::Zero(static_cast<Eigen::Index>(C) * k * k, static_cast<Eigen::Index>(ho) * wo);
    for (int c = 0; c < C; ++c)
        for (int ki = 0; ki < k; ++ki)
            for (int kj = 0; kj < k; ++kj) {
                double* row = cols.row((c * k + ki) * k + kj).data();
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * s - p + ki;
                    if (iy < 0 || iy >= H) continue;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * s - p + kj;
                        if (ix >= 0 && ix < W) row[oy * wo + ox] = x.at(c, iy, ix);
                    }
                }
            }
    return cols;
}

/// Adjoint of im2col: scatters columns back into a zeroed {C, H, W} image.
void col2im(const RowMat& cols, Tensor& x, int k, int s, int p, int ho, int wo) {
    const int C = x.channels(), H = x.height(), W = x.width();
    for (int c = 0; c < C; ++c)
        for (int ki = 0; ki < k; ++ki)
            for (int kj = 0; kj < k; ++kj) {
                const double* row = cols.row((c * k + ki) * k + kj).data();
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * s - p + ki;
                    if (iy < 0 || iy >= H) continue;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * s - p + kj;
                        if (ix >= 0 && ix < W) x.at(c, iy, ix) += row[oy * wo + ox];
                    }
                }
            }
}

void require(bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::ShapeMismatch, what);
}

void accumulate(Parameter& p, const double* g) {
    if (!p.trainable) return;
    for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad.data[i] += g[i];
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace

Tensor::Tensor(std::vector<int> s, double fill) : shape(std::move(s)) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    data.assign(n, fill);
}

double silu_value(double x) { return x * sigmoid(x); }

Var Tape::constant(Tensor value) { return record(std::move(value), nullptr); }

Var Tape::record(Tensor value, Backward backward) {
    Tensor g(value.shape);
    nodes_.push_back({std::move(value), std::move(g), std::move(backward)});
    return {static_cast<int>(nodes_.size()) - 1};
}

void Tape::backward(Var out) {
    Node& o = nodes_.at(static_cast<std::size_t>(out.id));
    require(o.value.size() == 1, "backward needs a scalar output");
    o.grad.data[0] += 1.0;
    for (int i = out.id; i >= 0; --i)
        if (nodes_[static_cast<std::size_t>(i)].backward) nodes_[static_cast<std::size_t>(i)].backward(*this, i);
}

Tensor conv2d_forward(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride, int pad) {
    const int cout = weight.shape[0], cin = weight.shape[1], k = weight.shape[2];
    require(x.shape.size() == 3 && x.channels() == cin, "conv2d input channels");
    const int ho = conv_out(x.height(), k, stride, pad), wo = conv_out(x.width(), k, stride, pad);
    require(ho > 0 && wo > 0, "conv2d output is empty");
    const RowMat cols = im2col(x, k, stride, pad, ho, wo);
    Tensor y = Tensor::chw(cout, ho, wo);
    MapMat ym(y.data.data(), cout, static_cast<Eigen::Index>(ho) * wo);
    ym.noalias() = ConstMapMat(weight.data.data(), cout, static_cast<Eigen::Index>(cin) * k * k) * cols;
    for (int c = 0; c < cout; ++c) ym.row(c).array() += bias.data[c];
    return y;
}

Var conv2d(Tape& t, Var x, Parameter& weight, Parameter& bias, int stride, int pad) {
    const Tensor& xv = t.value(x);
    const int cout = weight.value.shape[0], cin = weight.value.shape[1], k = weight.value.shape[2];
    require(xv.shape.size() == 3 && xv.channels() == cin, "conv2d input channels for " + weight.name);
    const int ho = conv_out(xv.height(), k, stride, pad), wo = conv_out(xv.width(), k, stride, pad);
    require(ho > 0 && wo > 0, "conv2d output is empty");
    auto cols = std::make_shared<RowMat>(im2col(xv, k, stride, pad, ho, wo));
    Tensor y = Tensor::chw(cout, ho, wo);
    const Eigen::Index P = static_cast<Eigen::Index>(ho) * wo, R = static_cast<Eigen::Index>(cin) * k * k;
    MapMat ym(y.data.data(), cout, P);
    ym.noalias() = ConstMapMat(weight.value.data.data(), cout, R) * *cols;
    for (int c = 0; c < cout; ++c) ym.row(c).array() += bias.value.data[c];

    const int xid = x.id;
    const std::vector<int> xshape = xv.shape;
    return t.record(std::move(y), [&weight, &bias, cols, xid, xshape, stride, pad, k, cout, ho, wo, P, R](Tape& tp,
                                                                                                          int self) {
        const Tensor& gy = tp.grad(self);
        ConstMapMat gym(gy.data.data(), cout, P);
        if (weight.trainable) {
            RowMat gw = gym * cols->transpose();
            accumulate(weight, gw.data());
            Eigen::VectorXd gb = gym.rowwise().sum();
            accumulate(bias, gb.data());
        }
        RowMat gcols = ConstMapMat(weight.value.data.data(), cout, R).transpose() * gym;
        Tensor& gx = tp.grad(xid);
        (void)xshape;
        col2im(gcols, gx, k, stride, pad, ho, wo);
    });
}

Var conv_transpose2d(Tape& t, Var x, Parameter& weight, Parameter& bias, int stride, int pad) {
    const Tensor& xv = t.value(x);
    const int cin = weight.value.shape[0], cout = weight.value.shape[1], k = weight.value.shape[2];
    require(xv.shape.size() == 3 && xv.channels() == cin, "conv_transpose2d input channels for " + weight.name);
    const int hi = xv.height(), wi = xv.width();
    const int ho = (hi - 1) * stride - 2 * pad + k, wo = (wi - 1) * stride - 2 * pad + k;
    const Eigen::Index Pin = static_cast<Eigen::Index>(hi) * wi, R = static_cast<Eigen::Index>(cout) * k * k;

    ConstMapMat xm(xv.data.data(), cin, Pin);
    ConstMapMat wm(weight.value.data.data(), cin, R);
    RowMat cols = wm.transpose() * xm;
    Tensor y = Tensor::chw(cout, ho, wo);
    col2im(cols, y, k, stride, pad, hi, wi);
    for (int c = 0; c < cout; ++c)
        for (int i = 0; i < ho * wo; ++i) y.data[static_cast<std::size_t>(c) * ho * wo + i] += bias.value.data[c];

    const int xid = x.id;
    return t.record(std::move(y), [&weight, &bias, xid, stride, pad, k, cin, cout, hi, wi, ho, wo, Pin, R](Tape& tp,
                                                                                                           int self) {
        const Tensor& gy = tp.grad(self);
        const RowMat gcols = im2col(gy, k, stride, pad, hi, wi);
        ConstMapMat wm(weight.value.data.data(), cin, R);
        Tensor& gx = tp.grad(xid);
        MapMat gxm(gx.data.data(), cin, Pin);
        gxm.noalias() += wm * gcols;
        if (weight.trainable) {
            ConstMapMat xm(tp.value(Var{xid}).data.data(), cin, Pin);
            RowMat gw = xm * gcols.transpose();
            accumulate(weight, gw.data());
            std::vector<double> gb(static_cast<std::size_t>(cout), 0.0);
            for (int c = 0; c < cout; ++c)
                for (int i = 0; i < ho * wo; ++i) gb[c] += gy.data[static_cast<std::size_t>(c) * ho * wo + i];
            accumulate(bias, gb.data());
        }
    });
}

Var group_norm(Tape& t, Var x, Parameter& gamma, Parameter& beta, int channels_per_group, double eps) {
    const Tensor& xv = t.value(x);
    const int C = xv.channels();
    require(C % channels_per_group == 0, "group_norm channels not divisible by group size");
    require(static_cast<int>(gamma.value.size()) == C, "group_norm gamma size for " + gamma.name);
    const int G = C / channels_per_group;
    const std::size_t hw = static_cast<std::size_t>(xv.height()) * xv.width();
    const std::size_t n = hw * channels_per_group;

    auto xhat = std::make_shared<std::vector<double>>(xv.size());
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(G));
    Tensor y(xv.shape);
    for (int g = 0; g < G; ++g) {
        const std::size_t off = static_cast<std::size_t>(g) * n;
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += xv.data[off + i];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) var += (xv.data[off + i] - mean) * (xv.data[off + i] - mean);
        var /= static_cast<double>(n);
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[g] = is;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t idx = off + i;
            const int c = static_cast<int>(idx / hw);
            (*xhat)[idx] = (xv.data[idx] - mean) * is;
            y.data[idx] = (*xhat)[idx] * gamma.value.data[c] + beta.value.data[c];
        }
    }

    const int xid = x.id;
    return t.record(std::move(y), [&gamma, &beta, xhat, inv_std, xid, G, n, hw, C](Tape& tp, int self) {
        const Tensor& gy = tp.grad(self);
        Tensor& gx = tp.grad(xid);
        std::vector<double> gg(static_cast<std::size_t>(C), 0.0), gbeta(static_cast<std::size_t>(C), 0.0);
        for (int g = 0; g < G; ++g) {
            const std::size_t off = static_cast<std::size_t>(g) * n;
            double sum_d = 0.0, sum_dx = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t idx = off + i;
                const int c = static_cast<int>(idx / hw);
                const double dxhat = gy.data[idx] * gamma.value.data[c];
                sum_d += dxhat;
                sum_dx += dxhat * (*xhat)[idx];
                gg[c] += gy.data[idx] * (*xhat)[idx];
                gbeta[c] += gy.data[idx];
            }
            const double inv_n = 1.0 / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t idx = off + i;
                const int c = static_cast<int>(idx / hw);
                const double dxhat = gy.data[idx] * gamma.value.data[c];
                gx.data[idx] += (*inv_std)[g] * (dxhat - inv_n * sum_d - (*xhat)[idx] * inv_n * sum_dx);
            }
        }
        accumulate(gamma, gg.data());
        accumulate(beta, gbeta.data());
    });
}

Var silu(Tape& t, Var x) {
    const Tensor& xv = t.value(x);
    Tensor y(xv.shape);
    for (std::size_t i = 0; i < xv.size(); ++i) y.data[i] = silu_value(xv.data[i]);
    const int xid = x.id;
    return t.record(std::move(y), [xid](Tape& tp, int self) {
        const Tensor& gy = tp.grad(self);
        const Tensor& xv = tp.value(Var{xid});
        Tensor& gx = tp.grad(xid);
        for (std::size_t i = 0; i < xv.size(); ++i) {
            const double s = sigmoid(xv.data[i]);
            gx.data[i] += gy.data[i] * s * (1.0 + xv.data[i] * (1.0 - s));
        }
    });
}

Var add(Tape& t, Var a, Var b) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    require(av.same_shape(bv), "add operands differ in shape");
    Tensor y = av;
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += bv.data[i];
    const int aid = a.id, bid = b.id;
    return t.record(std::move(y), [aid, bid](Tape& tp, int self) {
        const Tensor& gy = tp.grad(self);
        Tensor& ga = tp.grad(aid);
        for (std::size_t i = 0; i < gy.size(); ++i) ga.data[i] += gy.data[i];
        Tensor& gb = tp.grad(bid);
        for (std::size_t i = 0; i < gy.size(); ++i) gb.data[i] += gy.data[i];
    });
}

Var add_channel_bias(Tape& t, Var x, Var v) {
    const Tensor& xv = t.value(x);
    const Tensor& vv = t.value(v);
    require(static_cast<int>(vv.size()) == xv.channels(), "channel bias size");
    Tensor y = xv;
    const std::size_t hw = static_cast<std::size_t>(xv.height()) * xv.width();
    for (int c = 0; c < xv.channels(); ++c)
        for (std::size_t i = 0; i < hw; ++i) y.data[c * hw + i] += vv.data[c];
    const int xid = x.id, vid = v.id, C = xv.channels();
    return t.record(std::move(y), [xid, vid, C, hw](Tape& tp, int self) {
        const Tensor& gy = tp.grad(self);
        Tensor& gx = tp.grad(xid);
        for (std::size_t i = 0; i < gy.size(); ++i) gx.data[i] += gy.data[i];
        Tensor& gv = tp.grad(vid);
        for (int c = 0; c < C; ++c) {
            double s = 0.0;
            for (std::size_t i = 0; i < hw; ++i) s += gy.data[c * hw + i];
            gv.data[c] += s;
        }
    });
}

Var concat_channels(Tape& t, Var a, Var b) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    require(av.height() == bv.height() && av.width() == bv.width(), "concat spatial sizes differ");
    Tensor y = Tensor::chw(av.channels() + bv.channels(), av.height(), av.width());
    std::copy(av.data.begin(), av.data.end(), y.data.begin());
    std::copy(bv.data.begin(), bv.data.end(), y.data.begin() + static_cast<std::ptrdiff_t>(av.size()));
    const int aid = a.id, bid = b.id;
    const std::size_t na = av.size();
    return t.record(std::move(y), [aid, bid, na](Tape& tp, int self) {
        const Tensor& gy = tp.grad(self);
        Tensor& ga = tp.grad(aid);
        for (std::size_t i = 0; i < na; ++i) ga.data[i] += gy.data[i];
        Tensor& gb = tp.grad(bid);
        for (std::size_t i = 0; i < gb.size(); ++i) gb.data[i] += gy.data[na + i];
    });
}

Var upsample2x(Tape& t, Var x, int h, int w) {
    const Tensor& xv = t.value(x);
    require(h <= 2 * xv.height() && w <= 2 * xv.width(), "upsample target larger than 2x");
    const int C = xv.channels();
    Tensor y = Tensor::chw(C, h, w);
    for (int c = 0; c < C; ++c)
        for (int yy = 0; yy < h; ++yy)
            for (int xx = 0; xx < w; ++xx) y.at(c, yy, xx) = xv.at(c, yy / 2, xx / 2);
    const int xid = x.id;
    return t.record(std::move(y), [xid, C, h, w](Tape& tp, int self) {
        const Tensor& gy = tp.grad(self);
        Tensor& gx = tp.grad(xid);
        for (int c = 0; c < C; ++c)
            for (int yy = 0; yy < h; ++yy)
                for (int xx = 0; xx < w; ++xx) gx.at(c, yy / 2, xx / 2) += gy.at(c, yy, xx);
    });
}

Var linear(Tape& t, Var x, Parameter& weight, Parameter& bias) {
    const Tensor& xv = t.value(x);
    const int M = weight.value.shape[0], N = weight.value.shape[1];
    require(static_cast<int>(xv.size()) == N, "linear input size for " + weight.name);
    Tensor y = Tensor::chw(M, 1, 1);
    for (int i = 0; i < M; ++i) {
        double s = bias.value.data[i];
        for (int j = 0; j < N; ++j) s += weight.value.data[static_cast<std::size_t>(i) * N + j] * xv.data[j];
        y.data[i] = s;
    }
    const int xid = x.id;
    return t.record(std::move(y), [&weight, &bias, xid, M, N](Tape& tp, int self) {
        const Tensor& gy = tp.grad(self);
        const Tensor& xv = tp.value(Var{xid});
        Tensor& gx = tp.grad(xid);
        std::vector<double> gw(static_cast<std::size_t>(M) * N);
        for (int i = 0; i < M; ++i)
            for (int j = 0; j < N; ++j) {
                gw[static_cast<std::size_t>(i) * N + j] = gy.data[i] * xv.data[j];
                gx.data[j] += gy.data[i] * weight.value.data[static_cast<std::size_t>(i) * N + j];
            }
        accumulate(weight, gw.data());
        accumulate(bias, gy.data.data());
    });
}

Var fixed_channel_map(Tape& t, Var x, const Parameter& matrix) {
    const Tensor& xv = t.value(x);
    const int cout = matrix.value.shape[0], cin = matrix.value.shape[1];
    require(xv.channels() == cin, "fixed_channel_map input channels");
    const Eigen::Index P = static_cast<Eigen::Index>(xv.height()) * xv.width();
    Tensor y = Tensor::chw(cout, xv.height(), xv.width());
    MapMat(y.data.data(), cout, P).noalias() =
        ConstMapMat(matrix.value.data.data(), cout, cin) * ConstMapMat(xv.data.data(), cin, P);
    const int xid = x.id;
    return t.record(std::move(y), [&matrix, xid, cin, cout, P](Tape& tp, int self) {
        const Tensor& gy = tp.grad(self);
        Tensor& gx = tp.grad(xid);
        MapMat(gx.data.data(), cin, P).noalias() +=
            ConstMapMat(matrix.value.data.data(), cout, cin).transpose() * ConstMapMat(gy.data.data(), cout, P);
    });
}

Var masked_mse(Tape& t, Var pred, const Tensor& target, const std::vector<bool>& mask) {
    const Tensor& pv = t.value(pred);
    require(pv.same_shape(target), "mse prediction and target differ in shape");
    require(static_cast<int>(mask.size()) == pv.channels(), "mse mask size");
    const std::size_t hw = static_cast<std::size_t>(pv.height()) * pv.width();
    const auto active = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
    const double denom = static_cast<double>(active * hw);
    double s = 0.0;
    for (int c = 0; c < pv.channels(); ++c) {
        if (!mask[c]) continue;
        for (std::size_t i = 0; i < hw; ++i) {
            const double d = pv.data[c * hw + i] - target.data[c * hw + i];
            s += d * d;
        }
    }
    Tensor y({1, 1, 1}, active == 0 ? 0.0 : s / denom);
    const int pid = pred.id;
    auto tgt = std::make_shared<Tensor>(target);
    return t.record(std::move(y), [pid, tgt, mask, hw, denom, active](Tape& tp, int self) {
        if (active == 0) return;
        const double g = tp.grad(self).data[0];
        const Tensor& pv = tp.value(Var{pid});
        Tensor& gp = tp.grad(pid);
        for (int c = 0; c < pv.channels(); ++c) {
            if (!mask[c]) continue;
            for (std::size_t i = 0; i < hw; ++i)
                gp.data[c * hw + i] += g * 2.0 * (pv.data[c * hw + i] - tgt->data[c * hw + i]) / denom;
        }
    });
}

Var weighted_sum(Tape& t, Var a, double wa, Var b, double wb) {
    require(t.value(a).size() == 1 && t.value(b).size() == 1, "weighted_sum expects scalars");
    Tensor y({1, 1, 1}, wa * t.value(a).data[0] + wb * t.value(b).data[0]);
    const int aid = a.id, bid = b.id;
    return t.record(std::move(y), [aid, bid, wa, wb](Tape& tp, int self) {
        const double g = tp.grad(self).data[0];
        tp.grad(aid).data[0] += wa * g;
        tp.grad(bid).data[0] += wb * g;
    });
}

} // namespace poseforge::nn
