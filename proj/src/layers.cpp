#include "slideadapt/layers.hpp"

#include <cmath>

#include <Eigen/Core>

#include "slideadapt/errors.hpp"

namespace slideadapt {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

Conv2d::Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad)
    : in_ch_(in_ch),
      out_ch_(out_ch),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      weight_({out_ch, in_ch * kernel * kernel}),
      bias_({out_ch}),
      wgrad_({out_ch, in_ch * kernel * kernel}),
      bgrad_({out_ch}) {}

void Conv2d::init(Rng& rng) {
    // He initialization for ReLU stacks.
    const double std = std::sqrt(2.0 / (in_ch_ * kernel_ * kernel_));
    weight_.fill_normal(rng, 0.0, std);
    bias_.zero();
}

Tensor Conv2d::forward(const Tensor& x) {
    if (x.ndim() != 4 || x.dim(1) != in_ch_) throw ShapeError("Conv2d: bad input shape");
    if (!x.all_finite()) throw NumericError("Conv2d: non-finite input");
    batch_ = x.dim(0);
    in_h_ = x.dim(2);
    in_w_ = x.dim(3);
    out_h_ = out_size(in_h_);
    out_w_ = out_size(in_w_);
    const int patch = in_ch_ * kernel_ * kernel_;
    const std::int64_t ncols = static_cast<std::int64_t>(batch_) * out_h_ * out_w_;

    cols_ = Tensor({patch, static_cast<int>(ncols)});
    for (int n = 0; n < batch_; ++n) {
        for (int oy = 0; oy < out_h_; ++oy) {
            for (int ox = 0; ox < out_w_; ++ox) {
                const std::int64_t col = (static_cast<std::int64_t>(n) * out_h_ + oy) * out_w_ + ox;
                int row = 0;
                for (int c = 0; c < in_ch_; ++c) {
                    for (int ky = 0; ky < kernel_; ++ky) {
                        const int iy = oy * stride_ + ky - pad_;
                        for (int kx = 0; kx < kernel_; ++kx, ++row) {
                            const int ix = ox * stride_ + kx - pad_;
                            double v = 0.0;
                            if (iy >= 0 && iy < in_h_ && ix >= 0 && ix < in_w_) v = x.at(n, c, iy, ix);
                            cols_[row * ncols + col] = v;
                        }
                    }
                }
            }
        }
    }

    Tensor y({batch_, out_ch_, out_h_, out_w_});
    CMapRM w(weight_.data(), out_ch_, patch);
    CMapRM cols(cols_.data(), patch, ncols);
    // y layout is (n, oc, oy, ox) while the GEMM result is (oc, n*oy*ox); scatter.
    MatRM prod = w * cols;
    for (int oc = 0; oc < out_ch_; ++oc) {
        const double b = bias_[oc];
        for (int n = 0; n < batch_; ++n)
            for (int oy = 0; oy < out_h_; ++oy)
                for (int ox = 0; ox < out_w_; ++ox)
                    y.at(n, oc, oy, ox) =
                        prod(oc, (static_cast<std::int64_t>(n) * out_h_ + oy) * out_w_ + ox) + b;
    }
    return y;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
    const int patch = in_ch_ * kernel_ * kernel_;
    const std::int64_t ncols = static_cast<std::int64_t>(batch_) * out_h_ * out_w_;

    MatRM gout(out_ch_, ncols);
    for (int oc = 0; oc < out_ch_; ++oc)
        for (int n = 0; n < batch_; ++n)
            for (int oy = 0; oy < out_h_; ++oy)
                for (int ox = 0; ox < out_w_; ++ox)
                    gout(oc, (static_cast<std::int64_t>(n) * out_h_ + oy) * out_w_ + ox) =
                        grad_out.at(n, oc, oy, ox);

    CMapRM cols(cols_.data(), patch, ncols);
    MapRM wg(wgrad_.data(), out_ch_, patch);
    wg += gout * cols.transpose();
    for (int oc = 0; oc < out_ch_; ++oc) bgrad_[oc] += gout.row(oc).sum();

    CMapRM w(weight_.data(), out_ch_, patch);
    MatRM gcols = w.transpose() * gout;

    Tensor gx({batch_, in_ch_, in_h_, in_w_});
    for (int n = 0; n < batch_; ++n) {
        for (int oy = 0; oy < out_h_; ++oy) {
            for (int ox = 0; ox < out_w_; ++ox) {
                const std::int64_t col = (static_cast<std::int64_t>(n) * out_h_ + oy) * out_w_ + ox;
                int row = 0;
                for (int c = 0; c < in_ch_; ++c) {
                    for (int ky = 0; ky < kernel_; ++ky) {
                        const int iy = oy * stride_ + ky - pad_;
                        for (int kx = 0; kx < kernel_; ++kx, ++row) {
                            const int ix = ox * stride_ + kx - pad_;
                            if (iy >= 0 && iy < in_h_ && ix >= 0 && ix < in_w_)
                                gx.at(n, c, iy, ix) += gcols(row, col);
                        }
                    }
                }
            }
        }
    }
    return gx;
}

void Conv2d::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".weight", &weight_, &wgrad_});
    out.push_back({prefix + ".bias", &bias_, &bgrad_});
}

BatchNorm2d::BatchNorm2d(int channels, double momentum, double eps)
    : channels_(channels),
      momentum_(momentum),
      eps_(eps),
      gamma_(Tensor::full({channels}, 1.0)),
      beta_({channels}),
      ggrad_({channels}),
      bgrad_({channels}),
      running_mean_({channels}),
      running_var_(Tensor::full({channels}, 1.0)) {}

Tensor BatchNorm2d::forward(const Tensor& x, Mode mode) {
    if (x.ndim() != 4 || x.dim(1) != channels_) throw ShapeError("BatchNorm2d: bad input shape");
    mode_ = mode;
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const double count = static_cast<double>(n) * h * w;

    Tensor y(x.shape());
    xhat_ = Tensor(x.shape());
    inv_std_.assign(static_cast<std::size_t>(channels_), 0.0);

    for (int c = 0; c < channels_; ++c) {
        double mean, var;
        if (mode == Mode::Train) {
            double s = 0.0;
            for (int i = 0; i < n; ++i)
                for (int yy = 0; yy < h; ++yy)
                    for (int xx = 0; xx < w; ++xx) s += x.at(i, c, yy, xx);
            mean = s / count;
            double sq = 0.0;
            for (int i = 0; i < n; ++i)
                for (int yy = 0; yy < h; ++yy)
                    for (int xx = 0; xx < w; ++xx) {
                        const double d = x.at(i, c, yy, xx) - mean;
                        sq += d * d;
                    }
            var = sq / count;  // biased, used for normalization
            const double unbiased = count > 1.0 ? sq / (count - 1.0) : var;
            running_mean_[c] = (1.0 - momentum_) * running_mean_[c] + momentum_ * mean;
            running_var_[c] = (1.0 - momentum_) * running_var_[c] + momentum_ * unbiased;
        } else {
            mean = running_mean_[c];
            var = running_var_[c];
        }
        const double inv = 1.0 / std::sqrt(var + eps_);
        inv_std_[static_cast<std::size_t>(c)] = inv;
        for (int i = 0; i < n; ++i)
            for (int yy = 0; yy < h; ++yy)
                for (int xx = 0; xx < w; ++xx) {
                    const double xh = (x.at(i, c, yy, xx) - mean) * inv;
                    xhat_.at(i, c, yy, xx) = xh;
                    y.at(i, c, yy, xx) = gamma_[c] * xh + beta_[c];
                }
    }
    return y;
}

Tensor BatchNorm2d::backward(const Tensor& grad_out) {
    const int n = grad_out.dim(0), h = grad_out.dim(2), w = grad_out.dim(3);
    const double count = static_cast<double>(n) * h * w;
    Tensor gx(grad_out.shape());

    for (int c = 0; c < channels_; ++c) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (int i = 0; i < n; ++i)
            for (int yy = 0; yy < h; ++yy)
                for (int xx = 0; xx < w; ++xx) {
                    const double g = grad_out.at(i, c, yy, xx);
                    sum_g += g;
                    sum_gx += g * xhat_.at(i, c, yy, xx);
                }
        ggrad_[c] += sum_gx;
        bgrad_[c] += sum_g;
        const double inv = inv_std_[static_cast<std::size_t>(c)];
        if (mode_ == Mode::Train) {
            const double k = gamma_[c] * inv / count;
            for (int i = 0; i < n; ++i)
                for (int yy = 0; yy < h; ++yy)
                    for (int xx = 0; xx < w; ++xx)
                        gx.at(i, c, yy, xx) = k * (count * grad_out.at(i, c, yy, xx) - sum_g -
                                                   xhat_.at(i, c, yy, xx) * sum_gx);
        } else {
            const double k = gamma_[c] * inv;
            for (int i = 0; i < n; ++i)
                for (int yy = 0; yy < h; ++yy)
                    for (int xx = 0; xx < w; ++xx) gx.at(i, c, yy, xx) = k * grad_out.at(i, c, yy, xx);
        }
    }
    return gx;
}

void BatchNorm2d::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".gamma", &gamma_, &ggrad_});
    out.push_back({prefix + ".beta", &beta_, &bgrad_});
}

void BatchNorm2d::collect_state(const std::string& prefix, std::vector<StateRef>& out) {
    out.push_back({prefix + ".running_mean", &running_mean_});
    out.push_back({prefix + ".running_var", &running_var_});
}

Tensor ReLU::forward(const Tensor& x) {
    Tensor y(x.shape());
    mask_.assign(static_cast<std::size_t>(x.numel()), false);
    for (std::int64_t i = 0; i < x.numel(); ++i) {
        if (x[i] > 0.0) {
            y[i] = x[i];
            mask_[static_cast<std::size_t>(i)] = true;
        }
    }
    return y;
}

Tensor ReLU::backward(const Tensor& grad_out) const {
    Tensor gx(grad_out.shape());
    for (std::int64_t i = 0; i < grad_out.numel(); ++i)
        gx[i] = mask_[static_cast<std::size_t>(i)] ? grad_out[i] : 0.0;
    return gx;
}

Tensor LeakyReLU::forward(const Tensor& x) {
    Tensor y(x.shape());
    mask_.assign(static_cast<std::size_t>(x.numel()), false);
    for (std::int64_t i = 0; i < x.numel(); ++i) {
        if (x[i] > 0.0) {
            y[i] = x[i];
            mask_[static_cast<std::size_t>(i)] = true;
        } else {
            y[i] = slope_ * x[i];
        }
    }
    return y;
}

Tensor LeakyReLU::backward(const Tensor& grad_out) const {
    Tensor gx(grad_out.shape());
    for (std::int64_t i = 0; i < grad_out.numel(); ++i)
        gx[i] = mask_[static_cast<std::size_t>(i)] ? grad_out[i] : slope_ * grad_out[i];
    return gx;
}

Tensor MaxPool2d::forward(const Tensor& x) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int oh = h / 2, ow = w / 2;
    shape_in_ = x.shape();
    Tensor y({n, c, oh, ow});
    argmax_.assign(static_cast<std::size_t>(y.numel()), 0);
    std::int64_t out_i = 0;
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox, ++out_i) {
                    double best = -1e300;
                    std::int64_t best_idx = 0;
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx) {
                            const int yy = oy * 2 + dy, xx = ox * 2 + dx;
                            const std::int64_t idx =
                                ((static_cast<std::int64_t>(i) * c + ch) * h + yy) * w + xx;
                            if (x[idx] > best) {
                                best = x[idx];
                                best_idx = idx;
                            }
                        }
                    y[out_i] = best;
                    argmax_[static_cast<std::size_t>(out_i)] = best_idx;
                }
    return y;
}

Tensor MaxPool2d::backward(const Tensor& grad_out) const {
    Tensor gx(shape_in_);
    for (std::int64_t i = 0; i < grad_out.numel(); ++i)
        gx[argmax_[static_cast<std::size_t>(i)]] += grad_out[i];
    return gx;
}

Tensor GlobalAvgPool::forward(const Tensor& x) {
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    shape_in_ = x.shape();
    Tensor y({n, c});
    const double inv = 1.0 / (static_cast<double>(h) * w);
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            double s = 0.0;
            for (int yy = 0; yy < h; ++yy)
                for (int xx = 0; xx < w; ++xx) s += x.at(i, ch, yy, xx);
            y.at(i, ch) = s * inv;
        }
    return y;
}

Tensor GlobalAvgPool::backward(const Tensor& grad_out) const {
    const int h = shape_in_[2], w = shape_in_[3];
    Tensor gx(shape_in_);
    const double inv = 1.0 / (static_cast<double>(h) * w);
    for (int i = 0; i < shape_in_[0]; ++i)
        for (int ch = 0; ch < shape_in_[1]; ++ch) {
            const double g = grad_out.at(i, ch) * inv;
            for (int yy = 0; yy < h; ++yy)
                for (int xx = 0; xx < w; ++xx) gx.at(i, ch, yy, xx) = g;
        }
    return gx;
}

Linear::Linear(int in_dim, int out_dim)
    : in_dim_(in_dim),
      out_dim_(out_dim),
      weight_({out_dim, in_dim}),
      bias_({out_dim}),
      wgrad_({out_dim, in_dim}),
      bgrad_({out_dim}) {}

void Linear::init(Rng& rng) {
    const double std = std::sqrt(2.0 / in_dim_);
    weight_.fill_normal(rng, 0.0, std);
    bias_.zero();
}

Tensor Linear::forward(const Tensor& x) {
    if (x.ndim() != 2 || x.dim(1) != in_dim_) throw ShapeError("Linear: bad input shape");
    x_ = x;
    const int b = x.dim(0);
    Tensor y({b, out_dim_});
    CMapRM xm(x.data(), b, in_dim_);
    CMapRM wm(weight_.data(), out_dim_, in_dim_);
    MapRM ym(y.data(), b, out_dim_);
    ym = xm * wm.transpose();
    for (int i = 0; i < b; ++i)
        for (int o = 0; o < out_dim_; ++o) y.at(i, o) += bias_[o];
    return y;
}

Tensor Linear::backward(const Tensor& grad_out) {
    const int b = grad_out.dim(0);
    CMapRM gm(grad_out.data(), b, out_dim_);
    CMapRM xm(x_.data(), b, in_dim_);
    CMapRM wm(weight_.data(), out_dim_, in_dim_);
    MapRM wg(wgrad_.data(), out_dim_, in_dim_);
    wg += gm.transpose() * xm;
    for (int o = 0; o < out_dim_; ++o) bgrad_[o] += gm.col(o).sum();
    Tensor gx({b, in_dim_});
    MapRM gxm(gx.data(), b, in_dim_);
    gxm = gm * wm;
    return gx;
}

void Linear::collect(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".weight", &weight_, &wgrad_});
    out.push_back({prefix + ".bias", &bias_, &bgrad_});
}

Tensor Sigmoid::forward(const Tensor& x) {
    out_ = Tensor(x.shape());
    for (std::int64_t i = 0; i < x.numel(); ++i) out_[i] = 1.0 / (1.0 + std::exp(-x[i]));
    return out_;
}

Tensor Sigmoid::backward(const Tensor& grad_out) const {
    Tensor gx(grad_out.shape());
    for (std::int64_t i = 0; i < grad_out.numel(); ++i)
        gx[i] = grad_out[i] * out_[i] * (1.0 - out_[i]);
    return gx;
}

Adam::Adam(std::vector<ParamRef> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const ParamRef& p : params_) {
        m_.emplace_back(p.value->shape());
        v_.emplace_back(p.value->shape());
    }
}

void Adam::zero_grad() {
    for (ParamRef& p : params_) p.grad->zero();
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        Tensor& w = *params_[k].value;
        const Tensor& g = *params_[k].grad;
        Tensor& m = m_[k];
        Tensor& v = v_[k];
        for (std::int64_t i = 0; i < w.numel(); ++i) {
            if (!std::isfinite(g[i])) throw NumericError("Adam: non-finite gradient for " + params_[k].name);
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            w[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
        }
    }
}

}  // namespace slideadapt
