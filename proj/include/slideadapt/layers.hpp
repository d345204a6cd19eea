#pragma once

#include <string>
#include <vector>

#include "slideadapt/tensor.hpp"

namespace slideadapt {

enum class Mode { Train, Eval };

// A named view onto a learnable tensor and its gradient buffer.
struct ParamRef {
    std::string name;
    Tensor* value = nullptr;
    Tensor* grad = nullptr;
};

// Named non-learnable state (batch-norm running statistics).
struct StateRef {
    std::string name;
    Tensor* value = nullptr;
};

class Conv2d {
public:
    Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad);

    void init(Rng& rng);
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_out);
    void collect(const std::string& prefix, std::vector<ParamRef>& out);

    int out_size(int in_size) const { return (in_size + 2 * pad_ - kernel_) / stride_ + 1; }

private:
    int in_ch_, out_ch_, kernel_, stride_, pad_;
    Tensor weight_;  // [out, in * k * k]
    Tensor bias_;    // [out]
    Tensor wgrad_, bgrad_;
    // forward cache
    Tensor cols_;  // [in * k * k, B * oh * ow]
    int batch_ = 0, in_h_ = 0, in_w_ = 0, out_h_ = 0, out_w_ = 0;
};

class BatchNorm2d {
public:
    explicit BatchNorm2d(int channels, double momentum = 0.1, double eps = 1e-5);

    Tensor forward(const Tensor& x, Mode mode);
    Tensor backward(const Tensor& grad_out);
    void collect(const std::string& prefix, std::vector<ParamRef>& out);
    void collect_state(const std::string& prefix, std::vector<StateRef>& out);

private:
    int channels_;
    double momentum_, eps_;
    Tensor gamma_, beta_, ggrad_, bgrad_;
    Tensor running_mean_, running_var_;
    // forward cache
    Tensor xhat_;
    std::vector<double> inv_std_;
    Mode mode_ = Mode::Train;
};

class ReLU {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_out) const;

private:
    std::vector<bool> mask_;
};

class LeakyReLU {
public:
    explicit LeakyReLU(double slope) : slope_(slope) {}
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_out) const;

private:
    double slope_;
    std::vector<bool> mask_;
};

// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
class MaxPool2d {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_out) const;

private:
    std::vector<int> shape_in_;
    std::vector<std::int64_t> argmax_;
};

// (B, C, H, W) -> (B, C)
class GlobalAvgPool {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_out) const;

private:
    std::vector<int> shape_in_;
};

class Linear {
public:
    Linear(int in_dim, int out_dim);

    void init(Rng& rng);
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_out);
    void collect(const std::string& prefix, std::vector<ParamRef>& out);

    int in_dim() const { return in_dim_; }

private:
    int in_dim_, out_dim_;
    Tensor weight_;  // [out, in]
    Tensor bias_;    // [out]
    Tensor wgrad_, bgrad_;
    Tensor x_;  // forward cache
};

class Sigmoid {
public:
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_out) const;

private:
    Tensor out_;
};

class Adam {
public:
    Adam(std::vector<ParamRef> params, double lr, double beta1, double beta2, double eps);

    void zero_grad();
    void step();
    double lr() const { return lr_; }

private:
    std::vector<ParamRef> params_;
    std::vector<Tensor> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
};

}  // namespace slideadapt
