#pragma once

#include <memory>
#include <string>
#include <vector>

#include "slideadapt/layers.hpp"
#include "slideadapt/tensor.hpp"

namespace slideadapt {

// Five-stage all-convolutional feature extractor: AlexNet-like widths,
// batch normalization after every convolution, max pooling after stages
// 1, 2 and 5, then global average pooling down to a feature vector.
struct ArchConfig {
    std::vector<int> conv_channels{64, 192, 384, 256, 256};
    int disc_hidden = 512;

    int feature_dim() const { return conv_channels.back(); }
    void validate() const;

    bool operator==(const ArchConfig&) const = default;
};

class Mapper {
public:
    explicit Mapper(const ArchConfig& arch);

    void init(Rng& rng);
    void copy_from(Mapper& other);

    // (B, 3, H, W) -> (B, F)
    Tensor forward(const Tensor& batch, Mode mode);
    // Gradient of a scalar loss w.r.t. the feature batch, propagated back
    // through the stack; parameter gradients accumulate into the refs.
    Tensor backward(const Tensor& grad_feats);

    void collect(const std::string& prefix, std::vector<ParamRef>& params);
    void collect_state(const std::string& prefix, std::vector<StateRef>& state);
    std::vector<ParamRef> params(const std::string& prefix);

    int feature_dim() const { return feature_dim_; }

private:
    int feature_dim_;
    std::vector<std::unique_ptr<Conv2d>> convs_;
    std::vector<std::unique_ptr<BatchNorm2d>> bns_;
    std::vector<ReLU> relus_;
    std::vector<MaxPool2d> pools_;  // after stages 1, 2, 5
    GlobalAvgPool gap_;
    std::vector<bool> pooled_;  // per stage
};

// Final prediction layer: a 1x1 convolution over the pooled feature map,
// which on a (B, F) feature batch is a plain affine map to 2 logits.
// No batch normalization here.
class Classifier {
public:
    explicit Classifier(int feature_dim) : fc_(feature_dim, 2) {}

    void init(Rng& rng) { fc_.init(rng); }
    Tensor forward(const Tensor& feats) { return fc_.forward(feats); }
    Tensor backward(const Tensor& grad_logits) { return fc_.backward(grad_logits); }
    void collect(const std::string& prefix, std::vector<ParamRef>& params) { fc_.collect(prefix + ".fc", params); }
    std::vector<ParamRef> params(const std::string& prefix);

private:
    Linear fc_;
};

// Three fully connected layers mapping an F-dim feature to one domain
// probability (1 = source).
class Discriminator {
public:
    Discriminator(int feature_dim, int hidden);

    void init(Rng& rng);
    Tensor forward(const Tensor& feats);                 // (B, F) -> (B, 1) probs
    Tensor backward(const Tensor& grad_probs);           // d loss / d probs in
    void collect(const std::string& prefix, std::vector<ParamRef>& params);
    std::vector<ParamRef> params(const std::string& prefix);

private:
    Linear fc1_, fc2_, fc3_;
    LeakyReLU act1_{0.2}, act2_{0.2};
    Sigmoid sig_;
};

// One-layer perceptron over the concatenation of two mapper features.
class SiameseHead {
public:
    explicit SiameseHead(int feature_dim) : fc_(2 * feature_dim, 1) {}

    void init(Rng& rng) { fc_.init(rng); }
    Tensor forward(const Tensor& concat_feats);
    Tensor backward(const Tensor& grad_probs);
    void collect(const std::string& prefix, std::vector<ParamRef>& params) { fc_.collect(prefix + ".fc", params); }
    std::vector<ParamRef> params(const std::string& prefix);

private:
    Linear fc_;
    Sigmoid sig_;
};

// Applies the shared mapper to both sides of a pair (stacked into one
// 2B mapper batch) and scores the concatenated features with the head.
// Returns (B, 1) probabilities.
Tensor siamese_forward(SiameseHead& head, Mapper& mapper, const Tensor& batch_a,
                       const Tensor& batch_b, Mode mode);

// Backward companion; must be called directly after siamese_forward (the
// mapper cache holds the stacked pass). Accumulates gradients into both the
// head and the shared mapper.
void siamese_backward(SiameseHead& head, Mapper& mapper, const Tensor& grad_probs);

std::uint64_t params_hash(std::vector<ParamRef> params);

}  // namespace slideadapt
