#include "slideadapt/networks.hpp"

#include <cstring>

#include "slideadapt/errors.hpp"
#include "slideadapt/hash.hpp"

namespace slideadapt {

void ArchConfig::validate() const {
    if (conv_channels.size() != 5) throw ConfigError("conv_channels must list 5 stage widths");
    for (int c : conv_channels)
        if (c <= 0) throw ConfigError("conv_channels entries must be positive");
    if (disc_hidden <= 0) throw ConfigError("disc_hidden must be positive");
}

namespace {
constexpr int kKernels[5] = {11, 5, 3, 3, 3};
constexpr int kStrides[5] = {4, 1, 1, 1, 1};
constexpr int kPads[5] = {2, 2, 1, 1, 1};
constexpr bool kPooled[5] = {true, true, false, false, true};
}  // namespace

Mapper::Mapper(const ArchConfig& arch) {
    arch.validate();
    feature_dim_ = arch.feature_dim();
    int in_ch = 3;
    for (int s = 0; s < 5; ++s) {
        const int out_ch = arch.conv_channels[static_cast<std::size_t>(s)];
        convs_.push_back(std::make_unique<Conv2d>(in_ch, out_ch, kKernels[s], kStrides[s], kPads[s]));
        bns_.push_back(std::make_unique<BatchNorm2d>(out_ch));
        pooled_.push_back(kPooled[s]);
        in_ch = out_ch;
    }
    relus_.resize(5);
    pools_.resize(5);
}

void Mapper::init(Rng& rng) {
    for (auto& c : convs_) c->init(rng);
}

void Mapper::copy_from(Mapper& other) {
    std::vector<ParamRef> mine, theirs;
    std::vector<StateRef> mine_s, theirs_s;
    other.collect("m", theirs);
    other.collect_state("m", theirs_s);
    collect("m", mine);
    collect_state("m", mine_s);
    if (mine.size() != theirs.size()) throw ConfigError("copy_from: architecture mismatch");
    for (std::size_t i = 0; i < mine.size(); ++i) {
        if (!mine[i].value->same_shape(*theirs[i].value))
            throw ConfigError("copy_from: shape mismatch at " + mine[i].name);
        *mine[i].value = *theirs[i].value;
    }
    for (std::size_t i = 0; i < mine_s.size(); ++i) *mine_s[i].value = *theirs_s[i].value;
}

Tensor Mapper::forward(const Tensor& batch, Mode mode) {
    if (batch.ndim() != 4 || batch.dim(0) == 0) throw ShapeError("Mapper: expected non-empty B x 3 x H x W");
    if (!batch.all_finite()) throw NumericError("Mapper: non-finite input");
    Tensor x = batch;
    for (int s = 0; s < 5; ++s) {
        x = convs_[static_cast<std::size_t>(s)]->forward(x);
        x = bns_[static_cast<std::size_t>(s)]->forward(x, mode);
        x = relus_[static_cast<std::size_t>(s)].forward(x);
        if (pooled_[static_cast<std::size_t>(s)]) x = pools_[static_cast<std::size_t>(s)].forward(x);
    }
    return gap_.forward(x);
}

Tensor Mapper::backward(const Tensor& grad_feats) {
    Tensor g = gap_.backward(grad_feats);
    for (int s = 4; s >= 0; --s) {
        if (pooled_[static_cast<std::size_t>(s)]) g = pools_[static_cast<std::size_t>(s)].backward(g);
        g = relus_[static_cast<std::size_t>(s)].backward(g);
        g = bns_[static_cast<std::size_t>(s)]->backward(g);
        g = convs_[static_cast<std::size_t>(s)]->backward(g);
    }
    return g;
}

void Mapper::collect(const std::string& prefix, std::vector<ParamRef>& params) {
    for (int s = 0; s < 5; ++s) {
        const std::string stage = prefix + ".conv" + std::to_string(s + 1);
        convs_[static_cast<std::size_t>(s)]->collect(stage, params);
        bns_[static_cast<std::size_t>(s)]->collect(prefix + ".bn" + std::to_string(s + 1), params);
    }
}

void Mapper::collect_state(const std::string& prefix, std::vector<StateRef>& state) {
    for (int s = 0; s < 5; ++s)
        bns_[static_cast<std::size_t>(s)]->collect_state(prefix + ".bn" + std::to_string(s + 1), state);
}

std::vector<ParamRef> Mapper::params(const std::string& prefix) {
    std::vector<ParamRef> out;
    collect(prefix, out);
    return out;
}

std::vector<ParamRef> Classifier::params(const std::string& prefix) {
    std::vector<ParamRef> out;
    collect(prefix, out);
    return out;
}

Discriminator::Discriminator(int feature_dim, int hidden)
    : fc1_(feature_dim, hidden), fc2_(hidden, hidden), fc3_(hidden, 1) {}

void Discriminator::init(Rng& rng) {
    fc1_.init(rng);
    fc2_.init(rng);
    fc3_.init(rng);
}

Tensor Discriminator::forward(const Tensor& feats) {
    Tensor x = fc1_.forward(feats);
    x = act1_.forward(x);
    x = fc2_.forward(x);
    x = act2_.forward(x);
    x = fc3_.forward(x);
    return sig_.forward(x);
}

Tensor Discriminator::backward(const Tensor& grad_probs) {
    Tensor g = sig_.backward(grad_probs);
    g = fc3_.backward(g);
    g = act2_.backward(g);
    g = fc2_.backward(g);
    g = act1_.backward(g);
    return fc1_.backward(g);
}

void Discriminator::collect(const std::string& prefix, std::vector<ParamRef>& params) {
    fc1_.collect(prefix + ".fc1", params);
    fc2_.collect(prefix + ".fc2", params);
    fc3_.collect(prefix + ".fc3", params);
}

std::vector<ParamRef> Discriminator::params(const std::string& prefix) {
    std::vector<ParamRef> out;
    collect(prefix, out);
    return out;
}

Tensor SiameseHead::forward(const Tensor& concat_feats) {
    return sig_.forward(fc_.forward(concat_feats));
}

Tensor SiameseHead::backward(const Tensor& grad_probs) {
    return fc_.backward(sig_.backward(grad_probs));
}

std::vector<ParamRef> SiameseHead::params(const std::string& prefix) {
    std::vector<ParamRef> out;
    collect(prefix, out);
    return out;
}

Tensor siamese_forward(SiameseHead& head, Mapper& mapper, const Tensor& batch_a,
                       const Tensor& batch_b, Mode mode) {
    if (batch_a.shape() != batch_b.shape()) throw ShapeError("siamese_forward: mismatched pair batches");
    const int b = batch_a.dim(0);
    Tensor stacked({2 * b, batch_a.dim(1), batch_a.dim(2), batch_a.dim(3)});
    std::memcpy(stacked.data(), batch_a.data(), sizeof(double) * static_cast<std::size_t>(batch_a.numel()));
    std::memcpy(stacked.data() + batch_a.numel(), batch_b.data(),
                sizeof(double) * static_cast<std::size_t>(batch_b.numel()));
    const Tensor feats = mapper.forward(stacked, mode);
    const int f = feats.dim(1);
    Tensor concat({b, 2 * f});
    for (int i = 0; i < b; ++i)
        for (int j = 0; j < f; ++j) {
            concat.at(i, j) = feats.at(i, j);
            concat.at(i, f + j) = feats.at(b + i, j);
        }
    return head.forward(concat);
}

void siamese_backward(SiameseHead& head, Mapper& mapper, const Tensor& grad_probs) {
    const Tensor grad_concat = head.backward(grad_probs);
    const int b = grad_concat.dim(0);
    const int f = grad_concat.dim(1) / 2;
    Tensor grad_feats({2 * b, f});
    for (int i = 0; i < b; ++i)
        for (int j = 0; j < f; ++j) {
            grad_feats.at(i, j) = grad_concat.at(i, j);
            grad_feats.at(b + i, j) = grad_concat.at(i, f + j);
        }
    mapper.backward(grad_feats);
}

std::uint64_t params_hash(std::vector<ParamRef> params) {
    std::uint64_t h = kFnvOffset;
    for (const ParamRef& p : params) h = hash_tensor(*p.value, h);
    return h;
}

}  // namespace slideadapt
