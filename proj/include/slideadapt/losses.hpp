#pragma once

#include <optional>
#include <string>
#include <vector>

#include "slideadapt/tensor.hpp"

namespace slideadapt {

// Clamp applied inside every logarithm.
constexpr double kLossEps = 1e-7;

// Named per-step scalars for the training log.
struct LossReport {
    int step = 0;
    std::optional<double> l_c;
    std::optional<double> l_adv_d;
    std::optional<double> l_adv_m;
    std::optional<double> l_a;
    std::optional<double> l_s;
    std::optional<double> l_t;

    std::string to_line() const;
    static LossReport from_line(const std::string& line);
};

// Mean cross-entropy of softmax(logits) against one-hot labels.
// logits: B x 2, labels: B x 2 one-hot rows.
double classification_loss(const Tensor& logits, const Tensor& labels);

// d(loss)/d(logits), same shape as logits.
Tensor classification_loss_grad(const Tensor& logits, const Tensor& labels);

// mean(-log d_source) + mean(-log(1 - d_target)); both inputs are B x 1
// discriminator probabilities (1 = source).
double discriminator_loss(const Tensor& d_source, const Tensor& d_target);
void discriminator_loss_grad(const Tensor& d_source, const Tensor& d_target,
                             Tensor& grad_source, Tensor& grad_target);

// mean(-log d_target): the inverted-label generator objective.
double mapping_loss(const Tensor& d_target);
Tensor mapping_loss_grad(const Tensor& d_target);

// Mean binary cross-entropy of same-slide pair probabilities.
double siamese_loss(const Tensor& pair_probs, const Tensor& pair_labels);
Tensor siamese_loss_grad(const Tensor& pair_probs, const Tensor& pair_labels);

inline double combine_adversarial(double l_adv_d, double l_adv_m) { return l_adv_d + l_adv_m; }
inline double combine_total(double l_a, double l_s) { return l_a + l_s; }

}  // namespace slideadapt
