#include "slideadapt/losses.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "slideadapt/errors.hpp"

namespace slideadapt {

namespace {

double clamped_log(double x) { return std::log(std::max(x, kLossEps)); }

void check_probs(const Tensor& t, const char* name) {
    if (t.ndim() != 2 || t.dim(1) != 1) throw ShapeError(std::string(name) + ": expected B x 1");
    if (t.dim(0) == 0) throw InvalidInputError(std::string(name) + ": empty batch");
}

void append_field(std::ostringstream& os, const char* key, const std::optional<double>& v) {
    if (v) {
        os << ' ' << key << '=';
        os.precision(17);
        os << *v;
    }
}

}  // namespace

std::string LossReport::to_line() const {
    std::ostringstream os;
    os << "step=" << step;
    append_field(os, "l_c", l_c);
    append_field(os, "l_adv_d", l_adv_d);
    append_field(os, "l_adv_m", l_adv_m);
    append_field(os, "l_a", l_a);
    append_field(os, "l_s", l_s);
    append_field(os, "l_t", l_t);
    return os.str();
}

LossReport LossReport::from_line(const std::string& line) {
    LossReport r;
    std::istringstream is(line);
    std::string tok;
    while (is >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw ParseError("bad loss-log token: " + tok);
        const std::string key = tok.substr(0, eq);
        const std::string val = tok.substr(eq + 1);
        if (key == "step") {
            r.step = std::stoi(val);
        } else if (key == "l_c") {
            r.l_c = std::stod(val);
        } else if (key == "l_adv_d") {
            r.l_adv_d = std::stod(val);
        } else if (key == "l_adv_m") {
            r.l_adv_m = std::stod(val);
        } else if (key == "l_a") {
            r.l_a = std::stod(val);
        } else if (key == "l_s") {
            r.l_s = std::stod(val);
        } else if (key == "l_t") {
            r.l_t = std::stod(val);
        } else {
            throw ParseError("unknown loss-log key: " + key);
        }
    }
    return r;
}

double classification_loss(const Tensor& logits, const Tensor& labels) {
    if (logits.ndim() != 2 || logits.dim(1) != 2) throw ShapeError("classification_loss: logits must be B x 2");
    if (!labels.same_shape(logits)) throw ShapeError("classification_loss: labels shape mismatch");
    const int batch = logits.dim(0);
    if (batch == 0) throw InvalidInputError("classification_loss: empty batch");
    double total = 0.0;
    for (int i = 0; i < batch; ++i) {
        const double y0 = labels.at(i, 0);
        const double y1 = labels.at(i, 1);
        const bool one_hot = (y0 == 0.0 && y1 == 1.0) || (y0 == 1.0 && y1 == 0.0);
        if (!one_hot) throw InvalidInputError("classification_loss: labels must be one-hot rows");
        const double m = std::max(logits.at(i, 0), logits.at(i, 1));
        const double z = std::exp(logits.at(i, 0) - m) + std::exp(logits.at(i, 1) - m);
        const double logp0 = logits.at(i, 0) - m - std::log(z);
        const double logp1 = logits.at(i, 1) - m - std::log(z);
        total -= y0 * std::max(logp0, std::log(kLossEps)) + y1 * std::max(logp1, std::log(kLossEps));
    }
    return total / batch;
}

Tensor classification_loss_grad(const Tensor& logits, const Tensor& labels) {
    const int batch = logits.dim(0);
    Tensor grad({batch, 2});
    for (int i = 0; i < batch; ++i) {
        const double m = std::max(logits.at(i, 0), logits.at(i, 1));
        const double e0 = std::exp(logits.at(i, 0) - m);
        const double e1 = std::exp(logits.at(i, 1) - m);
        const double z = e0 + e1;
        grad.at(i, 0) = (e0 / z - labels.at(i, 0)) / batch;
        grad.at(i, 1) = (e1 / z - labels.at(i, 1)) / batch;
    }
    return grad;
}

double discriminator_loss(const Tensor& d_source, const Tensor& d_target) {
    check_probs(d_source, "discriminator_loss(d_source)");
    check_probs(d_target, "discriminator_loss(d_target)");
    double src = 0.0, tgt = 0.0;
    for (std::int64_t i = 0; i < d_source.numel(); ++i) src -= clamped_log(d_source[i]);
    for (std::int64_t i = 0; i < d_target.numel(); ++i) tgt -= clamped_log(1.0 - d_target[i]);
    return src / d_source.numel() + tgt / d_target.numel();
}

void discriminator_loss_grad(const Tensor& d_source, const Tensor& d_target,
                             Tensor& grad_source, Tensor& grad_target) {
    grad_source = Tensor(d_source.shape());
    grad_target = Tensor(d_target.shape());
    const double ns = static_cast<double>(d_source.numel());
    const double nt = static_cast<double>(d_target.numel());
    for (std::int64_t i = 0; i < d_source.numel(); ++i)
        grad_source[i] = -1.0 / (std::max(d_source[i], kLossEps) * ns);
    for (std::int64_t i = 0; i < d_target.numel(); ++i)
        grad_target[i] = 1.0 / (std::max(1.0 - d_target[i], kLossEps) * nt);
}

double mapping_loss(const Tensor& d_target) {
    check_probs(d_target, "mapping_loss(d_target)");
    double acc = 0.0;
    for (std::int64_t i = 0; i < d_target.numel(); ++i) acc -= clamped_log(d_target[i]);
    return acc / d_target.numel();
}

Tensor mapping_loss_grad(const Tensor& d_target) {
    Tensor grad(d_target.shape());
    const double n = static_cast<double>(d_target.numel());
    for (std::int64_t i = 0; i < d_target.numel(); ++i)
        grad[i] = -1.0 / (std::max(d_target[i], kLossEps) * n);
    return grad;
}

double siamese_loss(const Tensor& pair_probs, const Tensor& pair_labels) {
    check_probs(pair_probs, "siamese_loss(pair_probs)");
    if (!pair_labels.same_shape(pair_probs)) throw ShapeError("siamese_loss: label shape mismatch");
    double acc = 0.0;
    for (std::int64_t i = 0; i < pair_probs.numel(); ++i) {
        const double y = pair_labels[i];
        if (y != 0.0 && y != 1.0) throw InvalidInputError("siamese_loss: labels must be 0 or 1");
        acc -= y * clamped_log(pair_probs[i]) + (1.0 - y) * clamped_log(1.0 - pair_probs[i]);
    }
    return acc / pair_probs.numel();
}

Tensor siamese_loss_grad(const Tensor& pair_probs, const Tensor& pair_labels) {
    Tensor grad(pair_probs.shape());
    const double n = static_cast<double>(pair_probs.numel());
    for (std::int64_t i = 0; i < pair_probs.numel(); ++i) {
        const double y = pair_labels[i];
        const double p = pair_probs[i];
        grad[i] = (-y / std::max(p, kLossEps) + (1.0 - y) / std::max(1.0 - p, kLossEps)) / n;
    }
    return grad;
}

}  // namespace slideadapt
