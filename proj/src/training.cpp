#include "slideadapt/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "slideadapt/errors.hpp"
#include "slideadapt/rng.hpp"

namespace slideadapt {

namespace {

struct PatchIndex {
    std::size_t slide;
    std::size_t patch;
};

std::vector<PatchIndex> collect_patches(const std::vector<Slide>& slides) {
    std::vector<PatchIndex> out;
    for (std::size_t s = 0; s < slides.size(); ++s)
        for (std::size_t p = 0; p < slides[s].patches.size(); ++p) out.push_back({s, p});
    return out;
}

void copy_sample(Tensor& batch, int row, const Tensor& sample) {
    std::memcpy(batch.data() + static_cast<std::int64_t>(row) * sample.numel(), sample.data(),
                sizeof(double) * static_cast<std::size_t>(sample.numel()));
}

Tensor make_batch(const std::vector<Slide>& slides, const std::vector<PatchIndex>& picks,
                  InputMode mode, Rng& seed_stream, int resize, int crop) {
    Tensor batch({static_cast<int>(picks.size()), 3, crop, crop});
    for (std::size_t i = 0; i < picks.size(); ++i) {
        const Patch& patch = slides[picks[i].slide].patches[picks[i].patch];
        const Tensor sample = prepare_input(patch, mode, seed_stream.next_u64(), resize, crop);
        copy_sample(batch, static_cast<int>(i), sample);
    }
    return batch;
}

Tensor one_hot_labels(const std::vector<Slide>& slides, const std::vector<PatchIndex>& picks) {
    Tensor labels({static_cast<int>(picks.size()), 2});
    for (std::size_t i = 0; i < picks.size(); ++i) {
        const Slide& slide = slides[picks[i].slide];
        if (!slide.grade) throw InvalidInputError("unlabeled slide in supervised data: " + slide.slide_id);
        labels.at(static_cast<int>(i), *slide.grade == GradeLabel::High ? 1 : 0) = 1.0;
    }
    return labels;
}

// Snapshot/restore of a parameter + state set, for model selection.
struct ParamSnapshot {
    std::vector<Tensor> values;
    std::vector<Tensor> state;

    static ParamSnapshot take(const std::vector<ParamRef>& params, const std::vector<StateRef>& st) {
        ParamSnapshot s;
        for (const ParamRef& p : params) s.values.push_back(*p.value);
        for (const StateRef& r : st) s.state.push_back(*r.value);
        return s;
    }

    void restore(const std::vector<ParamRef>& params, const std::vector<StateRef>& st) const {
        for (std::size_t i = 0; i < params.size(); ++i) *params[i].value = values[i];
        for (std::size_t i = 0; i < st.size(); ++i) *st[i].value = state[i];
    }
};

void log_report(std::ostream* log, const LossReport& report) {
    if (log) *log << report.to_line() << '\n';
}

constexpr std::uint64_t kInitStream = 0x1417;
constexpr std::uint64_t kValStream = 0x7a1;
constexpr std::uint64_t kEpochStream = 0xe000;
constexpr std::uint64_t kAdaptStream = 0xada7;

}  // namespace

PairBatch sample_pair_batch(const std::vector<Slide>& target_train, int size,
                            double positive_fraction, std::uint64_t seed,
                            int resize, int crop) {
    if (size <= 0) throw InvalidInputError("sample_pair_batch: size must be positive");
    if (positive_fraction <= 0.0 || positive_fraction >= 1.0)
        throw InvalidInputError("sample_pair_batch: positive_fraction must be in (0,1)");

    std::vector<std::size_t> with_two;
    std::vector<std::size_t> non_empty;
    for (std::size_t s = 0; s < target_train.size(); ++s) {
        if (!target_train[s].patches.empty()) non_empty.push_back(s);
        if (target_train[s].patches.size() >= 2) with_two.push_back(s);
    }
    const int n_pos = static_cast<int>(std::ceil(size * positive_fraction));
    const int n_neg = size - n_pos;
    if (n_pos > 0 && with_two.empty())
        throw SamplingError("sample_pair_batch: no slide has two patches (cannot form positive pairs)");
    if (n_neg > 0 && non_empty.size() < 2)
        throw SamplingError("sample_pair_batch: fewer than two slides (cannot form negative pairs)");

    Rng rng(seed);
    PairBatch out;
    out.a = Tensor({size, 3, crop, crop});
    out.b = Tensor({size, 3, crop, crop});
    out.labels = Tensor({size, 1});

    for (int i = 0; i < size; ++i) {
        std::size_t slide_a, patch_a, slide_b, patch_b;
        if (i < n_pos) {
            slide_a = with_two[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(with_two.size()) - 1))];
            const auto n = static_cast<std::int64_t>(target_train[slide_a].patches.size());
            patch_a = static_cast<std::size_t>(rng.uniform_int(0, n - 1));
            do {
                patch_b = static_cast<std::size_t>(rng.uniform_int(0, n - 1));
            } while (patch_b == patch_a);
            slide_b = slide_a;
            out.labels.at(i, 0) = 1.0;
        } else {
            slide_a = non_empty[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(non_empty.size()) - 1))];
            do {
                slide_b = non_empty[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(non_empty.size()) - 1))];
            } while (slide_b == slide_a);
            patch_a = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(target_train[slide_a].patches.size()) - 1));
            patch_b = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(target_train[slide_b].patches.size()) - 1));
            out.labels.at(i, 0) = 0.0;
        }
        const Tensor sample_a =
            prepare_input(target_train[slide_a].patches[patch_a], InputMode::Train, rng.next_u64(), resize, crop);
        const Tensor sample_b =
            prepare_input(target_train[slide_b].patches[patch_b], InputMode::Train, rng.next_u64(), resize, crop);
        copy_sample(out.a, i, sample_a);
        copy_sample(out.b, i, sample_b);
    }
    return out;
}

std::unique_ptr<ModelBundle> train_source(const DatasetSplit& split, const TrainConfig& config,
                                          std::ostream* loss_log) {
    config.validate();
    if (split.train.empty()) throw InvalidInputError("train_source: empty training split");
    for (const Slide& s : split.train)
        if (!s.grade) throw InvalidInputError("train_source: unlabeled source slide " + s.slide_id);

    auto bundle = std::make_unique<ModelBundle>(config);
    Rng init_rng(Rng::mix(config.seed, kInitStream));
    bundle->init(init_rng);

    // Carve a validation subset out of the training slides.
    std::vector<std::size_t> order(split.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng val_rng(Rng::mix(config.seed, kValStream));
    val_rng.shuffle(order);
    std::size_t n_val = 0;
    if (split.train.size() >= 2 && config.val_fraction > 0.0)
        n_val = std::min(split.train.size() - 1,
                         static_cast<std::size_t>(std::llround(config.val_fraction * split.train.size())));
    std::vector<Slide> fit_slides, val_slides;
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < n_val ? val_slides : fit_slides).push_back(split.train[order[i]]);

    const std::vector<PatchIndex> all_patches = collect_patches(fit_slides);
    if (all_patches.empty()) throw InvalidInputError("train_source: no patches to train on");

    std::vector<ParamRef> theta_s;
    bundle->source_mapper.collect("theta_s.mapper", theta_s);
    bundle->classifier.collect("theta_s.classifier", theta_s);
    std::vector<StateRef> theta_s_state;
    bundle->source_mapper.collect_state("theta_s.mapper", theta_s_state);
    Adam opt(theta_s, config.lr_source, config.adam_beta1, config.adam_beta2, config.adam_eps);

    double best_val_acc = -1.0;
    ParamSnapshot best;

    std::vector<PatchIndex> shuffled = all_patches;
    for (int epoch = 0; epoch < config.source_epochs; ++epoch) {
        Rng epoch_rng(Rng::mix(config.seed, kEpochStream + static_cast<std::uint64_t>(epoch)));
        epoch_rng.shuffle(shuffled);
        for (std::size_t start = 0; start + 2 <= shuffled.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(shuffled.size(), start + static_cast<std::size_t>(config.batch_size));
            if (end - start < 2) break;  // batch statistics need at least two samples
            const std::vector<PatchIndex> picks(shuffled.begin() + static_cast<std::ptrdiff_t>(start),
                                                shuffled.begin() + static_cast<std::ptrdiff_t>(end));
            const Tensor batch = make_batch(fit_slides, picks, InputMode::Train, epoch_rng,
                                            config.input_resize, config.input_crop);
            const Tensor labels = one_hot_labels(fit_slides, picks);

            const Tensor feats = bundle->source_mapper.forward(batch, Mode::Train);
            const Tensor logits = bundle->classifier.forward(feats);
            const double l_c = classification_loss(logits, labels);
            if (!std::isfinite(l_c)) throw NumericError("train_source: non-finite classification loss");

            opt.zero_grad();
            const Tensor grad_feats = bundle->classifier.backward(classification_loss_grad(logits, labels));
            bundle->source_mapper.backward(grad_feats);
            opt.step();

            ++bundle->step;
            LossReport report;
            report.step = static_cast<int>(bundle->step);
            report.l_c = l_c;
            log_report(loss_log, report);
            bundle->loss_tail.push_back(report.to_line());
            if (bundle->loss_tail.size() > 64) bundle->loss_tail.erase(bundle->loss_tail.begin());
        }
        if (!val_slides.empty()) {
            const double acc = patch_accuracy(*bundle, WhichMapper::Source, val_slides);
            if (acc >= best_val_acc) {
                best_val_acc = acc;
                best = ParamSnapshot::take(theta_s, theta_s_state);
            }
        }
    }
    if (best_val_acc >= 0.0) best.restore(theta_s, theta_s_state);

    bundle->target_mapper.copy_from(bundle->source_mapper);
    return bundle;
}

void adapt_target(ModelBundle& bundle, const std::vector<Slide>& source_train,
                  const std::vector<Slide>& target_train, AdaptMode mode,
                  std::ostream* loss_log, std::vector<AdaptStepTrace>* trace) {
    const TrainConfig& cfg = bundle.config;
    cfg.validate();
    if (source_train.empty() || target_train.empty())
        throw InvalidInputError("adapt_target: empty source or target training set");

    // Algorithm input: theta_T starts as a copy of the source mapper.
    bundle.target_mapper.copy_from(bundle.source_mapper);

    std::vector<ParamRef> theta_t = bundle.target_mapper.params("theta_t");
    std::vector<ParamRef> theta_d = bundle.discriminator.params("theta_d");
    std::vector<ParamRef> theta_f = bundle.head.params("theta_f_head");
    Adam opt_d(theta_d, cfg.lr_discriminator, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    Adam opt_t(theta_t, cfg.lr_target, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    Adam opt_f(theta_f, cfg.lr_head, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);

    const std::vector<PatchIndex> source_patches = collect_patches(source_train);
    const std::vector<PatchIndex> target_patches = collect_patches(target_train);
    if (source_patches.empty() || target_patches.empty())
        throw InvalidInputError("adapt_target: a training set has no patches");

    Rng rng(Rng::mix(cfg.seed, kAdaptStream));
    const int b = cfg.batch_size;
    const int f = bundle.source_mapper.feature_dim();
    if (f != bundle.target_mapper.feature_dim())
        throw ConfigError("adapt_target: feature dimension mismatch between mappers");

    auto record = [&](int iter, const char* phase) {
        if (!trace) return;
        AdaptStepTrace t;
        t.iteration = iter;
        t.phase = phase;
        t.hash_source = bundle.source_hash();
        t.hash_target = bundle.target_hash();
        t.hash_disc = bundle.discriminator_hash();
        t.hash_head = bundle.head_hash();
        trace->push_back(std::move(t));
    };

    for (int iter = 0; iter < cfg.adapt_iterations; ++iter) {
        record(iter, "start");

        // (i) two same-size mini-batches
        std::vector<PatchIndex> src_picks(static_cast<std::size_t>(b));
        std::vector<PatchIndex> tgt_picks(static_cast<std::size_t>(b));
        for (auto& p : src_picks)
            p = source_patches[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(source_patches.size()) - 1))];
        for (auto& p : tgt_picks)
            p = target_patches[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(target_patches.size()) - 1))];
        const Tensor xs = make_batch(source_train, src_picks, InputMode::Train, rng, cfg.input_resize, cfg.input_crop);
        const Tensor xt = make_batch(target_train, tgt_picks, InputMode::Train, rng, cfg.input_resize, cfg.input_crop);

        // (ii) feature estimates; the source mapper stays frozen in eval mode
        const Tensor y_s = bundle.source_mapper.forward(xs, Mode::Eval);
        const Tensor y_t = bundle.target_mapper.forward(xt, Mode::Train);

        // (iii) discriminator step on L_adv_D
        Tensor both({2 * b, f});
        std::memcpy(both.data(), y_s.data(), sizeof(double) * static_cast<std::size_t>(y_s.numel()));
        std::memcpy(both.data() + y_s.numel(), y_t.data(), sizeof(double) * static_cast<std::size_t>(y_t.numel()));
        const Tensor probs_both = bundle.discriminator.forward(both);
        Tensor p_s({b, 1}), p_t({b, 1});
        std::memcpy(p_s.data(), probs_both.data(), sizeof(double) * static_cast<std::size_t>(b));
        std::memcpy(p_t.data(), probs_both.data() + b, sizeof(double) * static_cast<std::size_t>(b));
        const double l_adv_d = discriminator_loss(p_s, p_t);

        opt_d.zero_grad();
        Tensor gs, gt;
        discriminator_loss_grad(p_s, p_t, gs, gt);
        Tensor g_both({2 * b, 1});
        std::memcpy(g_both.data(), gs.data(), sizeof(double) * static_cast<std::size_t>(b));
        std::memcpy(g_both.data() + b, gt.data(), sizeof(double) * static_cast<std::size_t>(b));
        bundle.discriminator.backward(g_both);
        opt_d.step();
        record(iter, "after_disc");

        // (iv) target-mapper step on L_adv_M, discriminator frozen
        const Tensor p_t2 = bundle.discriminator.forward(y_t);
        const double l_adv_m = mapping_loss(p_t2);
        opt_t.zero_grad();
        const Tensor grad_feats = bundle.discriminator.backward(mapping_loss_grad(p_t2));
        bundle.target_mapper.backward(grad_feats);
        opt_t.step();
        record(iter, "after_target");

        LossReport report;
        report.step = static_cast<int>(++bundle.step);
        report.l_adv_d = l_adv_d;
        report.l_adv_m = l_adv_m;
        report.l_a = combine_adversarial(l_adv_d, l_adv_m);

        // (v) Siamese step: pair loss updates the head and the shared mapper
        if (mode == AdaptMode::AdvPlusSiamese) {
            const PairBatch pair = sample_pair_batch(target_train, cfg.pair_batch_size,
                                                     cfg.positive_pair_fraction, rng.next_u64(),
                                                     cfg.input_resize, cfg.input_crop);
            const Tensor pair_probs = siamese_forward(bundle.head, bundle.target_mapper, pair.a, pair.b, Mode::Train);
            const double l_s = siamese_loss(pair_probs, pair.labels);
            opt_t.zero_grad();
            opt_f.zero_grad();
            siamese_backward(bundle.head, bundle.target_mapper, siamese_loss_grad(pair_probs, pair.labels));
            opt_f.step();
            opt_t.step();
            record(iter, "after_siamese");
            report.l_s = l_s;
            report.l_t = combine_total(*report.l_a, l_s);
        }

        if (!std::isfinite(*report.l_a)) throw NumericError("adapt_target: non-finite adversarial loss");
        log_report(loss_log, report);
        bundle.loss_tail.push_back(report.to_line());
        if (bundle.loss_tail.size() > 64) bundle.loss_tail.erase(bundle.loss_tail.begin());
    }
}

std::vector<std::vector<double>> predict_patches(ModelBundle& bundle, WhichMapper which,
                                                 const std::vector<Slide>& slides) {
    const TrainConfig& cfg = bundle.config;
    Mapper& mapper = (which == WhichMapper::Source) ? bundle.source_mapper : bundle.target_mapper;
    std::vector<std::vector<double>> probs(slides.size());

    const std::vector<PatchIndex> patches = collect_patches(slides);
    for (std::size_t start = 0; start < patches.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t end = std::min(patches.size(), start + static_cast<std::size_t>(cfg.batch_size));
        const std::vector<PatchIndex> picks(patches.begin() + static_cast<std::ptrdiff_t>(start),
                                            patches.begin() + static_cast<std::ptrdiff_t>(end));
        Rng unused(0);  // eval-mode preparation ignores the seed stream
        const Tensor batch = make_batch(slides, picks, InputMode::Eval, unused, cfg.input_resize, cfg.input_crop);
        const Tensor feats = mapper.forward(batch, Mode::Eval);
        const Tensor logits = bundle.classifier.forward(feats);
        for (std::size_t i = 0; i < picks.size(); ++i) {
            const double m = std::max(logits.at(static_cast<int>(i), 0), logits.at(static_cast<int>(i), 1));
            const double e0 = std::exp(logits.at(static_cast<int>(i), 0) - m);
            const double e1 = std::exp(logits.at(static_cast<int>(i), 1) - m);
            probs[picks[i].slide].push_back(e1 / (e0 + e1));
        }
    }
    return probs;
}

double patch_accuracy(ModelBundle& bundle, WhichMapper which, const std::vector<Slide>& slides) {
    const auto probs = predict_patches(bundle, which, slides);
    std::int64_t correct = 0, total = 0;
    for (std::size_t s = 0; s < slides.size(); ++s) {
        if (!slides[s].grade) throw InvalidInputError("patch_accuracy: unlabeled slide " + slides[s].slide_id);
        const bool truth_high = *slides[s].grade == GradeLabel::High;
        for (double p : probs[s]) {
            correct += ((p >= 0.5) == truth_high) ? 1 : 0;
            ++total;
        }
    }
    if (total == 0) throw InvalidInputError("patch_accuracy: no patches");
    return static_cast<double>(correct) / static_cast<double>(total);
}

double discriminator_accuracy(ModelBundle& bundle, const std::vector<Slide>& source_slides,
                              const std::vector<Slide>& target_slides, std::uint64_t seed) {
    const TrainConfig& cfg = bundle.config;
    Rng rng(seed);
    std::int64_t correct = 0, total = 0;
    auto run_domain = [&](const std::vector<Slide>& slides, Mapper& mapper, bool is_source) {
        const std::vector<PatchIndex> patches = collect_patches(slides);
        const std::size_t n = std::min<std::size_t>(patches.size(), 128);
        std::vector<PatchIndex> picks;
        for (std::size_t i = 0; i < n; ++i)
            picks.push_back(patches[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(patches.size()) - 1))]);
        Rng unused(0);
        const Tensor batch = make_batch(slides, picks, InputMode::Eval, unused, cfg.input_resize, cfg.input_crop);
        const Tensor feats = mapper.forward(batch, Mode::Eval);
        const Tensor probs = bundle.discriminator.forward(feats);
        for (std::int64_t i = 0; i < probs.numel(); ++i) {
            correct += ((probs[i] >= 0.5) == is_source) ? 1 : 0;
            ++total;
        }
    };
    run_domain(source_slides, bundle.source_mapper, true);
    run_domain(target_slides, bundle.target_mapper, false);
    return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace slideadapt
