#include <doctest.h>

#include <map>
#include <sstream>

#include "slideadapt/eval.hpp"
#include "slideadapt/synth.hpp"
#include "slideadapt/training.hpp"

using namespace slideadapt;

namespace {

TrainConfig tiny_config() {
    TrainConfig cfg;
    cfg.arch.conv_channels = {2, 2, 2, 2, 2};
    cfg.arch.disc_hidden = 8;
    cfg.batch_size = 4;
    cfg.pair_batch_size = 4;
    cfg.source_epochs = 2;
    cfg.adapt_iterations = 2;
    cfg.input_resize = 64;
    cfg.input_crop = 56;
    cfg.val_fraction = 0.2;
    cfg.seed = 3;
    return cfg;
}

std::vector<Slide> tiny_slides(std::uint64_t seed, Domain domain) {
    SynthConfig cfg;
    cfg.n_slides_per_class = 3;
    cfg.patches_per_slide_min = 2;
    cfg.patches_per_slide_max = 3;
    cfg.patch_size = 32;
    cfg.seed = seed;
    return generate_dataset(cfg, domain);
}

DatasetSplit tiny_split(std::uint64_t seed, Domain domain) {
    return split_patient_disjoint(tiny_slides(seed, domain), 0.67, seed);
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("pair batches have the requested composition") {
    const auto slides = tiny_slides(1, Domain::Target);
    const PairBatch batch = sample_pair_batch(slides, 8, 0.5, 42, 64, 56);
    REQUIRE(batch.labels.shape() == std::vector<int>{8, 1});
    REQUIRE(batch.a.shape() == std::vector<int>{8, 3, 56, 56});
    int positives = 0;
    for (int i = 0; i < 8; ++i) {
        const double y = batch.labels.at(i, 0);
        CHECK((y == 0.0 || y == 1.0));
        positives += y == 1.0;
    }
    CHECK(positives == 4);  // ceil(8 * 0.5)

    const PairBatch odd = sample_pair_batch(slides, 5, 0.5, 42, 64, 56);
    int odd_pos = 0;
    for (int i = 0; i < 5; ++i) odd_pos += odd.labels.at(i, 0) == 1.0;
    CHECK(odd_pos == 3);  // ceil(5 * 0.5)
}

TEST_CASE("pair sampling is deterministic in the seed") {
    const auto slides = tiny_slides(1, Domain::Target);
    const PairBatch a = sample_pair_batch(slides, 6, 0.5, 7, 64, 56);
    const PairBatch b = sample_pair_batch(slides, 6, 0.5, 7, 64, 56);
    const PairBatch c = sample_pair_batch(slides, 6, 0.5, 8, 64, 56);
    CHECK(a.a.raw() == b.a.raw());
    CHECK(a.b.raw() == b.b.raw());
    CHECK(a.labels.raw() == b.labels.raw());
    CHECK(a.a.raw() != c.a.raw());
}

TEST_CASE("pair sampling fails loudly when pairs cannot be formed") {
    // single-patch slides: no positive pair possible
    std::vector<Slide> singles = tiny_slides(1, Domain::Target);
    for (Slide& s : singles) s.patches.resize(1);
    CHECK_THROWS_AS(sample_pair_batch(singles, 4, 0.5, 1, 64, 56), SamplingError);

    // a single slide: no negative pair possible
    std::vector<Slide> one{tiny_slides(1, Domain::Target)[0]};
    CHECK_THROWS_AS(sample_pair_batch(one, 4, 0.5, 1, 64, 56), SamplingError);
}

TEST_CASE("source training is deterministic and copies the mapper into theta_t") {
    const DatasetSplit split = tiny_split(2, Domain::Source);
    const TrainConfig cfg = tiny_config();
    auto a = train_source(split, cfg);
    auto b = train_source(split, cfg);
    CHECK(a->source_hash() == b->source_hash());
    CHECK(a->target_hash() == b->target_hash());
    // the target mapper starts as an exact copy of the trained source mapper
    std::vector<ParamRef> src = a->source_mapper.params("x");
    std::vector<ParamRef> tgt = a->target_mapper.params("x");
    REQUIRE(src.size() == tgt.size());
    for (std::size_t i = 0; i < src.size(); ++i) CHECK(src[i].value->raw() == tgt[i].value->raw());
    CHECK(a->step > 0);

    TrainConfig other = cfg;
    other.seed = 99;
    auto c = train_source(split, other);
    CHECK(c->source_hash() != a->source_hash());
}

TEST_CASE("source training writes parsable per-step loss lines") {
    const DatasetSplit split = tiny_split(2, Domain::Source);
    std::ostringstream log;
    auto bundle = train_source(split, tiny_config(), &log);
    std::istringstream in(log.str());
    std::string line;
    int lines = 0;
    int last_step = 0;
    while (std::getline(in, line)) {
        const LossReport r = LossReport::from_line(line);
        CHECK(r.l_c.has_value());
        CHECK(r.step == last_step + 1);
        last_step = r.step;
        ++lines;
    }
    CHECK(lines == static_cast<int>(bundle->step));
    CHECK(static_cast<int>(bundle->loss_tail.size()) == lines);
}

TEST_CASE("adaptation updates only the parameter sets each step owns") {
    const DatasetSplit src = tiny_split(2, Domain::Source);
    const DatasetSplit tgt = tiny_split(2, Domain::Target);
    auto bundle = train_source(src, tiny_config());
    const std::uint64_t theta_s_before = bundle->source_hash();

    std::vector<AdaptStepTrace> trace;
    adapt_target(*bundle, src.train, tgt.train, AdaptMode::AdvPlusSiamese, nullptr, &trace);
    REQUIRE(trace.size() == 2 * 4);  // 2 iterations x 4 phases

    CHECK(bundle->source_hash() == theta_s_before);
    std::map<std::string, const AdaptStepTrace*> phases;
    for (int iter = 0; iter < 2; ++iter) {
        phases.clear();
        for (const AdaptStepTrace& t : trace)
            if (t.iteration == iter) phases[t.phase] = &t;
        REQUIRE(phases.size() == 4);
        const auto *start = phases["start"], *disc = phases["after_disc"];
        const auto *target = phases["after_target"], *siam = phases["after_siamese"];
        // theta_S is frozen through the whole stage
        CHECK(start->hash_source == siam->hash_source);
        // step (iii) touches the discriminator only
        CHECK(start->hash_disc != disc->hash_disc);
        CHECK(start->hash_target == disc->hash_target);
        CHECK(start->hash_head == disc->hash_head);
        // step (iv) touches the target mapper only
        CHECK(disc->hash_target != target->hash_target);
        CHECK(disc->hash_disc == target->hash_disc);
        CHECK(disc->hash_head == target->hash_head);
        // step (v) touches the head and the shared target mapper
        CHECK(target->hash_head != siam->hash_head);
        CHECK(target->hash_target != siam->hash_target);
        CHECK(target->hash_disc == siam->hash_disc);
    }
}

TEST_CASE("adv-only mode never touches the siamese head") {
    const DatasetSplit src = tiny_split(2, Domain::Source);
    const DatasetSplit tgt = tiny_split(2, Domain::Target);
    auto bundle = train_source(src, tiny_config());
    const std::uint64_t head_before = bundle->head_hash();

    std::vector<AdaptStepTrace> trace;
    adapt_target(*bundle, src.train, tgt.train, AdaptMode::AdvOnly, nullptr, &trace);
    CHECK(trace.size() == 2 * 3);  // no after_siamese records
    for (const AdaptStepTrace& t : trace) CHECK(t.phase != "after_siamese");
    CHECK(bundle->head_hash() == head_before);
}

TEST_CASE("zero learning rates make adaptation a no-op on the parameters") {
    const DatasetSplit src = tiny_split(2, Domain::Source);
    const DatasetSplit tgt = tiny_split(2, Domain::Target);
    TrainConfig cfg = tiny_config();
    auto bundle = train_source(src, cfg);
    bundle->config.lr_discriminator = 0.0;
    bundle->config.lr_target = 0.0;
    bundle->config.lr_head = 0.0;

    const std::uint64_t disc_before = bundle->discriminator_hash();
    const std::uint64_t head_before = bundle->head_hash();
    adapt_target(*bundle, src.train, tgt.train, AdaptMode::AdvPlusSiamese);
    CHECK(bundle->discriminator_hash() == disc_before);
    CHECK(bundle->head_hash() == head_before);
    // theta_T was re-copied from theta_S and then never moved
    CHECK(bundle->target_mapper.params("x").size() == bundle->source_mapper.params("x").size());
    std::vector<ParamRef> srcp = bundle->source_mapper.params("x");
    std::vector<ParamRef> tgtp = bundle->target_mapper.params("x");
    for (std::size_t i = 0; i < srcp.size(); ++i) CHECK(srcp[i].value->raw() == tgtp[i].value->raw());
}

TEST_CASE("adaptation logs the expected loss fields per mode") {
    const DatasetSplit src = tiny_split(2, Domain::Source);
    const DatasetSplit tgt = tiny_split(2, Domain::Target);
    auto bundle = train_source(src, tiny_config());

    std::ostringstream adv_log;
    adapt_target(*bundle, src.train, tgt.train, AdaptMode::AdvOnly, &adv_log);
    std::istringstream in(adv_log.str());
    std::string line;
    while (std::getline(in, line)) {
        const LossReport r = LossReport::from_line(line);
        CHECK(r.l_adv_d.has_value());
        CHECK(r.l_adv_m.has_value());
        CHECK(*r.l_a == doctest::Approx(*r.l_adv_d + *r.l_adv_m));
        CHECK(!r.l_s.has_value());
        CHECK(!r.l_t.has_value());
    }

    std::ostringstream both_log;
    adapt_target(*bundle, src.train, tgt.train, AdaptMode::AdvPlusSiamese, &both_log);
    std::istringstream in2(both_log.str());
    while (std::getline(in2, line)) {
        const LossReport r = LossReport::from_line(line);
        REQUIRE(r.l_s.has_value());
        REQUIRE(r.l_t.has_value());
        CHECK(*r.l_t == doctest::Approx(*r.l_a + *r.l_s));
    }
}

TEST_CASE("patch predictions are probabilities aligned with the slides") {
    const DatasetSplit split = tiny_split(2, Domain::Source);
    auto bundle = train_source(split, tiny_config());
    const auto probs = predict_patches(*bundle, WhichMapper::Source, split.test);
    REQUIRE(probs.size() == split.test.size());
    for (std::size_t s = 0; s < probs.size(); ++s) {
        CHECK(probs[s].size() == split.test[s].patches.size());
        for (double p : probs[s]) {
            CHECK(p >= 0.0);
            CHECK(p <= 1.0);
        }
    }
    const double acc = patch_accuracy(*bundle, WhichMapper::Source, split.test);
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
}

TEST_CASE("discriminator accuracy is a fraction") {
    const DatasetSplit src = tiny_split(2, Domain::Source);
    const DatasetSplit tgt = tiny_split(2, Domain::Target);
    auto bundle = train_source(src, tiny_config());
    adapt_target(*bundle, src.train, tgt.train, AdaptMode::AdvOnly);
    const double acc = discriminator_accuracy(*bundle, src.test, tgt.test, 11);
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
}

}  // TEST_SUITE
