#include <doctest.h>

#include <cmath>

#include "slideadapt/losses.hpp"

using namespace slideadapt;

namespace {

Tensor column(std::initializer_list<double> v) {
    Tensor t({static_cast<int>(v.size()), 1});
    int i = 0;
    for (double x : v) t[i++] = x;
    return t;
}

Tensor rows2(std::initializer_list<double> flat) {
    Tensor t({static_cast<int>(flat.size()) / 2, 2});
    int i = 0;
    for (double x : flat) t[i++] = x;
    return t;
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("discriminator loss matches frozen value") {
    const double l = discriminator_loss(column({0.9, 0.8}), column({0.1, 0.3}));
    CHECK(l == doctest::Approx(0.39526976328429736).epsilon(1e-12));
}

TEST_CASE("mapping loss matches frozen value") {
    CHECK(mapping_loss(column({0.25, 0.75})) == doctest::Approx(0.83698821678583580).epsilon(1e-12));
}

TEST_CASE("siamese loss matches frozen value") {
    const double l = siamese_loss(column({0.9, 0.2}), column({1.0, 0.0}));
    CHECK(l == doctest::Approx(0.16425203348601798).epsilon(1e-12));
}

TEST_CASE("loss combination is a plain sum") {
    const double l_a = combine_adversarial(0.39526976328429736, 0.83698821678583580);
    CHECK(l_a == doctest::Approx(1.2322579800701331).epsilon(1e-13));
    CHECK(combine_total(l_a, 0.16425203348601798) == doctest::Approx(1.3965100135561511).epsilon(1e-13));
    // the worked example from the adversarial-batch fixture
    CHECK(combine_total(0.39526976328429736, 0.16425203348601798) ==
          doctest::Approx(0.55952179677031534).epsilon(1e-13));
}

TEST_CASE("uniform predictions give ln 2 everywhere") {
    const double ln2 = std::log(2.0);
    CHECK(mapping_loss(column({0.5, 0.5, 0.5})) == doctest::Approx(ln2).epsilon(1e-15));
    CHECK(discriminator_loss(column({0.5}), column({0.5})) == doctest::Approx(2 * ln2).epsilon(1e-15));
    CHECK(siamese_loss(column({0.5, 0.5}), column({1.0, 0.0})) == doctest::Approx(ln2).epsilon(1e-15));
    const Tensor logits = Tensor::zeros({2, 2});
    CHECK(classification_loss(logits, rows2({1, 0, 0, 1})) == doctest::Approx(ln2).epsilon(1e-15));
}

TEST_CASE("probability clamp keeps extreme inputs finite") {
    const double l0 = mapping_loss(column({0.0}));
    CHECK(std::isfinite(l0));
    CHECK(l0 == doctest::Approx(-std::log(kLossEps)).epsilon(1e-12));
    CHECK(std::isfinite(discriminator_loss(column({0.0}), column({1.0}))));
    CHECK(std::isfinite(siamese_loss(column({0.0, 1.0}), column({1.0, 0.0}))));
}

TEST_CASE("classification loss is invariant to logit shifts") {
    const Tensor labels = rows2({1, 0, 0, 1});
    const Tensor a = rows2({2.0, -1.0, 0.3, 0.9});
    Tensor b = a;
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) b.at(r, c) += 1000.0 * (r + 1);
    CHECK(classification_loss(a, labels) == doctest::Approx(classification_loss(b, labels)).epsilon(1e-12));
}

TEST_CASE("classification loss rejects malformed labels") {
    const Tensor logits = Tensor::zeros({2, 2});
    CHECK_THROWS_AS(classification_loss(logits, rows2({1, 1, 0, 1})), InvalidInputError);
    CHECK_THROWS_AS(classification_loss(logits, rows2({0.5, 0.5, 1, 0})), InvalidInputError);
    CHECK_THROWS_AS(classification_loss(logits, Tensor::zeros({3, 2})), ShapeError);
}

TEST_CASE("empty batches are rejected") {
    CHECK_THROWS(mapping_loss(Tensor::zeros({0, 1})));
    CHECK_THROWS(discriminator_loss(Tensor::zeros({0, 1}), Tensor::zeros({0, 1})));
}

TEST_CASE("loss report line round-trips") {
    LossReport r;
    r.step = 17;
    r.l_adv_d = 1.2322579800701331;
    r.l_adv_m = 0.25;
    r.l_a = 1.4822579800701331;
    r.l_s = 1e-9;
    r.l_t = 1.4822579810701331;
    const LossReport back = LossReport::from_line(r.to_line());
    CHECK(back.step == 17);
    CHECK(!back.l_c.has_value());
    CHECK(*back.l_adv_d == *r.l_adv_d);
    CHECK(*back.l_s == *r.l_s);
    CHECK(*back.l_t == *r.l_t);
}

}  // TEST_SUITE
