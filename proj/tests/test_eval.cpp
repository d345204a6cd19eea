#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "slideadapt/eval.hpp"

using namespace slideadapt;
namespace fs = std::filesystem;

namespace {

// brute-force exact two-sided binomial via Pascal's triangle
double mcnemar_oracle(int b, int c) {
    const int n = b + c;
    if (n == 0) return 1.0;
    std::vector<std::vector<double>> pascal(n + 1);
    for (int i = 0; i <= n; ++i) {
        pascal[i].assign(i + 1, 1.0);
        for (int j = 1; j < i; ++j) pascal[i][j] = pascal[i - 1][j - 1] + pascal[i - 1][j];
    }
    const int k0 = std::max(b, c);
    double tail = 0.0;
    for (int k = k0; k <= n; ++k) tail += pascal[n][k];
    return std::min(1.0, 2.0 * tail / std::pow(2.0, n));
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("slide vote follows the patch majority") {
    CHECK(vote_slide({0.9, 0.8, 0.1}).slide_grade == GradeLabel::High);
    CHECK(vote_slide({0.1, 0.2, 0.9}).slide_grade == GradeLabel::Low);
    CHECK(vote_slide({0.4}).slide_grade == GradeLabel::Low);
    // a patch at exactly 0.5 votes High
    CHECK(vote_slide({0.5}).slide_grade == GradeLabel::High);
}

TEST_CASE("tied votes fall back to the mean probability") {
    const SlidePrediction high_tie = vote_slide({0.9, 0.2});
    CHECK(high_tie.slide_grade == GradeLabel::High);  // mean 0.55
    const SlidePrediction low_tie = vote_slide({0.6, 0.1});
    CHECK(low_tie.slide_grade == GradeLabel::Low);  // mean 0.35
    CHECK(high_tie.mean_high_prob == doctest::Approx(0.55));
}

TEST_CASE("vote rejects empty and out-of-range probabilities") {
    CHECK_THROWS_AS(vote_slide({}), InvalidInputError);
    CHECK_THROWS_AS(vote_slide({0.5, 1.5}), InvalidInputError);
    CHECK_THROWS_AS(vote_slide({-0.1}), InvalidInputError);
}

TEST_CASE("confusion matrix counts and accuracy") {
    using G = GradeLabel;
    const std::vector<G> preds{G::Low, G::High, G::High, G::Low, G::High};
    const std::vector<G> truths{G::Low, G::High, G::Low, G::High, G::High};
    const ConfusionMatrix cm = confusion(preds, truths);
    CHECK(cm.tn == 1);
    CHECK(cm.tp == 2);
    CHECK(cm.fp == 1);
    CHECK(cm.fn == 1);
    CHECK(cm.accuracy == doctest::Approx(0.6));
}

TEST_CASE("mcnemar matches frozen values") {
    CHECK(mcnemar_counts(10, 2).p_value == doctest::Approx(0.03857421875).epsilon(1e-12));
    CHECK(mcnemar_counts(0, 5).p_value == doctest::Approx(0.0625).epsilon(1e-12));
    CHECK(mcnemar_counts(0, 0).p_value == 1.0);
    CHECK(mcnemar_counts(3, 3).p_value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mcnemar matches a brute-force oracle for all b+c <= 12") {
    for (int b = 0; b <= 12; ++b)
        for (int c = 0; c + b <= 12; ++c) {
            const double got = mcnemar_counts(b, c).p_value;
            const double want = mcnemar_oracle(b, c);
            CHECK(std::abs(got - want) < 1e-12);
        }
}

TEST_CASE("mcnemar is symmetric in b and c") {
    CHECK(mcnemar_counts(7, 3).p_value == doctest::Approx(mcnemar_counts(3, 7).p_value).epsilon(1e-15));
}

TEST_CASE("mcnemar from correctness vectors counts discordant pairs") {
    const std::vector<bool> a{true, true, false, false, true};
    const std::vector<bool> b{true, false, true, false, false};
    const McNemarResult r = mcnemar(a, b);
    CHECK(r.b == 2);  // a right, b wrong
    CHECK(r.c == 1);  // a wrong, b right
    CHECK(r.p_value == doctest::Approx(mcnemar_oracle(2, 1)).epsilon(1e-12));
}

TEST_CASE("eval report round-trips through text") {
    EvalReport r;
    r.mapper = "target";
    r.patch_accuracy = 0.8125;
    r.slide_accuracy = 2.0 / 3.0;
    r.confusion = {1, 0, 1, 1, 2.0 / 3.0};
    for (int i = 0; i < 3; ++i) {
        SlidePrediction p = vote_slide({0.2 + 0.3 * i, 0.9});
        p.slide_id = "slide" + std::to_string(i);
        r.predictions.push_back(p);
        r.truths.push_back(i % 2 ? GradeLabel::High : GradeLabel::Low);
    }
    const fs::path path = fs::temp_directory_path() / "sa_eval_report.txt";
    write_eval_report(path.string(), r);
    const EvalReport back = read_eval_report(path.string());
    CHECK(back.mapper == r.mapper);
    CHECK(back.patch_accuracy == r.patch_accuracy);
    CHECK(back.slide_accuracy == r.slide_accuracy);
    CHECK(back.confusion.fn == 1);
    REQUIRE(back.predictions.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back.predictions[i].slide_id == r.predictions[i].slide_id);
        CHECK(back.predictions[i].slide_grade == r.predictions[i].slide_grade);
        CHECK(back.predictions[i].mean_high_prob == r.predictions[i].mean_high_prob);
        CHECK(back.truths[i] == r.truths[i]);
    }
    fs::remove(path);
}

TEST_CASE("compare_reports runs mcnemar over shared slides") {
    auto make = [](std::vector<std::pair<bool, std::string>> outcomes) {
        EvalReport r;
        for (const auto& [correct, id] : outcomes) {
            SlidePrediction p = vote_slide({correct ? 0.9 : 0.1});
            p.slide_id = id;
            r.predictions.push_back(p);
            r.truths.push_back(GradeLabel::High);
        }
        return r;
    };
    // a correct on s1,s2; b correct on s2,s3; shared slides s1..s3
    const EvalReport a = make({{true, "s1"}, {true, "s2"}, {false, "s3"}});
    const EvalReport b = make({{false, "s1"}, {true, "s2"}, {true, "s3"}});
    const McNemarResult r = compare_reports(a, b);
    CHECK(r.b == 1);
    CHECK(r.c == 1);
    CHECK(r.p_value == doctest::Approx(mcnemar_oracle(1, 1)).epsilon(1e-12));
}

}  // TEST_SUITE
