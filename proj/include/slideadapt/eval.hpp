#pragma once

#include <string>
#include <vector>

#include "slideadapt/ingest.hpp"
#include "slideadapt/training.hpp"

namespace slideadapt {

struct SlidePrediction {
    std::string slide_id;
    std::vector<double> patch_probs;  // High-grade probability per patch
    std::vector<GradeLabel> patch_votes;
    GradeLabel slide_grade = GradeLabel::Low;
    double mean_high_prob = 0.0;
};

struct ConfusionMatrix {
    std::int64_t tn = 0, fp = 0, fn = 0, tp = 0;  // Low = negative, High = positive
    double accuracy = 0.0;
    std::int64_t total() const { return tn + fp + fn + tp; }
};

struct McNemarResult {
    std::int64_t b = 0;  // a correct, b wrong
    std::int64_t c = 0;  // a wrong, b correct
    double p_value = 1.0;
};

struct EvalReport {
    std::string mapper;
    double patch_accuracy = 0.0;
    double slide_accuracy = 0.0;
    ConfusionMatrix confusion;
    std::vector<SlidePrediction> predictions;
    std::vector<GradeLabel> truths;  // aligned with predictions
};

// Each patch votes High iff prob >= 0.5; ties in the vote are broken by the
// mean High probability (>= 0.5 -> High).
SlidePrediction vote_slide(const std::vector<double>& patch_probs);

ConfusionMatrix confusion(const std::vector<GradeLabel>& preds, const std::vector<GradeLabel>& truths);

// Exact two-sided binomial McNemar test on the discordant counts.
McNemarResult mcnemar(const std::vector<bool>& correct_a, const std::vector<bool>& correct_b);
McNemarResult mcnemar_counts(std::int64_t b, std::int64_t c);

EvalReport evaluate(ModelBundle& bundle, WhichMapper which, const std::vector<Slide>& test_slides);

// Human-readable structured text, written with fixed 17-significant-digit
// formatting so identical runs produce identical bytes.
void write_eval_report(const std::string& path, const EvalReport& report);
EvalReport read_eval_report(const std::string& path);

// McNemar comparison between two saved reports over their shared slides.
McNemarResult compare_reports(const EvalReport& a, const EvalReport& b);

}  // namespace slideadapt
