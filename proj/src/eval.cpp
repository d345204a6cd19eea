#include "slideadapt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "slideadapt/errors.hpp"

namespace slideadapt {

SlidePrediction vote_slide(const std::vector<double>& patch_probs) {
    if (patch_probs.empty()) throw InvalidInputError("vote_slide: no patches");
    for (double p : patch_probs)
        if (!(p >= 0.0 && p <= 1.0)) throw InvalidInputError("vote_slide: probability outside [0,1]");
    SlidePrediction pred;
    pred.patch_probs = patch_probs;
    std::int64_t high_votes = 0;
    double sum = 0.0;
    for (double p : patch_probs) {
        const GradeLabel vote = p >= 0.5 ? GradeLabel::High : GradeLabel::Low;
        pred.patch_votes.push_back(vote);
        if (vote == GradeLabel::High) ++high_votes;
        sum += p;
    }
    pred.mean_high_prob = sum / static_cast<double>(patch_probs.size());
    const std::int64_t low_votes = static_cast<std::int64_t>(patch_probs.size()) - high_votes;
    if (high_votes != low_votes)
        pred.slide_grade = high_votes > low_votes ? GradeLabel::High : GradeLabel::Low;
    else
        pred.slide_grade = pred.mean_high_prob >= 0.5 ? GradeLabel::High : GradeLabel::Low;
    return pred;
}

ConfusionMatrix confusion(const std::vector<GradeLabel>& preds, const std::vector<GradeLabel>& truths) {
    if (preds.size() != truths.size() || preds.empty())
        throw InvalidInputError("confusion: prediction/truth lengths must match and be >= 1");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const bool p = preds[i] == GradeLabel::High;
        const bool t = truths[i] == GradeLabel::High;
        if (p && t)
            ++cm.tp;
        else if (!p && !t)
            ++cm.tn;
        else if (p && !t)
            ++cm.fp;
        else
            ++cm.fn;
    }
    cm.accuracy = static_cast<double>(cm.tn + cm.tp) / static_cast<double>(cm.total());
    return cm;
}

McNemarResult mcnemar_counts(std::int64_t b, std::int64_t c) {
    if (b < 0 || c < 0) throw InvalidInputError("mcnemar: negative counts");
    McNemarResult r;
    r.b = b;
    r.c = c;
    const std::int64_t n = b + c;
    if (n == 0) {
        r.p_value = 1.0;
        return r;
    }
    // Two-sided exact binomial: p = min(1, 2 * sum_{k=max(b,c)}^{n} C(n,k) / 2^n).
    const std::int64_t k0 = std::max(b, c);
    double tail = 0.0;
    for (std::int64_t k = k0; k <= n; ++k) {
        const double log_choose = std::lgamma(static_cast<double>(n + 1)) -
                                  std::lgamma(static_cast<double>(k + 1)) -
                                  std::lgamma(static_cast<double>(n - k + 1));
        tail += std::exp(log_choose - static_cast<double>(n) * std::log(2.0));
    }
    r.p_value = std::min(1.0, 2.0 * tail);
    return r;
}

McNemarResult mcnemar(const std::vector<bool>& correct_a, const std::vector<bool>& correct_b) {
    if (correct_a.size() != correct_b.size())
        throw InvalidInputError("mcnemar: correctness vectors must have equal length");
    std::int64_t b = 0, c = 0;
    for (std::size_t i = 0; i < correct_a.size(); ++i) {
        if (correct_a[i] && !correct_b[i]) ++b;
        if (!correct_a[i] && correct_b[i]) ++c;
    }
    return mcnemar_counts(b, c);
}

EvalReport evaluate(ModelBundle& bundle, WhichMapper which, const std::vector<Slide>& test_slides) {
    if (test_slides.empty()) throw InvalidInputError("evaluate: no test slides");
    for (const Slide& s : test_slides)
        if (!s.grade) throw InvalidInputError("evaluate: unlabeled slide " + s.slide_id);

    EvalReport report;
    report.mapper = which == WhichMapper::Source ? "source" : "target";

    const auto probs = predict_patches(bundle, which, test_slides);
    std::vector<GradeLabel> slide_preds;
    std::int64_t patch_correct = 0, patch_total = 0;
    for (std::size_t s = 0; s < test_slides.size(); ++s) {
        SlidePrediction pred = vote_slide(probs[s]);
        pred.slide_id = test_slides[s].slide_id;
        const bool truth_high = *test_slides[s].grade == GradeLabel::High;
        for (double p : probs[s]) {
            patch_correct += ((p >= 0.5) == truth_high) ? 1 : 0;
            ++patch_total;
        }
        slide_preds.push_back(pred.slide_grade);
        report.truths.push_back(*test_slides[s].grade);
        report.predictions.push_back(std::move(pred));
    }
    report.patch_accuracy = static_cast<double>(patch_correct) / static_cast<double>(patch_total);
    report.confusion = confusion(slide_preds, report.truths);
    report.slide_accuracy = report.confusion.accuracy;
    return report;
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

void write_eval_report(const std::string& path, const EvalReport& report) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write report: " + path);
    out << "mapper=" << report.mapper << "\n";
    out << "patch_accuracy=" << fmt(report.patch_accuracy) << "\n";
    out << "slide_accuracy=" << fmt(report.slide_accuracy) << "\n";
    out << "confusion tn=" << report.confusion.tn << " fp=" << report.confusion.fp
        << " fn=" << report.confusion.fn << " tp=" << report.confusion.tp << "\n";
    for (std::size_t i = 0; i < report.predictions.size(); ++i) {
        const SlidePrediction& p = report.predictions[i];
        out << "slide id=" << p.slide_id << " truth=" << grade_name(report.truths[i])
            << " pred=" << grade_name(p.slide_grade) << " mean_high_prob=" << fmt(p.mean_high_prob) << "\n";
    }
}

EvalReport read_eval_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing report: " + path);
    EvalReport report;
    std::string line;
    int lineno = 0;
    auto parse_grade = [](const std::string& s) {
        if (s == "Low") return GradeLabel::Low;
        if (s == "High") return GradeLabel::High;
        throw ParseError("bad grade label: " + s);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream is(line);
        std::string head;
        is >> head;
        auto value_of = [&](const std::string& token) {
            const auto eq = token.find('=');
            if (eq == std::string::npos)
                throw ParseError("report line " + std::to_string(lineno) + ": expected key=value");
            return token.substr(eq + 1);
        };
        if (head.rfind("mapper=", 0) == 0) {
            report.mapper = value_of(head);
        } else if (head.rfind("patch_accuracy=", 0) == 0) {
            report.patch_accuracy = std::stod(value_of(head));
        } else if (head.rfind("slide_accuracy=", 0) == 0) {
            report.slide_accuracy = std::stod(value_of(head));
        } else if (head == "confusion") {
            std::string tok;
            while (is >> tok) {
                const std::string v = value_of(tok);
                if (tok.rfind("tn=", 0) == 0) report.confusion.tn = std::stoll(v);
                else if (tok.rfind("fp=", 0) == 0) report.confusion.fp = std::stoll(v);
                else if (tok.rfind("fn=", 0) == 0) report.confusion.fn = std::stoll(v);
                else if (tok.rfind("tp=", 0) == 0) report.confusion.tp = std::stoll(v);
            }
            if (report.confusion.total() > 0)
                report.confusion.accuracy = static_cast<double>(report.confusion.tn + report.confusion.tp) /
                                            static_cast<double>(report.confusion.total());
        } else if (head == "slide") {
            SlidePrediction pred;
            std::string tok;
            GradeLabel truth = GradeLabel::Low;
            while (is >> tok) {
                const std::string v = value_of(tok);
                if (tok.rfind("id=", 0) == 0) pred.slide_id = v;
                else if (tok.rfind("truth=", 0) == 0) truth = parse_grade(v);
                else if (tok.rfind("pred=", 0) == 0) pred.slide_grade = parse_grade(v);
                else if (tok.rfind("mean_high_prob=", 0) == 0) pred.mean_high_prob = std::stod(v);
            }
            report.truths.push_back(truth);
            report.predictions.push_back(std::move(pred));
        } else {
            throw ParseError("report line " + std::to_string(lineno) + ": unknown record '" + head + "'");
        }
    }
    return report;
}

McNemarResult compare_reports(const EvalReport& a, const EvalReport& b) {
    std::map<std::string, bool> a_correct;
    for (std::size_t i = 0; i < a.predictions.size(); ++i)
        a_correct[a.predictions[i].slide_id] = a.predictions[i].slide_grade == a.truths[i];
    std::vector<bool> ca, cb;
    for (std::size_t i = 0; i < b.predictions.size(); ++i) {
        const auto it = a_correct.find(b.predictions[i].slide_id);
        if (it == a_correct.end()) continue;
        ca.push_back(it->second);
        cb.push_back(b.predictions[i].slide_grade == b.truths[i]);
    }
    if (ca.empty()) throw InvalidInputError("compare_reports: no shared slides between reports");
    return mcnemar(ca, cb);
}

}  // namespace slideadapt
