#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "slideadapt/config.hpp"
#include "slideadapt/eval.hpp"
#include "slideadapt/image.hpp"
#include "slideadapt/ingest.hpp"
#include "slideadapt/losses.hpp"
#include "slideadapt/synth.hpp"

namespace py = pybind11;
using namespace slideadapt;

namespace {

Tensor column(const std::vector<double>& v) {
    Tensor t({static_cast<int>(v.size()), 1});
    t.raw() = v;
    return t;
}

Tensor matrix(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw InvalidInputError("matrix input must be non-empty");
    Tensor t({static_cast<int>(rows.size()), static_cast<int>(rows[0].size())});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size()) throw ShapeError("ragged matrix input");
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            t.at(static_cast<int>(r), static_cast<int>(c)) = rows[r][c];
    }
    return t;
}

Image image_from_array(const py::array_t<std::uint8_t>& arr) {
    const auto buf = arr.request();
    if (buf.ndim != 3 || buf.shape[2] != 3)
        throw ShapeError("image array must have shape (H, W, 3)");
    Image im(static_cast<int>(buf.shape[0]), static_cast<int>(buf.shape[1]));
    const auto* src = static_cast<const std::uint8_t*>(buf.ptr);
    const auto sy = buf.strides[0], sx = buf.strides[1], sc = buf.strides[2];
    for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x)
            for (int c = 0; c < 3; ++c)
                im.at(y, x, c) = src[y * sy + x * sx + c * sc];
    return im;
}

py::array_t<std::uint8_t> image_to_array(const Image& im) {
    py::array_t<std::uint8_t> out({im.height, im.width, 3});
    std::copy(im.rgb.begin(), im.rgb.end(), out.mutable_data());
    return out;
}

}  // namespace

PYBIND11_MODULE(_slideadapt, m) {
    m.doc() = "Core operations: losses, slide voting, McNemar, ingest, synthetic domains";

    // Losses -------------------------------------------------------------
    m.def("classification_loss",
          [](const std::vector<std::vector<double>>& logits, const std::vector<std::vector<double>>& labels) {
              return classification_loss(matrix(logits), matrix(labels));
          },
          py::arg("logits"), py::arg("one_hot_labels"));
    m.def("discriminator_loss",
          [](const std::vector<double>& d_source, const std::vector<double>& d_target) {
              return discriminator_loss(column(d_source), column(d_target));
          },
          py::arg("d_source"), py::arg("d_target"));
    m.def("mapping_loss",
          [](const std::vector<double>& d_target) { return mapping_loss(column(d_target)); },
          py::arg("d_target"));
    m.def("siamese_loss",
          [](const std::vector<double>& probs, const std::vector<double>& labels) {
              return siamese_loss(column(probs), column(labels));
          },
          py::arg("pair_probs"), py::arg("pair_labels"));
    m.def("combine_adversarial", &combine_adversarial, py::arg("l_adv_d"), py::arg("l_adv_m"));
    m.def("combine_total", &combine_total, py::arg("l_a"), py::arg("l_s"));

    // Aggregation and statistics ------------------------------------------
    m.def("vote_slide",
          [](const std::vector<double>& probs) {
              const SlidePrediction p = vote_slide(probs);
              return py::make_tuple(std::string(grade_name(p.slide_grade)), p.mean_high_prob);
          },
          py::arg("patch_probs"), "Returns (grade, mean_high_prob)");
    m.def("mcnemar",
          [](std::int64_t b, std::int64_t c) { return mcnemar_counts(b, c).p_value; },
          py::arg("b"), py::arg("c"), "Exact two-sided binomial p-value on discordant counts");
    m.def("gleason_to_grade",
          [](int score) { return std::string(grade_name(gleason_to_grade(score))); },
          py::arg("gleason_score"));

    // Ingest ---------------------------------------------------------------
    m.def("tissue_fraction",
          [](const py::array_t<std::uint8_t>& rgb) { return tissue_fraction(image_from_array(rgb)); },
          py::arg("rgb"));
    m.def("extract_patches",
          [](const py::array_t<std::uint8_t>& rgb, int patch_size, double min_tissue) {
              const auto patches = extract_patches(image_from_array(rgb), patch_size, min_tissue);
              py::list out;
              for (const Patch& p : patches)
                  out.append(py::make_tuple(p.grid_row, p.grid_col, p.tissue_fraction));
              return out;
          },
          py::arg("rgb"), py::arg("patch_size"), py::arg("min_tissue") = kDefaultMinTissue,
          "Returns [(row, col, tissue_fraction), ...] for kept tiles");

    // Synthetic domain shift ------------------------------------------------
    m.def("apply_shift",
          [](const py::array_t<std::uint8_t>& rgb, double hue_rotation, double brightness_scale,
             double blur_sigma, double noise_std, std::uint64_t seed) {
              DomainShift shift{hue_rotation, brightness_scale, blur_sigma, noise_std};
              return image_to_array(apply_shift(image_from_array(rgb), shift, seed));
          },
          py::arg("rgb"), py::arg("hue_rotation") = 0.0, py::arg("brightness_scale") = 1.0,
          py::arg("blur_sigma") = 0.0, py::arg("noise_std") = 0.0, py::arg("seed") = 0);

    m.attr("TISSUE_LUMA_THRESHOLD") = kTissueLumaThreshold;
    m.attr("LOSS_EPS") = kLossEps;
}
