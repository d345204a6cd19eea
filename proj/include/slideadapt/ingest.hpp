#pragma once

#include <optional>
#include <string>
#include <vector>

#include "slideadapt/image.hpp"
#include "slideadapt/tensor.hpp"

namespace slideadapt {

enum class GradeLabel { Low, High };

enum class InputMode { Train, Eval };

inline const char* grade_name(GradeLabel g) { return g == GradeLabel::Low ? "Low" : "High"; }

// Gleason 6-7 -> Low, 8-10 -> High.
GradeLabel gleason_to_grade(int score);

// A pixel counts as tissue when its luma is below this near-white cutoff.
constexpr double kTissueLumaThreshold = 220.0;
constexpr double kDefaultMinTissue = 0.5;

struct Patch {
    Image pixels;
    int grid_row = 0;
    int grid_col = 0;
    double tissue_fraction = 0.0;
    std::string slide_id;
};

struct Slide {
    std::string slide_id;
    std::string patient_id;
    std::optional<int> gleason_score;
    std::optional<GradeLabel> grade;
    std::vector<Patch> patches;
};

struct DatasetSplit {
    std::vector<Slide> train;
    std::vector<Slide> test;
    double ratio = 0.8;
    std::uint64_t seed = 0;
};

// Fraction of pixels whose grayscale luma is below the tissue threshold.
double tissue_fraction(const Image& pixels);

// Non-overlapping grid tiling from the top-left; partial border tiles are
// dropped; tiles below min_tissue are filtered out.
std::vector<Patch> extract_patches(const Image& slide_image, int patch_size, double min_tissue);

// Patients are shuffled with the seeded stream and assigned greedily to the
// training partition until the slide-count target is reached.
DatasetSplit split_patient_disjoint(const std::vector<Slide>& slides, double ratio, std::uint64_t seed);

// Resize to `resize` x `resize`, crop to `crop` x `crop` (random + maybe
// horizontal flip in train mode, center crop in eval), scale to [0,1], then
// standardize with mean 0.5 / std 0.5 per channel. Output is 3 x crop x crop.
Tensor prepare_input(const Patch& patch, InputMode mode, std::uint64_t seed, int resize = 256, int crop = 224);

// Dataset directory layout:
//   <root>/<patient_id>__<slide_id>/r<row>_c<col>.png
//   <root>/manifest.txt   with one record per slide:
//     slide_id=<id> patient_id=<id> gleason_score=<6..10|->
void write_dataset(const std::string& root, const std::vector<Slide>& slides);
std::vector<Slide> load_dataset(const std::string& root, bool load_pixels = true);

// Split manifest: one "slide_id=<id> split=<train|test>" line per slide.
void write_split_manifest(const std::string& path, const DatasetSplit& split);
DatasetSplit load_split(const std::string& split_path, const std::vector<Slide>& slides);

}  // namespace slideadapt
