#pragma once

#include <vector>

#include "slideadapt/image.hpp"
#include "slideadapt/ingest.hpp"

namespace slideadapt {

struct Heatmap {
    int rows = 0, cols = 0;
    std::vector<double> grid;          // High-grade probability per cell
    std::vector<std::uint8_t> present; // 0 for tiles filtered out at ingest
    std::vector<double> smoothed;
    int render_h = 0, render_w = 0;
    std::vector<std::uint8_t> rendered_rgba;  // composite over the thumbnail
};

// Places per-patch probabilities on the slide grid, Gaussian-smooths with
// sigma in grid cells (missing tiles carry probability 0.5 but zero weight,
// so they neither pull the smoothing nor display), maps through a
// blue(0) -> red(1) colormap and alpha-composites at 0.5 over the thumbnail.
Heatmap render_heatmap(const Slide& slide, const std::vector<double>& patch_probs,
                       const Image& thumbnail, double sigma);

}  // namespace slideadapt
