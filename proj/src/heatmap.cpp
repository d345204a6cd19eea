#include "slideadapt/heatmap.hpp"

#include <algorithm>
#include <cmath>

#include "slideadapt/errors.hpp"

namespace slideadapt {

Heatmap render_heatmap(const Slide& slide, const std::vector<double>& patch_probs,
                       const Image& thumbnail, double sigma) {
    if (slide.patches.empty()) throw InvalidInputError("render_heatmap: slide has no patches");
    if (slide.patches.size() != patch_probs.size())
        throw InvalidInputError("render_heatmap: probability count does not match patch count");
    if (thumbnail.empty()) throw InvalidInputError("render_heatmap: empty thumbnail");
    if (sigma < 0.0) throw InvalidInputError("render_heatmap: sigma must be >= 0");

    Heatmap hm;
    for (const Patch& p : slide.patches) {
        hm.rows = std::max(hm.rows, p.grid_row + 1);
        hm.cols = std::max(hm.cols, p.grid_col + 1);
    }
    const std::size_t cells = static_cast<std::size_t>(hm.rows) * hm.cols;
    hm.grid.assign(cells, 0.5);
    hm.present.assign(cells, 0);
    for (std::size_t i = 0; i < slide.patches.size(); ++i) {
        const std::size_t idx =
            static_cast<std::size_t>(slide.patches[i].grid_row) * hm.cols + slide.patches[i].grid_col;
        hm.grid[idx] = patch_probs[i];
        hm.present[idx] = 1;
    }

    // Normalized (mask-weighted) Gaussian smoothing: missing cells carry zero
    // weight. With a full grid this reduces to the plain reflect-boundary
    // blur, which preserves constants and the grid mean.
    if (sigma > 0.0) {
        std::vector<double> weighted(cells), mask(cells);
        for (std::size_t i = 0; i < cells; ++i) {
            mask[i] = hm.present[i] ? 1.0 : 0.0;
            weighted[i] = hm.grid[i] * mask[i];
        }
        const std::vector<double> num = gaussian_blur_2d(weighted, hm.rows, hm.cols, sigma);
        const std::vector<double> den = gaussian_blur_2d(mask, hm.rows, hm.cols, sigma);
        hm.smoothed.assign(cells, 0.5);
        for (std::size_t i = 0; i < cells; ++i)
            if (den[i] > 1e-12) hm.smoothed[i] = std::clamp(num[i] / den[i], 0.0, 1.0);
    } else {
        hm.smoothed = hm.grid;
    }

    // Blue (0) -> red (1), alpha 0.5 over the thumbnail; filtered tiles stay
    // fully transparent.
    hm.render_h = thumbnail.height;
    hm.render_w = thumbnail.width;
    hm.rendered_rgba.assign(static_cast<std::size_t>(hm.render_h) * hm.render_w * 4, 0);
    for (int y = 0; y < hm.render_h; ++y) {
        const int row = std::min(hm.rows - 1, y * hm.rows / hm.render_h);
        for (int x = 0; x < hm.render_w; ++x) {
            const int col = std::min(hm.cols - 1, x * hm.cols / hm.render_w);
            const std::size_t cell = static_cast<std::size_t>(row) * hm.cols + col;
            const std::size_t out = (static_cast<std::size_t>(y) * hm.render_w + x) * 4;
            const double tr = thumbnail.at(y, x, 0), tg = thumbnail.at(y, x, 1), tb = thumbnail.at(y, x, 2);
            if (hm.present[cell]) {
                const double v = hm.smoothed[cell];
                const double hr = 255.0 * v, hg = 0.0, hb = 255.0 * (1.0 - v);
                hm.rendered_rgba[out] = clamp_u8(0.5 * hr + 0.5 * tr);
                hm.rendered_rgba[out + 1] = clamp_u8(0.5 * hg + 0.5 * tg);
                hm.rendered_rgba[out + 2] = clamp_u8(0.5 * hb + 0.5 * tb);
            } else {
                hm.rendered_rgba[out] = clamp_u8(tr);
                hm.rendered_rgba[out + 1] = clamp_u8(tg);
                hm.rendered_rgba[out + 2] = clamp_u8(tb);
            }
            hm.rendered_rgba[out + 3] = 255;
        }
    }
    return hm;
}

}  // namespace slideadapt
