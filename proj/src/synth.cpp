#include "slideadapt/synth.hpp"

#include <cmath>

#include "slideadapt/errors.hpp"
#include "slideadapt/rng.hpp"

namespace slideadapt {

Image apply_shift(const Image& pixels, const DomainShift& shift, std::uint64_t seed) {
    if (pixels.empty()) throw InvalidInputError("apply_shift: empty image");
    if (shift.is_identity()) return pixels;

    const int h = pixels.height, w = pixels.width;
    std::vector<double> planes(static_cast<std::size_t>(h) * w * 3);
    auto plane_at = [&](int c) { return planes.data() + static_cast<std::size_t>(c) * h * w; };

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double r = pixels.at(y, x, 0), g = pixels.at(y, x, 1), b = pixels.at(y, x, 2);
            if (shift.hue_rotation != 0.0) {
                double hh, ss, vv;
                rgb_to_hsv(r, g, b, hh, ss, vv);
                hsv_to_rgb(hh + shift.hue_rotation, ss, vv, r, g, b);
            }
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            plane_at(0)[i] = std::clamp(r * shift.brightness_scale, 0.0, 255.0);
            plane_at(1)[i] = std::clamp(g * shift.brightness_scale, 0.0, 255.0);
            plane_at(2)[i] = std::clamp(b * shift.brightness_scale, 0.0, 255.0);
        }
    }

    if (shift.blur_sigma > 0.0) {
        for (int c = 0; c < 3; ++c) {
            std::vector<double> plane(plane_at(c), plane_at(c) + static_cast<std::size_t>(h) * w);
            const std::vector<double> blurred = gaussian_blur_2d(plane, h, w, shift.blur_sigma);
            std::copy(blurred.begin(), blurred.end(), plane_at(c));
        }
    }

    Rng rng(seed);
    Image out(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            for (int c = 0; c < 3; ++c) {
                double v = plane_at(c)[i];
                if (shift.noise_std > 0.0) v += rng.normal(0.0, shift.noise_std);
                out.at(y, x, c) = clamp_u8(v);
            }
        }
    }
    return out;
}

namespace {

// H&E-ish palette.
constexpr std::uint8_t kBgR = 231, kBgG = 181, kBgB = 202;     // pale eosin pink
constexpr double kBlobR = 104, kBlobG = 58, kBlobB = 138;      // hematoxylin purple

Image render_patch(const TextureParams& texture, int size, Rng& rng) {
    Image im = Image::filled(size, size, kBgR, kBgG, kBgB);
    const int blobs = static_cast<int>(rng.uniform_int(texture.blob_count_min, texture.blob_count_max));
    for (int k = 0; k < blobs; ++k) {
        const double cx = rng.uniform(0.0, static_cast<double>(size));
        const double cy = rng.uniform(0.0, static_cast<double>(size));
        const double radius = rng.uniform(texture.radius_min, texture.radius_max);
        const double jitter = rng.uniform(-12.0, 12.0);
        const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius - 1)));
        const int y1 = std::min(size - 1, static_cast<int>(std::ceil(cy + radius + 1)));
        const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius - 1)));
        const int x1 = std::min(size - 1, static_cast<int>(std::ceil(cx + radius + 1)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                if (d2 <= radius * radius) {
                    im.at(y, x, 0) = clamp_u8(kBlobR + jitter);
                    im.at(y, x, 1) = clamp_u8(kBlobG + jitter);
                    im.at(y, x, 2) = clamp_u8(kBlobB + jitter);
                }
            }
        }
    }
    return im;
}

}  // namespace

std::vector<Slide> generate_dataset(const SynthConfig& config, Domain domain) {
    config.validate();
    std::vector<Slide> slides;
    int slide_index = 0;
    for (const GradeLabel cls : {GradeLabel::Low, GradeLabel::High}) {
        const TextureParams& texture = (cls == GradeLabel::Low) ? config.texture_low : config.texture_high;
        for (int s = 0; s < config.n_slides_per_class; ++s, ++slide_index) {
            // Slide content is seeded by (seed, index) only: domains share
            // geometry and differ purely by the appearance shift.
            Rng slide_rng(Rng::mix(config.seed, static_cast<std::uint64_t>(slide_index)));
            Slide slide;
            slide.slide_id = std::string(cls == GradeLabel::Low ? "low" : "high") + std::to_string(s);
            slide.patient_id = "P" + std::to_string(slide_index);
            slide.gleason_score = (cls == GradeLabel::Low)
                                      ? static_cast<int>(slide_rng.uniform_int(6, 7))
                                      : static_cast<int>(slide_rng.uniform_int(8, 10));
            slide.grade = cls;

            const int n_patches =
                static_cast<int>(slide_rng.uniform_int(config.patches_per_slide_min, config.patches_per_slide_max));
            const int grid_cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_patches))));
            for (int p = 0; p < n_patches; ++p) {
                Patch patch;
                patch.slide_id = slide.slide_id;
                patch.grid_row = p / grid_cols;
                patch.grid_col = p % grid_cols;
                patch.pixels = render_patch(texture, config.patch_size, slide_rng);
                if (domain == Domain::Target) {
                    const std::uint64_t noise_seed =
                        Rng::mix(config.seed, 0x51000000ULL + static_cast<std::uint64_t>(slide_index) * 4096 + p);
                    patch.pixels = apply_shift(patch.pixels, config.shift, noise_seed);
                }
                patch.tissue_fraction = tissue_fraction(patch.pixels);
                slide.patches.push_back(std::move(patch));
            }
            slides.push_back(std::move(slide));
        }
    }
    return slides;
}

}  // namespace slideadapt
