#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace slideadapt {

// Interleaved 8-bit RGB image.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> rgb;

    Image() = default;
    Image(int h, int w) : height(h), width(w), rgb(static_cast<std::size_t>(h) * w * 3, 0) {}

    static Image filled(int h, int w, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        Image im(h, w);
        for (std::size_t i = 0; i < im.rgb.size(); i += 3) {
            im.rgb[i] = r;
            im.rgb[i + 1] = g;
            im.rgb[i + 2] = b;
        }
        return im;
    }

    bool empty() const { return height == 0 || width == 0; }

    std::uint8_t& at(int y, int x, int c) {
        return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
    std::uint8_t at(int y, int x, int c) const {
        return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }
};

// Rec. 601 luma on the 0-255 scale.
inline double luma(double r, double g, double b) {
    return 0.299 * r + 0.587 * g + 0.114 * b;
}

Image resize_bilinear(const Image& src, int out_h, int out_w);

// RGB <-> HSV on doubles; h in degrees [0, 360), s and v in [0, 1].
void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v);
void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b);

// Separable Gaussian blur with half-sample symmetric reflection at the
// borders (mass folds back in, so constants and the global mean are
// preserved). sigma == 0 is the identity. Operates per channel on doubles.
std::vector<double> gaussian_blur_2d(const std::vector<double>& plane, int h, int w, double sigma);

std::uint8_t clamp_u8(double v);

// PNG round trip (lossless).
Image read_png(const std::string& path);
void write_png(const std::string& path, const Image& im);

// RGBA variant used by the heatmap renderer.
void write_png_rgba(const std::string& path, int h, int w, const std::vector<std::uint8_t>& rgba);

}  // namespace slideadapt
