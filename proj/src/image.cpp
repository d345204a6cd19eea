#include "slideadapt/image.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "slideadapt/errors.hpp"

namespace slideadapt {

std::uint8_t clamp_u8(double v) {
    if (v <= 0.0) return 0;
    if (v >= 255.0) return 255;
    return static_cast<std::uint8_t>(std::lround(v));
}

Image resize_bilinear(const Image& src, int out_h, int out_w) {
    if (src.empty()) throw InvalidInputError("resize_bilinear: empty image");
    Image dst(out_h, out_w);
    const double sy = static_cast<double>(src.height) / out_h;
    const double sx = static_cast<double>(src.width) / out_w;
    for (int y = 0; y < out_h; ++y) {
        // Pixel-center alignment.
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(src.height - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, src.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(src.width - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, src.width - 1);
            const double wx = fx - x0;
            for (int c = 0; c < 3; ++c) {
                const double top = (1.0 - wx) * src.at(y0, x0, c) + wx * src.at(y0, x1, c);
                const double bot = (1.0 - wx) * src.at(y1, x0, c) + wx * src.at(y1, x1, c);
                dst.at(y, x, c) = clamp_u8((1.0 - wy) * top + wy * bot);
            }
        }
    }
    return dst;
}

void rgb_to_hsv(double r, double g, double b, double& h, double& s, double& v) {
    r /= 255.0;
    g /= 255.0;
    b /= 255.0;
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double d = mx - mn;
    v = mx;
    s = mx > 0.0 ? d / mx : 0.0;
    if (d <= 0.0) {
        h = 0.0;
    } else if (mx == r) {
        h = 60.0 * std::fmod((g - b) / d, 6.0);
    } else if (mx == g) {
        h = 60.0 * ((b - r) / d + 2.0);
    } else {
        h = 60.0 * ((r - g) / d + 4.0);
    }
    if (h < 0.0) h += 360.0;
}

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
    h = std::fmod(h, 360.0);
    if (h < 0.0) h += 360.0;
    const double c = v * s;
    const double x = c * (1.0 - std::fabs(std::fmod(h / 60.0, 2.0) - 1.0));
    const double m = v - c;
    double rp = 0, gp = 0, bp = 0;
    if (h < 60) {
        rp = c, gp = x;
    } else if (h < 120) {
        rp = x, gp = c;
    } else if (h < 180) {
        gp = c, bp = x;
    } else if (h < 240) {
        gp = x, bp = c;
    } else if (h < 300) {
        rp = x, bp = c;
    } else {
        rp = c, bp = x;
    }
    r = (rp + m) * 255.0;
    g = (gp + m) * 255.0;
    b = (bp + m) * 255.0;
}

namespace {

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double w = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = w;
        sum += w;
    }
    for (double& w : k) w /= sum;
    return k;
}

// Half-sample symmetric reflection: ... 2 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n;
    int j = ((i % period) + period) % period;
    return j < n ? j : period - 1 - j;
}

}  // namespace

std::vector<double> gaussian_blur_2d(const std::vector<double>& plane, int h, int w, double sigma) {
    if (sigma <= 0.0) return plane;
    const std::vector<double> k = gaussian_kernel(sigma);
    const int radius = static_cast<int>(k.size() / 2);

    std::vector<double> tmp(plane.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int t = -radius; t <= radius; ++t) {
                acc += k[static_cast<std::size_t>(t + radius)] *
                       plane[static_cast<std::size_t>(y) * w + reflect_index(x + t, w)];
            }
            tmp[static_cast<std::size_t>(y) * w + x] = acc;
        }
    }
    std::vector<double> out(plane.size());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int t = -radius; t <= radius; ++t) {
                acc += k[static_cast<std::size_t>(t + radius)] *
                       tmp[static_cast<std::size_t>(reflect_index(y + t, h)) * w + x];
            }
            out[static_cast<std::size_t>(y) * w + x] = acc;
        }
    }
    return out;
}

Image read_png(const std::string& path) {
    cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
    if (bgr.empty()) throw DataError("cannot read image: " + path);
    Image im(bgr.rows, bgr.cols);
    for (int y = 0; y < bgr.rows; ++y) {
        const auto* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < bgr.cols; ++x) {
            im.at(y, x, 0) = row[x][2];
            im.at(y, x, 1) = row[x][1];
            im.at(y, x, 2) = row[x][0];
        }
    }
    return im;
}

void write_png(const std::string& path, const Image& im) {
    if (im.empty()) throw InvalidInputError("write_png: empty image");
    cv::Mat bgr(im.height, im.width, CV_8UC3);
    for (int y = 0; y < im.height; ++y) {
        auto* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < im.width; ++x) {
            row[x][2] = im.at(y, x, 0);
            row[x][1] = im.at(y, x, 1);
            row[x][0] = im.at(y, x, 2);
        }
    }
    if (!cv::imwrite(path, bgr)) throw DataError("cannot write image: " + path);
}

void write_png_rgba(const std::string& path, int h, int w, const std::vector<std::uint8_t>& rgba) {
    cv::Mat bgra(h, w, CV_8UC4);
    for (int y = 0; y < h; ++y) {
        auto* row = bgra.ptr<cv::Vec4b>(y);
        for (int x = 0; x < w; ++x) {
            const std::size_t i = (static_cast<std::size_t>(y) * w + x) * 4;
            row[x][2] = rgba[i];
            row[x][1] = rgba[i + 1];
            row[x][0] = rgba[i + 2];
            row[x][3] = rgba[i + 3];
        }
    }
    if (!cv::imwrite(path, bgra)) throw DataError("cannot write image: " + path);
}

}  // namespace slideadapt
