#pragma once

// Segmentation and image-quality metrics: mIoU over label assignments, SSIM
// (11x11 Gaussian window, sigma 1.5) and PSNR.

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "partsplat/errors.hpp"
#include "partsplat/image.hpp"
#include "partsplat/palette.hpp"

namespace partsplat {

inline constexpr double kPsnrCap = 99.0;

struct IoUReport {
    std::vector<double> per_label;   // NaN where undefined
    std::vector<bool> defined;       // label present in pred or gt
    double miou = 0;                 // mean over defined labels
};

inline IoUReport miou_from_counts(const std::vector<long>& intersection,
                                  const std::vector<long>& union_) {
    IoUReport report;
    report.per_label.assign(intersection.size(), std::numeric_limits<double>::quiet_NaN());
    report.defined.assign(intersection.size(), false);
    double sum = 0;
    int defined_count = 0;
    for (size_t l = 0; l < intersection.size(); ++l) {
        if (union_[l] == 0) continue;  // absent from both pred and gt
        report.defined[l] = true;
        report.per_label[l] = static_cast<double>(intersection[l]) / union_[l];
        sum += report.per_label[l];
        ++defined_count;
    }
    report.miou = defined_count == 0 ? 0.0 : sum / defined_count;
    return report;
}

inline IoUReport miou_3d(std::span<const int> pred, std::span<const int> gt,
                         size_t label_count) {
    if (pred.size() != gt.size()) throw StructuralError("miou_3d: length mismatch");
    std::vector<long> inter(label_count, 0), uni(label_count, 0);
    for (size_t i = 0; i < pred.size(); ++i) {
        const int p = pred[i], g = gt[i];
        if (p < 0 || g < 0 || static_cast<size_t>(p) >= label_count ||
            static_cast<size_t>(g) >= label_count)
            throw StructuralError("miou_3d: label index out of range");
        if (p == g) {
            ++inter[static_cast<size_t>(p)];
            ++uni[static_cast<size_t>(p)];
        } else {
            ++uni[static_cast<size_t>(p)];
            ++uni[static_cast<size_t>(g)];
        }
    }
    return miou_from_counts(inter, uni);
}

// Pixels snapped to the nearest palette color first (ties to the lower index).
inline IoUReport miou_2d(const Image& pred, const Image& gt, const LabelPalette& palette) {
    require_same_shape(pred, gt, "miou_2d");
    std::vector<long> inter(palette.size(), 0), uni(palette.size(), 0);
    for (int y = 0; y < pred.height; ++y) {
        for (int x = 0; x < pred.width; ++x) {
            const size_t p = palette.nearest(pred.rgb(y, x));
            const size_t g = palette.nearest(gt.rgb(y, x));
            if (p == g) {
                ++inter[p];
                ++uni[p];
            } else {
                ++uni[p];
                ++uni[g];
            }
        }
    }
    return miou_from_counts(inter, uni);
}

namespace detail {

inline const std::vector<double>& ssim_window() {
    static const std::vector<double> w = [] {
        constexpr int kRadius = 5;
        constexpr double kSigma = 1.5;
        std::vector<double> win(11 * 11);
        double sum = 0;
        for (int y = -kRadius; y <= kRadius; ++y)
            for (int x = -kRadius; x <= kRadius; ++x) {
                const double g = std::exp(-(x * x + y * y) / (2.0 * kSigma * kSigma));
                win[static_cast<size_t>((y + kRadius) * 11 + (x + kRadius))] = g;
                sum += g;
            }
        for (double& v : win) v /= sum;
        return win;
    }();
    return w;
}

}  // namespace detail

// Single-scale SSIM for float images in [0,1]; windows fully inside the image
// (valid mode), averaged over channels.
inline double ssim(const Image& a, const Image& b) {
    require_same_shape(a, b, "ssim");
    if (a.height < 11 || a.width < 11)
        throw DegenerateError("ssim: images smaller than the 11x11 window");
    constexpr double kC1 = 0.01 * 0.01;  // (0.01 * L)^2, L = 1
    constexpr double kC2 = 0.03 * 0.03;
    const auto& win = detail::ssim_window();

    double total = 0;
    long count = 0;
    for (int c = 0; c < a.channels; ++c) {
        for (int y = 0; y + 11 <= a.height; ++y) {
            for (int x = 0; x + 11 <= a.width; ++x) {
                double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
                for (int wy = 0; wy < 11; ++wy)
                    for (int wx = 0; wx < 11; ++wx) {
                        const double w = win[static_cast<size_t>(wy * 11 + wx)];
                        const double va = a.at(y + wy, x + wx, c);
                        const double vb = b.at(y + wy, x + wx, c);
                        mu_a += w * va;
                        mu_b += w * vb;
                        aa += w * va * va;
                        bb += w * vb * vb;
                        ab += w * va * vb;
                    }
                const double var_a = aa - mu_a * mu_a;
                const double var_b = bb - mu_b * mu_b;
                const double cov = ab - mu_a * mu_b;
                total += ((2 * mu_a * mu_b + kC1) * (2 * cov + kC2)) /
                         ((mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2));
                ++count;
            }
        }
    }
    return total / count;
}

inline double psnr(const Image& a, const Image& b) {
    require_same_shape(a, b, "psnr");
    double mse = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.data.size());
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

}  // namespace partsplat
