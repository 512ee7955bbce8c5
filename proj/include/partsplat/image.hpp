#pragma once

// Dense row-major H x W x C float image, the common pixel container for
// renders, segmentation maps, masks and latent grids.

#include <cmath>
#include <cstddef>
#include <vector>

#include "partsplat/errors.hpp"
#include "partsplat/linalg.hpp"

namespace partsplat {

struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int h, int w, int c, double fill = 0.0)
        : height(h), width(w), channels(c),
          data(static_cast<size_t>(h) * static_cast<size_t>(w) * static_cast<size_t>(c), fill) {
        if (h < 0 || w < 0 || c < 0) throw ParameterError("image dimensions must be non-negative");
    }

    size_t pixel_count() const { return static_cast<size_t>(height) * static_cast<size_t>(width); }
    size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    double& at(int y, int x, int c) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }

    Vec3 rgb(int y, int x) const { return {at(y, x, 0), at(y, x, 1), at(y, x, 2)}; }
    void set_rgb(int y, int x, const Vec3& v) {
        at(y, x, 0) = v.x;
        at(y, x, 1) = v.y;
        at(y, x, 2) = v.z;
    }

    bool same_shape(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b)) throw StructuralError(std::string(what) + ": image shape mismatch");
}

inline double max_abs_difference(const Image& a, const Image& b) {
    double m = 0;
    for (size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

}  // namespace partsplat
