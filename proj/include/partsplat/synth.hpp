#pragma once

// Synthetic multi-part scenes with ground-truth labels, orbit camera rigs,
// ground-truth segmentation views, and controlled corruption of those views
// (label flips, boundary jitter, per-part view dropout, part merges).

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "partsplat/camera.hpp"
#include "partsplat/errors.hpp"
#include "partsplat/galp.hpp"
#include "partsplat/palette.hpp"
#include "partsplat/rasterizer.hpp"
#include "partsplat/scene.hpp"

namespace partsplat {

enum class Primitive { Sphere, Ellipsoid, BoxShell };

struct PartSpec {
    std::string name;
    Primitive primitive = Primitive::Sphere;
    Vec3 center;
    Vec3 extent = {1, 1, 1};  // radii / half-sizes
    int count = 0;
    Vec3 color;               // appearance and label color

    bool operator==(const PartSpec&) const = default;
};

struct SceneSpec {
    std::vector<PartSpec> parts;
    double global_scale = 1.0;
    unsigned seed = 0;
    double opacity = 0.95;
    Vec3 background_color = {0.2, 0.2, 0.2};

    void validate() const {
        if (parts.size() < 2) throw ParameterError("scene spec: need at least 2 parts");
        for (const auto& p : parts)
            if (p.count <= 0)
                throw ParameterError("scene spec: part '" + p.name + "' has zero count");
    }

    bool operator==(const SceneSpec&) const = default;
};

struct CorruptionSpec {
    double label_flip_rate = 0.0;
    double boundary_jitter = 0.0;          // pixels
    double view_dropout_rate = 0.0;        // per (view, part)
    std::vector<std::pair<size_t, size_t>> merge_pairs;  // palette indices (dst, src)
    unsigned seed = 0;

    void validate() const {
        if (label_flip_rate < 0 || label_flip_rate > 1 || view_dropout_rate < 0 ||
            view_dropout_rate > 1)
            throw ParameterError("corruption spec: rates must lie in [0, 1]");
        if (boundary_jitter < 0)
            throw ParameterError("corruption spec: jitter must be non-negative");
    }

    bool operator==(const CorruptionSpec&) const = default;
};

// Palette for a scene spec: background first, then one label per part.
inline LabelPalette make_palette(const SceneSpec& spec) {
    std::vector<LabelPalette::Label> labels;
    labels.push_back({kBackgroundLabelName, spec.background_color});
    for (const auto& p : spec.parts) labels.push_back({p.name, p.color});
    return LabelPalette(std::move(labels));
}

namespace detail {

inline Vec3 sample_unit_sphere(std::mt19937& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vec3 v{gauss(rng), gauss(rng), gauss(rng)};
    double n = norm(v);
    while (n < 1e-9) {
        v = {gauss(rng), gauss(rng), gauss(rng)};
        n = norm(v);
    }
    return v / n;
}

inline Vec3 sample_box_shell(std::mt19937& rng, const Vec3& half) {
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::uniform_int_distribution<int> face(0, 5);
    Vec3 p{uni(rng), uni(rng), uni(rng)};
    switch (face(rng)) {
        case 0: p.x = 1; break;
        case 1: p.x = -1; break;
        case 2: p.y = 1; break;
        case 3: p.y = -1; break;
        case 4: p.z = 1; break;
        default: p.z = -1; break;
    }
    return {p.x * half.x, p.y * half.y, p.z * half.z};
}

// Snap through float32 so PLY round trips reproduce values exactly.
inline double quantize(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace detail

// Gaussians sampled on the part surfaces, isotropic scales proportional to the
// local nearest-neighbor spacing, labels initialized to uniform gray, gt_part
// filled with palette indices (background = 0, so parts start at 1).
inline GaussianScene make_scene(const SceneSpec& spec) {
    spec.validate();
    std::mt19937 rng(spec.seed);

    GaussianScene scene;
    size_t total = 0;
    for (const auto& p : spec.parts) total += static_cast<size_t>(p.count);
    scene.resize(total);
    scene.gt_part.resize(total);

    size_t offset = 0;
    for (size_t part = 0; part < spec.parts.size(); ++part) {
        const PartSpec& ps = spec.parts[part];
        const Vec3 extent = ps.extent * spec.global_scale;
        const Vec3 center = ps.center * spec.global_scale;
        const size_t begin = offset;
        for (int i = 0; i < ps.count; ++i, ++offset) {
            Vec3 p;
            switch (ps.primitive) {
                case Primitive::Sphere: {
                    const Vec3 u = detail::sample_unit_sphere(rng);
                    p = center + u * extent.x;
                    break;
                }
                case Primitive::Ellipsoid: {
                    const Vec3 u = detail::sample_unit_sphere(rng);
                    p = center + Vec3{u.x * extent.x, u.y * extent.y, u.z * extent.z};
                    break;
                }
                case Primitive::BoxShell:
                    p = center + detail::sample_box_shell(rng, extent);
                    break;
            }
            scene.positions[offset] = {detail::quantize(p.x), detail::quantize(p.y),
                                       detail::quantize(p.z)};
            scene.rotations[offset] = Quat{};
            scene.opacity_logits[offset] = detail::quantize(logit(spec.opacity));
            scene.gt_part[offset] = static_cast<int>(part) + 1;  // 0 is background

            auto color = scene.color_block(offset);
            const int nc = sh_coeff_count(scene.color_sh_degree);
            color[0] = detail::quantize(sh_dc_from_value(ps.color.x));
            color[static_cast<size_t>(nc)] = detail::quantize(sh_dc_from_value(ps.color.y));
            color[static_cast<size_t>(2 * nc)] = detail::quantize(sh_dc_from_value(ps.color.z));
            // label SH starts at uniform gray: all zeros evaluate to 0.5.
        }
        // Scale from the local spacing within this part.
        const size_t end = offset;
        for (size_t i = begin; i < end; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (size_t j = begin; j < end; ++j) {
                if (j == i) continue;
                best = std::min(best, distance(scene.positions[i], scene.positions[j]));
            }
            if (!std::isfinite(best)) best = extent.x;
            const double s = detail::quantize(std::log(std::max(best * 0.8, 1e-6)));
            scene.log_scales[i] = {s, s, s};
        }
    }
    return scene;
}

// Mean nearest-neighbor distance over the whole scene.
inline double mean_nn_spacing(const GaussianScene& scene) {
    const size_t n = scene.size();
    if (n < 2) return 0;
    double total = 0;
    for (size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            best = std::min(best, distance(scene.positions[i], scene.positions[j]));
        }
        total += best;
    }
    return total / static_cast<double>(n);
}

// Ring of `ring_count` cameras at a fixed elevation plus `top_count` cameras
// at a steep elevation, all looking at the origin.
inline std::vector<Camera> orbit_rig(double scene_radius, int ring_count = 16,
                                     int top_count = 4, int width = 128, int height = 128) {
    std::vector<Camera> cams;
    const double dist = 4.0 * scene_radius;
    const double focal = 0.35 * width * dist / scene_radius;
    const double near = 0.05 * dist;
    const double far = dist + 6.0 * scene_radius;
    auto add = [&](double azimuth, double elevation) {
        const Vec3 eye{dist * std::cos(elevation) * std::cos(azimuth),
                       dist * std::sin(elevation),
                       dist * std::cos(elevation) * std::sin(azimuth)};
        cams.push_back(
            look_at_camera(eye, Vec3{}, Vec3{0, 1, 0}, width, height, focal, near, far));
    };
    for (int i = 0; i < ring_count; ++i)
        add(2.0 * M_PI * i / ring_count, 20.0 * M_PI / 180.0);
    for (int i = 0; i < top_count; ++i)
        add(2.0 * M_PI * (i + 0.5) / top_count, 65.0 * M_PI / 180.0);
    return cams;
}

// Ground-truth segmentation views: label SH temporarily forced to each
// Gaussian's gt palette color, rendered over the background color, pixels
// snapped to the palette so every output pixel is a palette color.
inline std::vector<SegMap2D> gt_views(const GaussianScene& scene,
                                      std::span<const Camera> cameras,
                                      const LabelPalette& palette) {
    if (scene.gt_part.size() != scene.size())
        throw ParameterError("gt_views: scene has no gt_part labels");
    GaussianScene tmp = scene;
    const int nc = sh_coeff_count(tmp.label_sh_degree);
    for (size_t i = 0; i < tmp.size(); ++i) {
        auto block = tmp.label_block(i);
        std::fill(block.begin(), block.end(), 0.0);
        const Vec3 color = palette[static_cast<size_t>(tmp.gt_part[i])].color;
        block[0] = sh_dc_from_value(color.x);
        block[static_cast<size_t>(nc)] = sh_dc_from_value(color.y);
        block[static_cast<size_t>(2 * nc)] = sh_dc_from_value(color.z);
    }
    const Vec3 bg = palette[palette.background()].color;
    std::vector<SegMap2D> maps;
    maps.reserve(cameras.size());
    for (const Camera& cam : cameras) {
        const RenderOutput out = render(tmp, cam, Channel::Label, bg);
        Image img = out.image;
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                img.set_rgb(y, x, palette[palette.nearest(img.rgb(y, x))].color);
        maps.emplace_back(std::move(img));
    }
    return maps;
}

namespace detail {

inline bool color_matches(const Vec3& a, const Vec3& b) {
    return std::abs(a.x - b.x) < 1e-9 && std::abs(a.y - b.y) < 1e-9 &&
           std::abs(a.z - b.z) < 1e-9;
}

// Dilate the pixel set of one palette color by a disc of the given radius.
inline void dilate_color(Image& img, const Vec3& color, double radius) {
    if (radius < 1.0) return;
    const int r = static_cast<int>(radius);
    std::vector<char> member(img.pixel_count(), 0);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            member[static_cast<size_t>(y) * img.width + x] =
                color_matches(img.rgb(y, x), color);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            if (member[static_cast<size_t>(y) * img.width + x]) continue;
            bool near = false;
            for (int dy = -r; dy <= r && !near; ++dy) {
                for (int dx = -r; dx <= r && !near; ++dx) {
                    if (dx * dx + dy * dy > r * r) continue;
                    const int yy = y + dy, xx = x + dx;
                    if (yy < 0 || yy >= img.height || xx < 0 || xx >= img.width) continue;
                    near = member[static_cast<size_t>(yy) * img.width + xx];
                }
            }
            if (near) img.set_rgb(y, x, color);
        }
    }
}

}  // namespace detail

// Controlled corruption of palette-colored maps, deterministic per seed: label
// flips, per-part boundary dilation, per-(view, part) dropout repainted to
// background with confidence 0, and part merges.
inline std::vector<SegMap2D> corrupt_maps(std::span<const SegMap2D> maps,
                                          const CorruptionSpec& spec,
                                          const LabelPalette& palette) {
    spec.validate();
    for (const auto& [dst, src] : spec.merge_pairs)
        if (dst >= palette.size() || src >= palette.size())
            throw ParameterError("corrupt_maps: merge pair out of palette range");

    std::vector<SegMap2D> out(maps.begin(), maps.end());
    for (size_t view = 0; view < out.size(); ++view) {
        std::seed_seq seq{spec.seed, static_cast<unsigned>(view)};
        std::mt19937 rng(seq);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        std::uniform_int_distribution<size_t> pick(0, palette.size() - 1);
        Image& img = out[view].image;
        Image& conf = out[view].confidence;

        if (spec.label_flip_rate > 0) {
            for (int y = 0; y < img.height; ++y)
                for (int x = 0; x < img.width; ++x) {
                    if (uni(rng) >= spec.label_flip_rate) continue;
                    const size_t current = palette.nearest(img.rgb(y, x));
                    size_t next = pick(rng);
                    while (next == current) next = pick(rng);
                    img.set_rgb(y, x, palette[next].color);
                }
        }

        if (spec.boundary_jitter > 0) {
            std::uniform_real_distribution<double> jitter(0.0, spec.boundary_jitter);
            for (size_t j = 0; j < palette.size(); ++j) {
                if (j == palette.background()) continue;
                detail::dilate_color(img, palette[j].color, jitter(rng));
            }
        }

        if (spec.view_dropout_rate > 0) {
            const Vec3 bg = palette[palette.background()].color;
            for (size_t j = 0; j < palette.size(); ++j) {
                if (j == palette.background()) continue;
                if (uni(rng) >= spec.view_dropout_rate) continue;
                for (int y = 0; y < img.height; ++y)
                    for (int x = 0; x < img.width; ++x) {
                        if (!detail::color_matches(img.rgb(y, x), palette[j].color)) continue;
                        img.set_rgb(y, x, bg);
                        conf.at(y, x, 0) = 0.0;
                    }
            }
        }

        for (const auto& [dst, src] : spec.merge_pairs) {
            for (int y = 0; y < img.height; ++y)
                for (int x = 0; x < img.width; ++x)
                    if (detail::color_matches(img.rgb(y, x), palette[src].color))
                        img.set_rgb(y, x, palette[dst].color);
        }
    }
    return out;
}

}  // namespace partsplat
