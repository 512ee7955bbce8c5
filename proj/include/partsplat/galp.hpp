#pragma once

// Geometry-aware label prediction over the label SH field: pseudo-map
// normalization, per-Gaussian label softness (entropy x cross-view variance),
// softness-extreme anchor sampling, the anchor/neighbor L1 consistency loss,
// the label optimization loop, and 3D/2D mask extraction.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "partsplat/camera.hpp"
#include "partsplat/errors.hpp"
#include "partsplat/image.hpp"
#include "partsplat/optimizer.hpp"
#include "partsplat/palette.hpp"
#include "partsplat/parallel.hpp"
#include "partsplat/rasterizer.hpp"
#include "partsplat/scene.hpp"

namespace partsplat {

inline constexpr double kEntropyEpsilon = 1e-10;
inline constexpr int kVarianceDirections = 64;

struct SegMap2D {
    Image image;       // H x W x 3, label colors
    Image confidence;  // H x W x 1 in [0,1]

    SegMap2D() = default;
    explicit SegMap2D(Image img)
        : image(std::move(img)), confidence(image.height, image.width, 1, 1.0) {}
    SegMap2D(Image img, Image conf) : image(std::move(img)), confidence(std::move(conf)) {
        if (confidence.height != image.height || confidence.width != image.width ||
            confidence.channels != 1)
            throw StructuralError("SegMap2D: confidence must be H x W x 1");
    }
};

struct SoftnessReport {
    std::vector<double> variance;             // v_i
    std::vector<Vec3> mean_label;             // r_bar_i
    std::vector<std::vector<double>> probs;   // p_ij over the palette
    std::vector<double> entropy;              // H_i
    std::vector<double> softness;             // S_i = H_i * v_i
};

struct Mask3D {
    std::vector<int> assignment;   // palette index per gaussian
    std::vector<char> selected;    // one target part, opacity-gated
};

// Evenly distributed unit directions (spherical Fibonacci lattice); the fixed
// quadrature that stands in for "all directions" so variance is deterministic.
inline std::vector<Vec3> fibonacci_sphere(int count) {
    std::vector<Vec3> dirs(static_cast<size_t>(count));
    const double golden_angle = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
        const double y = 1.0 - 2.0 * (i + 0.5) / count;
        const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
        const double phi = golden_angle * i;
        dirs[static_cast<size_t>(i)] = {r * std::cos(phi), y, r * std::sin(phi)};
    }
    return dirs;
}

// Softmax over the label axis at the given temperature, then a
// probability-weighted blend of palette colors per pixel.
inline SegMap2D normalize_pseudo_map(const Image& scores, const LabelPalette& palette,
                                     double temperature = 0.2) {
    if (temperature <= 0) throw ParameterError("normalize_pseudo_map: temperature must be > 0");
    if (scores.channels != static_cast<int>(palette.size()))
        throw StructuralError("normalize_pseudo_map: score channels must match palette size");

    SegMap2D out(Image(scores.height, scores.width, 3));
    const int labels = scores.channels;
    std::vector<double> p(static_cast<size_t>(labels));
    for (int y = 0; y < scores.height; ++y) {
        for (int x = 0; x < scores.width; ++x) {
            double max_s = -std::numeric_limits<double>::infinity();
            for (int l = 0; l < labels; ++l)
                max_s = std::max(max_s, scores.at(y, x, l) / temperature);
            double sum = 0;
            for (int l = 0; l < labels; ++l) {
                p[static_cast<size_t>(l)] = std::exp(scores.at(y, x, l) / temperature - max_s);
                sum += p[static_cast<size_t>(l)];
            }
            Vec3 color{};
            for (int l = 0; l < labels; ++l)
                color += palette[static_cast<size_t>(l)].color *
                         (p[static_cast<size_t>(l)] / sum);
            out.image.set_rgb(y, x, color);
        }
    }
    return out;
}

struct LabelVariance {
    std::vector<double> variance;
    std::vector<Vec3> mean_label;
};

// Per-Gaussian cross-direction variance of the label SH evaluation (pre-clamp)
// and the mean label color, channel-averaged.
inline LabelVariance label_variance(const GaussianScene& scene, std::span<const Vec3> directions) {
    if (directions.size() < 2)
        throw ParameterError("label_variance: need at least 2 directions");
    const size_t n = scene.size();
    LabelVariance out;
    out.variance.resize(n);
    out.mean_label.resize(n);

    parallel_for(static_cast<int>(n), [&](int idx) {
        const size_t i = static_cast<size_t>(idx);
        const auto block = scene.label_block(i);
        Vec3 mean{};
        std::vector<std::array<double, 3>> vals(directions.size());
        for (size_t d = 0; d < directions.size(); ++d) {
            vals[d] = sh_eval_raw(block, directions[d]);
            mean += Vec3{vals[d][0], vals[d][1], vals[d][2]};
        }
        mean = mean / static_cast<double>(directions.size());
        double var = 0;
        for (const auto& v : vals) {
            const Vec3 diff = Vec3{v[0], v[1], v[2]} - mean;
            var += dot(diff, diff);
        }
        out.variance[i] = var / (3.0 * static_cast<double>(directions.size()));
        out.mean_label[i] = mean;
    });
    return out;
}

// p_ij = softmax_j cos(r_bar_i, l_j); H_i = -sum p log(p + eps); S_i = H_i * v_i.
// A zero-norm mean label gets uniform probabilities (maximally soft).
inline SoftnessReport softness(std::span<const double> variance,
                               std::span<const Vec3> mean_label, const LabelPalette& palette) {
    if (variance.size() != mean_label.size())
        throw StructuralError("softness: variance/mean length mismatch");
    const size_t n = variance.size();
    const size_t labels = palette.size();

    std::vector<Vec3> unit_colors(labels);
    std::vector<double> color_norms(labels);
    for (size_t j = 0; j < labels; ++j) {
        color_norms[j] = norm(palette[j].color);
        unit_colors[j] = color_norms[j] > 0 ? palette[j].color / color_norms[j] : Vec3{};
    }

    SoftnessReport report;
    report.variance.assign(variance.begin(), variance.end());
    report.mean_label.assign(mean_label.begin(), mean_label.end());
    report.probs.resize(n);
    report.entropy.resize(n);
    report.softness.resize(n);

    parallel_for(static_cast<int>(n), [&](int idx) {
        const size_t i = static_cast<size_t>(idx);
        auto& p = report.probs[i];
        p.resize(labels);
        const double rn = norm(mean_label[i]);
        if (rn < 1e-12) {
            std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(labels));
        } else {
            double sum = 0;
            for (size_t j = 0; j < labels; ++j) {
                const double cos_sim =
                    color_norms[j] > 0 ? dot(mean_label[i], unit_colors[j]) / rn : 0.0;
                p[j] = std::exp(cos_sim);
                sum += p[j];
            }
            for (double& v : p) v /= sum;
        }
        double h = 0;
        for (double v : p) h -= v * std::log(v + kEntropyEpsilon);
        report.entropy[i] = h;
        report.softness[i] = h * variance[i];
    });
    return report;
}

inline SoftnessReport softness(const GaussianScene& scene, const LabelPalette& palette,
                               int direction_count = kVarianceDirections) {
    const auto dirs = fibonacci_sphere(direction_count);
    const auto lv = label_variance(scene, dirs);
    return softness(lv.variance, lv.mean_label, palette);
}

// Top floor(K/2) by softness descending plus bottom floor(K/2) ascending,
// ties to the lower index, halves kept disjoint. Returned sorted ascending.
inline std::vector<int> sample_anchors(std::span<const double> softness_values, int k) {
    const int n = static_cast<int>(softness_values.size());
    if (k > n) throw ParameterError("sample_anchors: K exceeds the number of gaussians");
    const int half = k / 2;

    std::vector<int> by_value(static_cast<size_t>(n));
    std::iota(by_value.begin(), by_value.end(), 0);
    std::sort(by_value.begin(), by_value.end(), [&](int a, int b) {
        const double sa = softness_values[static_cast<size_t>(a)];
        const double sb = softness_values[static_cast<size_t>(b)];
        return sa != sb ? sa > sb : a < b;  // descending, ties to lower index
    });

    std::vector<char> taken(static_cast<size_t>(n), 0);
    std::vector<int> anchors;
    anchors.reserve(static_cast<size_t>(2 * half));
    for (int i = 0; i < half; ++i) {
        anchors.push_back(by_value[static_cast<size_t>(i)]);
        taken[static_cast<size_t>(by_value[static_cast<size_t>(i)])] = 1;
    }
    // Bottom half: ascending by value, ties to lower index, skipping indices
    // the top half already captured.
    std::vector<int> ascending(static_cast<size_t>(n));
    std::iota(ascending.begin(), ascending.end(), 0);
    std::sort(ascending.begin(), ascending.end(), [&](int a, int b) {
        const double sa = softness_values[static_cast<size_t>(a)];
        const double sb = softness_values[static_cast<size_t>(b)];
        return sa != sb ? sa < sb : a < b;
    });
    int added = 0;
    for (int idx : ascending) {
        if (added >= half) break;
        if (taken[static_cast<size_t>(idx)]) continue;
        anchors.push_back(idx);
        taken[static_cast<size_t>(idx)] = 1;
        ++added;
    }
    std::sort(anchors.begin(), anchors.end());
    return anchors;
}

// k nearest by Euclidean distance, query excluded, ties to the lower index.
inline std::vector<int> knn(std::span<const Vec3> positions, int query, int k) {
    const int n = static_cast<int>(positions.size());
    if (k >= n) throw ParameterError("knn: k must be smaller than the point count");
    std::vector<std::pair<double, int>> cand;
    cand.reserve(static_cast<size_t>(n - 1));
    const Vec3 q = positions[static_cast<size_t>(query)];
    for (int i = 0; i < n; ++i) {
        if (i == query) continue;
        const Vec3 d = positions[static_cast<size_t>(i)] - q;
        cand.emplace_back(dot(d, d), i);
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    std::vector<int> out(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) out[static_cast<size_t>(i)] = cand[static_cast<size_t>(i)].second;
    return out;
}

struct GalpLoss {
    double loss = 0;
    std::vector<double> d_label_sh;  // layout of scene.label_sh
};

namespace detail {

// L1 over full label SH vectors between each anchor and its neighbors, with
// the subgradient on both sides (sign(0) = 0).
inline GalpLoss galp_loss_with_neighbors(const GaussianScene& scene,
                                         std::span<const int> anchors,
                                         const std::vector<std::vector<int>>& neighbors) {
    GalpLoss out;
    out.d_label_sh.assign(scene.label_sh.size(), 0.0);
    const size_t block = static_cast<size_t>(scene.label_block_size());
    for (size_t a = 0; a < anchors.size(); ++a) {
        const size_t i = static_cast<size_t>(anchors[a]);
        const auto& nbrs = neighbors[a];
        if (nbrs.empty()) continue;
        const double inv_k = 1.0 / static_cast<double>(nbrs.size());
        const double* ri = scene.label_sh.data() + i * block;
        double* gi = out.d_label_sh.data() + i * block;
        for (int j : nbrs) {
            const double* rj = scene.label_sh.data() + static_cast<size_t>(j) * block;
            double* gj = out.d_label_sh.data() + static_cast<size_t>(j) * block;
            for (size_t c = 0; c < block; ++c) {
                const double diff = ri[c] - rj[c];
                out.loss += inv_k * std::abs(diff);
                const double s = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
                gi[c] += inv_k * s;
                gj[c] -= inv_k * s;
            }
        }
    }
    return out;
}

}  // namespace detail

// Neighbor-consistency loss: sum over anchors of the mean L1 distance between
// the anchor's label SH vector and each of its k nearest neighbors'.
inline GalpLoss galp_loss(const GaussianScene& scene, std::span<const int> anchors, int k) {
    if (anchors.empty()) {
        GalpLoss out;
        out.d_label_sh.assign(scene.label_sh.size(), 0.0);
        return out;
    }
    if (k >= static_cast<int>(scene.size()))
        throw ParameterError("galp_loss: k must be smaller than the scene size");
    std::vector<std::vector<int>> neighbors(anchors.size());
    parallel_for(
        static_cast<int>(anchors.size()),
        [&](int a) {
            neighbors[static_cast<size_t>(a)] =
                knn(scene.positions, anchors[static_cast<size_t>(a)], k);
        },
        2);
    return detail::galp_loss_with_neighbors(scene, anchors, neighbors);
}

enum class AnchorMode { Softness, Random };

struct GalpConfig {
    int steps = 500;
    int anchor_count = 1024;       // K, split between softest and most-consistent
    int neighbor_count = 8;        // k nearest neighbors per anchor
    double w_galp = 0.5;
    double render_weight = 1.0;
    double lr = 0.025;             // label SH DC; higher orders run at lr/20
    double rest_lr_divisor = 20.0;
    int resample_interval = 100;
    unsigned seed = 0;
    int variance_directions = kVarianceDirections;
    AnchorMode anchor_mode = AnchorMode::Softness;

    bool operator==(const GalpConfig&) const = default;
};

struct GalpHistory {
    std::vector<double> render_loss;              // per step
    std::vector<double> consistency_loss;         // per step
    std::vector<SoftnessReport> softness_history; // one per anchor resample
};

struct GalpView {
    Camera camera;
    SegMap2D map;
};

// Label-field optimization: per step, render the label channel from a sampled
// view, pull it toward the pseudo map with a confidence-weighted L1, add the
// anchored neighbor-consistency term, and Adam-update the label SH only.
inline GalpHistory optimize_labels(GaussianScene& scene, std::span<const GalpView> views,
                                   const LabelPalette& palette, const GalpConfig& config) {
    if (views.empty()) throw ParameterError("optimize_labels: need at least one view");
    for (const auto& v : views)
        if (v.map.image.height != v.camera.height || v.map.image.width != v.camera.width ||
            v.map.image.channels != 3)
            throw ParameterError("optimize_labels: map/camera size mismatch");

    const size_t n = scene.size();
    GalpHistory history;
    if (n == 0 || config.steps <= 0) return history;

    FirstOrderOptimizer opt(scene.label_sh.size(), config.lr);
    opt.set_lr_scale(sh_lr_scale(n, scene.label_sh_degree, 1.0 / config.rest_lr_divisor));

    std::mt19937 rng(config.seed);
    std::uniform_int_distribution<size_t> view_dist(0, views.size() - 1);
    const Vec3 bg = palette[palette.background()].color;
    const auto dirs = fibonacci_sphere(config.variance_directions);

    std::vector<int> anchors;
    std::vector<std::vector<int>> neighbors;
    const int k = std::min<int>(config.neighbor_count, static_cast<int>(n) - 1);
    const int anchor_count = std::min<int>(config.anchor_count, static_cast<int>(n));

    std::vector<double> total_grad(scene.label_sh.size());

    for (int step = 0; step < config.steps; ++step) {
        if (config.w_galp > 0 && k > 0 && step % config.resample_interval == 0) {
            const auto lv = label_variance(scene, dirs);
            auto report = softness(lv.variance, lv.mean_label, palette);
            if (config.anchor_mode == AnchorMode::Softness) {
                anchors = sample_anchors(report.softness, anchor_count);
            } else {
                anchors.resize(static_cast<size_t>(anchor_count));
                std::vector<int> all(n);
                std::iota(all.begin(), all.end(), 0);
                std::shuffle(all.begin(), all.end(), rng);
                std::copy(all.begin(), all.begin() + anchor_count, anchors.begin());
                std::sort(anchors.begin(), anchors.end());
            }
            neighbors.assign(anchors.size(), {});
            parallel_for(
                static_cast<int>(anchors.size()),
                [&](int a) {
                    neighbors[static_cast<size_t>(a)] =
                        knn(scene.positions, anchors[static_cast<size_t>(a)], k);
                },
                2);
            history.softness_history.push_back(std::move(report));
        }

        const GalpView& view = views[view_dist(rng)];
        const RenderOutput fwd = render(scene, view.camera, Channel::Label, bg);
        const MaskedL1 l1 = masked_l1_image(fwd.image, view.map.image, view.map.confidence);
        const GradBuffer gbuf = render_backward(scene, view.camera, fwd, l1.grad);

        std::copy(gbuf.d_label_sh.begin(), gbuf.d_label_sh.end(), total_grad.begin());
        if (config.render_weight != 1.0)
            for (double& g : total_grad) g *= config.render_weight;

        double consistency = 0;
        if (config.w_galp > 0 && !anchors.empty()) {
            const GalpLoss gl = detail::galp_loss_with_neighbors(scene, anchors, neighbors);
            consistency = gl.loss;
            for (size_t i = 0; i < total_grad.size(); ++i)
                total_grad[i] += config.w_galp * gl.d_label_sh[i];
        }

        opt.step(scene.label_sh, total_grad);
        history.render_loss.push_back(l1.loss);
        history.consistency_loss.push_back(consistency);
    }
    return history;
}

// Hard per-Gaussian assignment by cosine similarity of the mean label against
// the palette; `selected` additionally gates on opacity.
inline Mask3D extract_mask3d(const GaussianScene& scene, const LabelPalette& palette,
                             size_t target_label, double opacity_threshold = 0.1) {
    if (target_label >= palette.size())
        throw ParameterError("extract_mask3d: target label out of range");
    const size_t n = scene.size();
    Mask3D mask;
    mask.assignment.resize(n);
    mask.selected.assign(n, 0);

    const auto dirs = fibonacci_sphere(kVarianceDirections);
    const auto lv = label_variance(scene, dirs);

    parallel_for(static_cast<int>(n), [&](int idx) {
        const size_t i = static_cast<size_t>(idx);
        const Vec3 r = lv.mean_label[i];
        const double rn = norm(r);
        size_t best = 0;
        double best_sim = -2.0;
        for (size_t j = 0; j < palette.size(); ++j) {
            const double cn = norm(palette[j].color);
            const double sim =
                (rn < 1e-12 || cn < 1e-12) ? 0.0 : dot(r, palette[j].color) / (rn * cn);
            if (sim > best_sim) {  // strict: ties keep the lower index
                best_sim = sim;
                best = j;
            }
        }
        mask.assignment[i] = static_cast<int>(best);
        if (best == target_label && scene.opacity(i) >= opacity_threshold)
            mask.selected[i] = 1;
    });
    return mask;
}

// Binary visibility mask of the selected Gaussians only.
inline Image render_mask2d(const GaussianScene& scene, const Mask3D& mask3d,
                           const Camera& camera, double threshold = 0.5) {
    if (mask3d.selected.size() != scene.size())
        throw StructuralError("render_mask2d: mask size does not match scene");
    const RenderOutput out = render(scene, camera, Channel::Label, Vec3{}, &mask3d.selected);
    Image mask(camera.height, camera.width, 1);
    for (size_t i = 0; i < mask.data.size(); ++i)
        mask.data[i] = out.alpha.data[i] >= threshold ? 1.0 : 0.0;
    return mask;
}

}  // namespace partsplat
