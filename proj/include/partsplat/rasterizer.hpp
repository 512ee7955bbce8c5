#pragma once

// Tile-based CPU splatter for the color and label channels, plus the exact
// reverse-mode gradient of the compositing + SH chain with respect to SH
// coefficients and opacity logits. Geometry (position/scale/rotation) is not
// differentiable anywhere in this library.
//
// Compositing is front-to-back over a single global depth sort with the usual
// splatting constants: 2D covariance regularized by 0.3*I, 3-sigma truncation,
// contributions below 1/255 skipped, transmittance early-out at 1e-4. The
// backward pass replays the identical per-pixel chains from the cached tile
// lists, so forward and backward always agree on which Gaussians contribute.

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "partsplat/camera.hpp"
#include "partsplat/errors.hpp"
#include "partsplat/image.hpp"
#include "partsplat/parallel.hpp"
#include "partsplat/scene.hpp"

namespace partsplat {

inline constexpr int kTileSize = 16;
inline constexpr double kCovRegularization = 0.3;   // pixels^2, added to the 2D covariance
inline constexpr double kSigmaCutoff = 3.0;         // truncation radius in screen sigmas
inline constexpr double kMinContribution = 1.0 / 255.0;
inline constexpr double kTransmittanceFloor = 1e-4;

enum class Channel { Color, Label };

struct ScreenSplat {
    Vec2 mean;                       // pixels
    std::array<double, 3> cov;       // (a, b, c) of [[a, b], [b, c]]
    std::array<double, 3> inv_cov;
    double depth = 0;                // camera-space z
    double radius = 0;               // kSigmaCutoff * sqrt(max eigenvalue)
    bool culled = true;
};

// Perspective projection of every Gaussian via the local-affine (Jacobian)
// approximation. Gaussians outside [near, far] or whose 3-sigma box misses the
// image are flagged culled.
inline std::vector<ScreenSplat> project(const GaussianScene& scene, const Camera& camera) {
    camera.validate();
    const size_t n = scene.size();
    std::vector<ScreenSplat> splats(n);
    const Mat3 w2c = camera.rotation;

    parallel_for(static_cast<int>(n), [&](int idx) {
        const size_t i = static_cast<size_t>(idx);
        ScreenSplat& s = splats[i];
        const Vec3 pc = camera.to_camera(scene.positions[i]);
        if (!(pc.z > camera.near) || !(pc.z < camera.far)) return;

        s.mean = {camera.fx * pc.x / pc.z + camera.cx, camera.fy * pc.y / pc.z + camera.cy};
        s.depth = pc.z;

        // Sigma_world = (R S)(R S)^T with S = diag(exp(log_scale)).
        const Mat3 rot = scene.rotations[i].to_rotation();
        Mat3 rs = rot;
        const Vec3 ls = scene.log_scales[i];
        const Vec3 scale{std::exp(ls.x), std::exp(ls.y), std::exp(ls.z)};
        for (int r = 0; r < 3; ++r) {
            rs(r, 0) *= scale.x;
            rs(r, 1) *= scale.y;
            rs(r, 2) *= scale.z;
        }
        const Mat3 cov_world = rs * rs.transposed();
        const Mat3 cov_cam = w2c * cov_world * w2c.transposed();

        const double iz = 1.0 / pc.z, iz2 = iz * iz;
        // J rows: d(u,v)/d(camera xyz)
        const double j00 = camera.fx * iz, j02 = -camera.fx * pc.x * iz2;
        const double j11 = camera.fy * iz, j12 = -camera.fy * pc.y * iz2;

        auto qform = [&](double r0x, double r0z, double r1y, double r1z, int which) {
            // (J cov_cam J^T) entries from the sparse Jacobian structure.
            const Vec3 row0{r0x, 0.0, r0z};
            const Vec3 row1{0.0, r1y, r1z};
            const Vec3 c0 = cov_cam * row0;
            const Vec3 c1 = cov_cam * row1;
            if (which == 0) return dot(row0, c0);
            if (which == 1) return dot(row0, c1);
            return dot(row1, c1);
        };
        double a = qform(j00, j02, j11, j12, 0) + kCovRegularization;
        double b = qform(j00, j02, j11, j12, 1);
        double c = qform(j00, j02, j11, j12, 2) + kCovRegularization;

        const double det = a * c - b * b;
        if (!(det > 0) || !std::isfinite(det)) return;
        s.cov = {a, b, c};
        s.inv_cov = {c / det, -b / det, a / det};

        const double mid = 0.5 * (a + c);
        const double lambda_max = mid + std::sqrt(std::max(mid * mid - det, 0.0));
        s.radius = kSigmaCutoff * std::sqrt(lambda_max);

        if (s.mean.x + s.radius < 0 || s.mean.x - s.radius > camera.width ||
            s.mean.y + s.radius < 0 || s.mean.y - s.radius > camera.height)
            return;
        s.culled = false;
    });
    return splats;
}

struct RenderOutput {
    Image image;   // H x W x 3
    Image alpha;   // H x W x 1, accumulated opacity
    // Cached forward state reused by render_backward.
    Channel channel = Channel::Color;
    Vec3 background;
    size_t scene_size = 0;
    std::vector<ScreenSplat> splats;
    std::vector<std::array<double, 3>> rgb;      // per-gaussian, clamped
    std::vector<std::array<double, 3>> rgb_raw;  // per-gaussian, pre-clamp
    std::vector<double> alphas;                  // sigmoid(opacity logit)
    std::vector<Vec3> view_dirs;
    std::vector<std::vector<int>> tile_splats;   // depth-ordered indices per tile
    int tiles_x = 0, tiles_y = 0;
};

namespace detail {

// Depth-ordered (depth, original index) sort of the visible splats, then a
// per-tile index list that preserves that global order.
inline void build_tile_lists(RenderOutput& out, int width, int height) {
    const auto& splats = out.splats;
    std::vector<int> order;
    order.reserve(splats.size());
    for (size_t i = 0; i < splats.size(); ++i)
        if (!splats[i].culled) order.push_back(static_cast<int>(i));
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double da = splats[static_cast<size_t>(a)].depth;
        const double db = splats[static_cast<size_t>(b)].depth;
        return da != db ? da < db : a < b;
    });

    out.tiles_x = (width + kTileSize - 1) / kTileSize;
    out.tiles_y = (height + kTileSize - 1) / kTileSize;
    out.tile_splats.assign(static_cast<size_t>(out.tiles_x) * out.tiles_y, {});
    for (int idx : order) {
        const ScreenSplat& s = splats[static_cast<size_t>(idx)];
        const int tx0 = std::clamp(static_cast<int>((s.mean.x - s.radius) / kTileSize), 0,
                                   out.tiles_x - 1);
        const int tx1 = std::clamp(static_cast<int>((s.mean.x + s.radius) / kTileSize), 0,
                                   out.tiles_x - 1);
        const int ty0 = std::clamp(static_cast<int>((s.mean.y - s.radius) / kTileSize), 0,
                                   out.tiles_y - 1);
        const int ty1 = std::clamp(static_cast<int>((s.mean.y + s.radius) / kTileSize), 0,
                                   out.tiles_y - 1);
        for (int ty = ty0; ty <= ty1; ++ty)
            for (int tx = tx0; tx <= tx1; ++tx)
                out.tile_splats[static_cast<size_t>(ty) * out.tiles_x + tx].push_back(idx);
    }
}

// Contribution weight of splat s at pixel center (px, py); 0 when skipped.
inline double splat_weight(const ScreenSplat& s, double alpha, double px, double py) {
    const double dx = px - s.mean.x;
    const double dy = py - s.mean.y;
    const double q = s.inv_cov[0] * dx * dx + 2.0 * s.inv_cov[1] * dx * dy +
                     s.inv_cov[2] * dy * dy;
    if (q > kSigmaCutoff * kSigmaCutoff) return 0.0;
    const double w = alpha * std::exp(-0.5 * q);
    return w < kMinContribution ? 0.0 : w;
}

}  // namespace detail

// Forward render of one channel over `background`. When `subset` is given,
// Gaussians with subset[i] == 0 are treated as culled (used for mask renders).
inline RenderOutput render(const GaussianScene& scene, const Camera& camera, Channel channel,
                           const Vec3& background,
                           const std::vector<char>* subset = nullptr) {
    if (camera.width <= 0 || camera.height <= 0)
        throw StructuralError("render: zero-size image");
    if (subset && subset->size() != scene.size())
        throw StructuralError("render: subset size does not match scene");

    RenderOutput out;
    out.channel = channel;
    out.background = background;
    out.scene_size = scene.size();
    out.image = Image(camera.height, camera.width, 3);
    out.alpha = Image(camera.height, camera.width, 1);
    out.splats = project(scene, camera);
    if (subset)
        for (size_t i = 0; i < scene.size(); ++i)
            if (!(*subset)[i]) out.splats[i].culled = true;

    const size_t n = scene.size();
    out.rgb.resize(n);
    out.rgb_raw.resize(n);
    out.alphas.resize(n);
    out.view_dirs.resize(n);
    parallel_for(static_cast<int>(n), [&](int idx) {
        const size_t i = static_cast<size_t>(idx);
        out.alphas[i] = scene.opacity(i);
        if (out.splats[i].culled) return;
        out.view_dirs[i] = view_direction(camera, scene.positions[i]);
        const auto block =
            channel == Channel::Color ? scene.color_block(i) : scene.label_block(i);
        out.rgb_raw[i] = sh_eval_raw(block, out.view_dirs[i]);
        out.rgb[i] = out.rgb_raw[i];
        for (double& v : out.rgb[i]) v = std::clamp(v, 0.0, 1.0);
    });

    detail::build_tile_lists(out, camera.width, camera.height);

    const int n_tiles = out.tiles_x * out.tiles_y;
    parallel_for(n_tiles, [&](int tile) {
        const auto& list = out.tile_splats[static_cast<size_t>(tile)];
        const int tx = tile % out.tiles_x, ty = tile / out.tiles_x;
        const int x0 = tx * kTileSize, x1 = std::min(camera.width, x0 + kTileSize);
        const int y0 = ty * kTileSize, y1 = std::min(camera.height, y0 + kTileSize);
        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                const double px = x + 0.5, py = y + 0.5;
                double transmittance = 1.0;
                double acc[3] = {0, 0, 0};
                for (int idx : list) {
                    const size_t i = static_cast<size_t>(idx);
                    const double w =
                        detail::splat_weight(out.splats[i], out.alphas[i], px, py);
                    if (w <= 0.0) continue;
                    for (int c = 0; c < 3; ++c)
                        acc[c] += transmittance * w * out.rgb[i][static_cast<size_t>(c)];
                    transmittance *= 1.0 - w;
                    if (transmittance < kTransmittanceFloor) break;
                }
                out.image.at(y, x, 0) = acc[0] + transmittance * background.x;
                out.image.at(y, x, 1) = acc[1] + transmittance * background.y;
                out.image.at(y, x, 2) = acc[2] + transmittance * background.z;
                out.alpha.at(y, x, 0) = 1.0 - transmittance;
            }
        }
    });
    return out;
}

struct GradBuffer {
    std::vector<double> d_color_sh;  // layout of scene.color_sh
    std::vector<double> d_label_sh;
    std::vector<double> d_opacity;   // d/d logit

    static GradBuffer zeros(const GaussianScene& scene) {
        GradBuffer g;
        g.d_color_sh.assign(scene.color_sh.size(), 0.0);
        g.d_label_sh.assign(scene.label_sh.size(), 0.0);
        g.d_opacity.assign(scene.size(), 0.0);
        return g;
    }

    void add_scaled(const GradBuffer& o, double s) {
        for (size_t i = 0; i < d_color_sh.size(); ++i) d_color_sh[i] += s * o.d_color_sh[i];
        for (size_t i = 0; i < d_label_sh.size(); ++i) d_label_sh[i] += s * o.d_label_sh[i];
        for (size_t i = 0; i < d_opacity.size(); ++i) d_opacity[i] += s * o.d_opacity[i];
    }
};

// Reverse-mode gradient of render() under an image-space upstream gradient.
// The clamp after sh_eval passes gradients through inside (0,1) and blocks
// them at the rails.
inline GradBuffer render_backward(const GaussianScene& scene, const Camera& camera,
                                  const RenderOutput& fwd, const Image& loss_grad) {
    (void)camera;  // the forward cache carries everything view-dependent
    if (fwd.scene_size != scene.size() || fwd.splats.size() != scene.size())
        throw StructuralError("render_backward: forward cache does not match scene");
    if (loss_grad.height != fwd.image.height || loss_grad.width != fwd.image.width ||
        loss_grad.channels != 3)
        throw StructuralError("render_backward: loss gradient shape mismatch");

    const size_t n = scene.size();
    GradBuffer grad = GradBuffer::zeros(scene);
    std::vector<std::array<double, 3>> d_rgb(n, {0, 0, 0});

    const int n_tiles = fwd.tiles_x * fwd.tiles_y;
    std::vector<std::vector<std::array<double, 4>>> tile_acc(static_cast<size_t>(n_tiles));

    parallel_for(n_tiles, [&](int tile) {
        const auto& list = fwd.tile_splats[static_cast<size_t>(tile)];
        if (list.empty()) return;
        auto& local = tile_acc[static_cast<size_t>(tile)];
        local.assign(list.size(), {0, 0, 0, 0});  // d_rgb(3), d_alpha

        const int tx = tile % fwd.tiles_x, ty = tile / fwd.tiles_x;
        const int x0 = tx * kTileSize, x1 = std::min(fwd.image.width, x0 + kTileSize);
        const int y0 = ty * kTileSize, y1 = std::min(fwd.image.height, y0 + kTileSize);

        struct Contribution {
            int slot;      // position in the tile list
            double w;
            double t_at;   // transmittance in front of this contribution
        };
        std::vector<Contribution> chain;
        chain.reserve(64);

        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                const double g[3] = {loss_grad.at(y, x, 0), loss_grad.at(y, x, 1),
                                     loss_grad.at(y, x, 2)};
                if (g[0] == 0 && g[1] == 0 && g[2] == 0) continue;

                // Replay the forward chain for this pixel.
                const double px = x + 0.5, py = y + 0.5;
                chain.clear();
                double transmittance = 1.0;
                for (size_t slot = 0; slot < list.size(); ++slot) {
                    const size_t i = static_cast<size_t>(list[slot]);
                    const double w =
                        detail::splat_weight(fwd.splats[i], fwd.alphas[i], px, py);
                    if (w <= 0.0) continue;
                    chain.push_back({static_cast<int>(slot), w, transmittance});
                    transmittance *= 1.0 - w;
                    if (transmittance < kTransmittanceFloor) break;
                }

                // Reverse sweep. suffix[c] = sum of everything composited
                // behind the current contribution, background included.
                double suffix[3] = {transmittance * fwd.background.x,
                                    transmittance * fwd.background.y,
                                    transmittance * fwd.background.z};
                for (size_t k = chain.size(); k-- > 0;) {
                    const Contribution& ct = chain[k];
                    const size_t i = static_cast<size_t>(list[static_cast<size_t>(ct.slot)]);
                    auto& acc = local[static_cast<size_t>(ct.slot)];
                    double d_w = 0;
                    for (int c = 0; c < 3; ++c) {
                        const double rgb_c = fwd.rgb[i][static_cast<size_t>(c)];
                        d_w += g[c] * (ct.t_at * rgb_c - suffix[c] / (1.0 - ct.w));
                        acc[static_cast<size_t>(c)] += g[c] * ct.t_at * ct.w;
                        suffix[c] += ct.t_at * ct.w * rgb_c;
                    }
                    // Stored as dL/dw * w; the per-pixel Gaussian falloff G =
                    // w/alpha folds into the logit chain rule below.
                    acc[3] += d_w * ct.w;
                }
            }
        }
    });

    // Merge per-tile buffers in tile order so the reduction is deterministic
    // for any thread count.
    std::vector<double> d_weight(n, 0.0);
    for (int tile = 0; tile < n_tiles; ++tile) {
        const auto& list = fwd.tile_splats[static_cast<size_t>(tile)];
        const auto& local = tile_acc[static_cast<size_t>(tile)];
        for (size_t slot = 0; slot < local.size(); ++slot) {
            const size_t i = static_cast<size_t>(list[slot]);
            for (int c = 0; c < 3; ++c)
                d_rgb[i][static_cast<size_t>(c)] += local[slot][static_cast<size_t>(c)];
            d_weight[i] += local[slot][3];
        }
    }

    // Chain through sh_eval (w = alpha * G, rgb = clamp(sh_eval_raw)).
    const int degree = fwd.channel == Channel::Color ? scene.color_sh_degree
                                                     : scene.label_sh_degree;
    const int n_coeff = sh_coeff_count(degree);
    std::vector<double>& d_sh =
        fwd.channel == Channel::Color ? grad.d_color_sh : grad.d_label_sh;
    parallel_for(static_cast<int>(n), [&](int idx) {
        const size_t i = static_cast<size_t>(idx);
        if (fwd.splats[i].culled) return;
        const double alpha = fwd.alphas[i];
        // d w / d logit = G * alpha * (1 - alpha) = w * (1 - alpha), and
        // d_weight holds sum over pixels of dL/dw * w.
        grad.d_opacity[i] = d_weight[i] * (1.0 - alpha);
        double basis[16];
        sh_basis(fwd.view_dirs[i], degree, basis);
        double* dst = d_sh.data() + i * static_cast<size_t>(3 * n_coeff);
        for (int c = 0; c < 3; ++c) {
            const double raw = fwd.rgb_raw[i][static_cast<size_t>(c)];
            if (!(raw > 0.0 && raw < 1.0)) continue;
            const double gc = d_rgb[i][static_cast<size_t>(c)];
            if (gc == 0.0) continue;
            for (int j = 0; j < n_coeff; ++j)
                dst[c * n_coeff + j] += gc * basis[j];
        }
    });
    return grad;
}

struct MaskedL1 {
    double loss = 0;
    Image grad;  // dL/dpred
};

// Confidence-weighted mean absolute error. The loss is averaged over channels
// and normalized by the mask mass (an all-zero mask gives loss 0).
inline MaskedL1 masked_l1_image(const Image& pred, const Image& target, const Image& mask) {
    require_same_shape(pred, target, "masked_l1_image");
    if (mask.height != pred.height || mask.width != pred.width || mask.channels != 1)
        throw StructuralError("masked_l1_image: mask must be H x W x 1");

    double mask_sum = 0;
    for (double m : mask.data) mask_sum += m;
    const double norm = std::max(mask_sum, 1.0);
    const int channels = pred.channels;

    MaskedL1 out;
    out.grad = Image(pred.height, pred.width, channels);
    double loss = 0;
    for (int y = 0; y < pred.height; ++y) {
        for (int x = 0; x < pred.width; ++x) {
            const double m = mask.at(y, x, 0);
            if (m == 0.0) continue;
            for (int c = 0; c < channels; ++c) {
                const double d = pred.at(y, x, c) - target.at(y, x, c);
                loss += m * std::abs(d) / channels;
                out.grad.at(y, x, c) =
                    m * (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0)) / (channels * norm);
            }
        }
    }
    out.loss = loss / norm;
    return out;
}

}  // namespace partsplat
