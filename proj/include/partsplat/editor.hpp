#pragma once

// Masked two-term editing loop over a prior-removed scene: a pluggable
// image-space score gradient (masked by the rendered 2D target mask) plus a
// masked L1 pull toward per-view anchor images, backpropagated through the
// rasterizer with the complement of the 3D target mask frozen.
//
// Provider convention: score_grad returns an upstream dL/dimage that the
// optimizer descends. The match-target provider therefore returns
// rendered - target (the gradient of 1/2 * L2 to the target).

#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "partsplat/errors.hpp"
#include "partsplat/galp.hpp"
#include "partsplat/image.hpp"
#include "partsplat/optimizer.hpp"
#include "partsplat/rasterizer.hpp"
#include "partsplat/scene.hpp"

namespace partsplat {

// Image-space score direction contract; deterministic in (rendered, condition,
// step). Zero output is a valid no-op.
class GradientProvider {
  public:
    virtual ~GradientProvider() = default;
    virtual Image score_grad(const Image& rendered, const std::string& condition,
                             int step) const = 0;
};

class ZeroGradient final : public GradientProvider {
  public:
    Image score_grad(const Image& rendered, const std::string&, int) const override {
        return Image(rendered.height, rendered.width, rendered.channels);
    }
};

class MatchTargetGradient final : public GradientProvider {
  public:
    explicit MatchTargetGradient(Image target) : target_(std::move(target)) {}
    Image score_grad(const Image& rendered, const std::string&, int) const override {
        require_same_shape(rendered, target_, "MatchTargetGradient");
        Image g(rendered.height, rendered.width, rendered.channels);
        for (size_t i = 0; i < g.data.size(); ++i)
            g.data[i] = rendered.data[i] - target_.data[i];
        return g;
    }

  private:
    Image target_;
};

// Seeded +-1 directions, refreshed per step; used in robustness tests.
class RandomDirectionGradient final : public GradientProvider {
  public:
    explicit RandomDirectionGradient(unsigned seed, double magnitude = 1.0)
        : seed_(seed), magnitude_(magnitude) {}
    Image score_grad(const Image& rendered, const std::string&, int step) const override {
        Image g(rendered.height, rendered.width, rendered.channels);
        std::mt19937 rng(seed_ + static_cast<unsigned>(step));
        std::bernoulli_distribution coin(0.5);
        for (double& v : g.data) v = coin(rng) ? magnitude_ : -magnitude_;
        return g;
    }

  private:
    unsigned seed_;
    double magnitude_;
};

struct EditConfig {
    double lambda1 = 0.1;          // score term weight
    double lambda2 = 1.0;          // anchor L1 weight
    int steps = 300;
    Vec3 neutral = {0.5, 0.5, 0.5};
    Vec3 background = {1.0, 1.0, 1.0};
    bool update_opacity = false;
    OptimizerMode optimizer = OptimizerMode::Adam;
    double lr = 0.0125;            // color SH DC; higher orders at lr/20
    double rest_lr_divisor = 20.0;
    double opacity_lr = 0.05;
    std::string condition;
    double mask2d_threshold = 0.5;

    void validate() const {
        if (lambda1 < 0 || lambda2 < 0 || lambda1 + lambda2 <= 0)
            throw ParameterError("edit: lambda weights must be non-negative and not both zero");
        if (steps < 0) throw ParameterError("edit: steps must be >= 0");
    }

    bool operator==(const EditConfig&) const = default;
};

// Replace the selected Gaussians' color with a direction-independent neutral:
// DC inverted through the offset convention, higher orders zeroed. Everything
// else, including the unselected Gaussians, is left bit-identical.
inline GaussianScene prior_removal(const GaussianScene& scene, const Mask3D& mask,
                                   const Vec3& neutral) {
    if (mask.selected.size() != scene.size())
        throw StructuralError("prior_removal: mask size does not match scene");
    GaussianScene out = scene;
    const int n_coeff = sh_coeff_count(out.color_sh_degree);
    for (size_t i = 0; i < out.size(); ++i) {
        if (!mask.selected[i]) continue;
        auto block = out.color_block(i);
        std::fill(block.begin(), block.end(), 0.0);
        block[0] = sh_dc_from_value(neutral.x);
        block[static_cast<size_t>(n_coeff)] = sh_dc_from_value(neutral.y);
        block[static_cast<size_t>(2 * n_coeff)] = sh_dc_from_value(neutral.z);
    }
    return out;
}

// Zero every gradient row belonging to a Gaussian outside the target mask.
inline GradBuffer& freeze_complement(GradBuffer& grad, const Mask3D& mask) {
    const size_t n = mask.selected.size();
    if (grad.d_opacity.size() != n)
        throw StructuralError("freeze_complement: mask size does not match gradient");
    const size_t color_block = n == 0 ? 0 : grad.d_color_sh.size() / n;
    const size_t label_block = n == 0 ? 0 : grad.d_label_sh.size() / n;
    for (size_t i = 0; i < n; ++i) {
        if (mask.selected[i]) continue;
        std::fill_n(grad.d_color_sh.begin() + static_cast<long>(i * color_block), color_block,
                    0.0);
        std::fill_n(grad.d_label_sh.begin() + static_cast<long>(i * label_block), label_block,
                    0.0);
        grad.d_opacity[i] = 0.0;
    }
    return grad;
}

struct EditStepLog {
    int step = 0;
    int view = 0;
    double l_sds = 0;     // masked mean |score gradient|
    double l_anchor = 0;  // masked L1 against the anchor image
    double total = 0;
};

// Owns the optimizer state for one editing run; the scene is updated in place.
class EditSession {
  public:
    EditSession(GaussianScene& scene, const Mask3D& mask, const EditConfig& config)
        : scene_(scene), mask_(mask), config_(config),
          color_opt_(scene.color_sh.size(), config.lr, config.optimizer),
          opacity_opt_(scene.size(), config.opacity_lr, config.optimizer) {
        config.validate();
        if (mask.selected.size() != scene.size())
            throw StructuralError("edit: mask size does not match scene");
        color_opt_.set_lr_scale(
            sh_lr_scale(scene.size(), scene.color_sh_degree, 1.0 / config.rest_lr_divisor));
    }

    // One regularized step against a single view. `anchor` is the SLaMP-style
    // anchor image for this view; `mask2d` the rendered binary target mask.
    EditStepLog step(const Camera& camera, const GradientProvider& provider,
                     const Image& anchor, const Image& mask2d, int step_index, int view_index) {
        const RenderOutput fwd = render(scene_, camera, Channel::Color, config_.background);
        if (!anchor.same_shape(fwd.image))
            throw StructuralError("edit: anchor image size does not match render");
        if (mask2d.height != fwd.image.height || mask2d.width != fwd.image.width ||
            mask2d.channels != 1)
            throw StructuralError("edit: mask2d must be H x W x 1");

        EditStepLog log;
        log.step = step_index;
        log.view = view_index;

        Image upstream(fwd.image.height, fwd.image.width, 3);
        double mask_mass = 0;
        for (double m : mask2d.data) mask_mass += m;
        const double mask_norm = std::max(mask_mass, 1.0);

        if (config_.lambda1 > 0) {
            const Image score = provider.score_grad(fwd.image, config_.condition, step_index);
            if (!score.same_shape(fwd.image))
                throw StructuralError("edit: provider output size mismatch");
            double sds_abs = 0;
            for (int y = 0; y < upstream.height; ++y)
                for (int x = 0; x < upstream.width; ++x) {
                    const double m = mask2d.at(y, x, 0);
                    if (m == 0) continue;
                    for (int c = 0; c < 3; ++c) {
                        const double g = m * score.at(y, x, c);
                        upstream.at(y, x, c) += config_.lambda1 * g;
                        sds_abs += std::abs(g);
                    }
                }
            log.l_sds = sds_abs / (3.0 * mask_norm);
        }

        if (config_.lambda2 > 0) {
            const MaskedL1 l1 = masked_l1_image(fwd.image, anchor, mask2d);
            log.l_anchor = l1.loss;
            for (size_t i = 0; i < upstream.data.size(); ++i)
                upstream.data[i] += config_.lambda2 * l1.grad.data[i];
        }
        log.total = config_.lambda1 * log.l_sds + config_.lambda2 * log.l_anchor;

        GradBuffer grad = render_backward(scene_, camera, fwd, upstream);
        freeze_complement(grad, mask_);
        color_opt_.step(scene_.color_sh, grad.d_color_sh);
        if (config_.update_opacity) opacity_opt_.step(scene_.opacity_logits, grad.d_opacity);
        return log;
    }

  private:
    GaussianScene& scene_;
    const Mask3D& mask_;
    EditConfig config_;
    FirstOrderOptimizer color_opt_;
    FirstOrderOptimizer opacity_opt_;
};

struct EditView {
    Camera camera;
    Image anchor;  // SLaMP-edited image for this view
};

struct EditResult {
    GaussianScene scene;
    std::vector<EditStepLog> log;
};

// Full editing pipeline: prior removal once, then `steps` regularized steps
// cycling the views. Unselected Gaussians are bit-identical afterwards.
inline EditResult edit_pipeline(const GaussianScene& scene, const Mask3D& mask,
                                std::span<const EditView> views,
                                const GradientProvider& provider, const EditConfig& config) {
    config.validate();
    if (views.empty()) throw ParameterError("edit_pipeline: need at least one view");
    for (const auto& v : views)
        if (v.anchor.height != v.camera.height || v.anchor.width != v.camera.width)
            throw ParameterError("edit_pipeline: anchor missing or sized wrong for a view");

    EditResult result;
    result.scene = prior_removal(scene, mask, config.neutral);

    std::vector<Image> masks2d;
    masks2d.reserve(views.size());
    for (const auto& v : views)
        masks2d.push_back(
            render_mask2d(result.scene, mask, v.camera, config.mask2d_threshold));

    EditSession session(result.scene, mask, config);
    for (int step = 0; step < config.steps; ++step) {
        const size_t view = static_cast<size_t>(step) % views.size();
        result.log.push_back(session.step(views[view].camera, provider, views[view].anchor,
                                          masks2d[view], step, static_cast<int>(view)));
    }
    return result;
}

}  // namespace partsplat
