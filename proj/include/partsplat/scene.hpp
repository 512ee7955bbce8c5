#pragma once

// Gaussian scene arrays. Scales are stored as logs and opacities as logits so
// optimizer updates stay unconstrained; activations are applied at use sites.
// The scene is treated as an immutable value while rendering; mutation happens
// only between optimizer iterations.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "partsplat/errors.hpp"
#include "partsplat/linalg.hpp"
#include "partsplat/sh.hpp"

namespace partsplat {

struct GaussianScene {
    std::vector<Vec3> positions;
    std::vector<Vec3> log_scales;
    std::vector<Quat> rotations;
    std::vector<double> opacity_logits;
    int color_sh_degree = kMaxShDegree;
    int label_sh_degree = kMaxShDegree;
    std::vector<double> color_sh;  // size() * 3 * (color_sh_degree+1)^2, channel-major
    std::vector<double> label_sh;
    std::vector<int> gt_part;      // optional; empty or size()

    size_t size() const { return positions.size(); }

    int color_block_size() const { return 3 * sh_coeff_count(color_sh_degree); }
    int label_block_size() const { return 3 * sh_coeff_count(label_sh_degree); }

    std::span<const double> color_block(size_t i) const {
        const size_t n = static_cast<size_t>(color_block_size());
        return {color_sh.data() + i * n, n};
    }
    std::span<double> color_block(size_t i) {
        const size_t n = static_cast<size_t>(color_block_size());
        return {color_sh.data() + i * n, n};
    }
    std::span<const double> label_block(size_t i) const {
        const size_t n = static_cast<size_t>(label_block_size());
        return {label_sh.data() + i * n, n};
    }
    std::span<double> label_block(size_t i) {
        const size_t n = static_cast<size_t>(label_block_size());
        return {label_sh.data() + i * n, n};
    }

    void resize(size_t n) {
        positions.resize(n);
        log_scales.resize(n);
        rotations.resize(n);
        opacity_logits.resize(n, 0.0);
        color_sh.resize(n * static_cast<size_t>(color_block_size()), 0.0);
        label_sh.resize(n * static_cast<size_t>(label_block_size()), 0.0);
    }

    double opacity(size_t i) const { return sigmoid(opacity_logits[i]); }
};

struct ValidationIssue {
    size_t index;        // gaussian index, or size() for scene-level issues
    std::string detail;
};

// Every invariant violation, with the offending index. Empty iff valid.
inline std::vector<ValidationIssue> validate_scene(const GaussianScene& scene) {
    std::vector<ValidationIssue> issues;
    const size_t n = scene.size();

    auto check_len = [&](size_t got, size_t want, const char* what) {
        if (got != want)
            issues.push_back({n, std::string(what) + ": expected " + std::to_string(want) +
                                     " entries, got " + std::to_string(got)});
    };
    check_len(scene.log_scales.size(), n, "log_scales");
    check_len(scene.rotations.size(), n, "rotations");
    check_len(scene.opacity_logits.size(), n, "opacity_logits");
    check_len(scene.color_sh.size(), n * static_cast<size_t>(scene.color_block_size()),
              "color_sh");
    check_len(scene.label_sh.size(), n * static_cast<size_t>(scene.label_block_size()),
              "label_sh");
    if (!scene.gt_part.empty()) check_len(scene.gt_part.size(), n, "gt_part");
    if (!issues.empty()) return issues;  // per-element checks assume consistent lengths

    for (size_t i = 0; i < n; ++i) {
        const Vec3& p = scene.positions[i];
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
            issues.push_back({i, "position is not finite"});
        const double qn = scene.rotations[i].norm();
        if (!std::isfinite(qn) || std::abs(qn - 1.0) > 1e-6)
            issues.push_back({i, "quaternion norm " + std::to_string(qn) + " is not 1"});
        if (!std::isfinite(scene.opacity_logits[i]))
            issues.push_back({i, "opacity logit is not finite"});
    }
    return issues;
}

}  // namespace partsplat
