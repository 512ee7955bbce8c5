#pragma once

// Shared fixtures for the test suites.

#include <random>
#include <vector>

#include "partsplat/camera.hpp"
#include "partsplat/scene.hpp"
#include "partsplat/synth.hpp"

namespace test_helpers {

using namespace partsplat;

// Random well-conditioned scene inside the unit ball, float32-exact.
inline GaussianScene random_scene(unsigned seed, size_t count, double coeff_scale = 0.3) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    auto q32 = [](double v) { return static_cast<double>(static_cast<float>(v)); };

    GaussianScene scene;
    scene.resize(count);
    for (size_t i = 0; i < count; ++i) {
        scene.positions[i] = {q32(uni(rng)), q32(uni(rng)), q32(uni(rng))};
        const double s = q32(-2.2 + 0.4 * uni(rng));
        scene.log_scales[i] = {s, q32(s + 0.1 * uni(rng)), q32(s + 0.1 * uni(rng))};
        Quat q{1.5 + uni(rng), 0.4 * uni(rng), 0.4 * uni(rng), 0.4 * uni(rng)};
        q = q.normalized();
        // float32 rounding keeps the norm within ~1e-7 of 1, inside the 1e-6
        // scene invariant, while staying exactly serializable.
        scene.rotations[i] = {q32(q.w), q32(q.x), q32(q.y), q32(q.z)};
        scene.opacity_logits[i] = q32(2.0 * uni(rng));
        for (auto& v : scene.color_block(i)) v = q32(coeff_scale * uni(rng));
        for (auto& v : scene.label_block(i)) v = q32(coeff_scale * uni(rng));
    }
    return scene;
}

inline Camera test_camera(int size = 32, double focal = 40.0) {
    return look_at_camera({0, 0, -4}, {0, 0, 0}, {0, 1, 0}, size, size, focal, 0.1, 100.0);
}

// Two overlapping spheres with distinct colors; the fixture behind the
// segmentation and boundary-softness checks.
inline SceneSpec two_sphere_spec(unsigned seed, int count_per_part = 600,
                                 double separation = 2.05) {
    SceneSpec spec;
    spec.seed = seed;
    // Background direction chosen off the red-blue blend axis so label blends
    // at the part boundary never win the cosine argmax for background.
    spec.background_color = {0.1, 0.65, 0.1};
    PartSpec left;
    left.name = "left";
    left.primitive = Primitive::Sphere;
    left.center = {-separation / 2.0, 0, 0};
    left.extent = {1.0, 1.0, 1.0};
    left.count = count_per_part;
    left.color = {0.85, 0.15, 0.15};
    PartSpec right = left;
    right.name = "right";
    right.center = {separation / 2.0, 0, 0};
    right.color = {0.15, 0.15, 0.85};
    spec.parts = {left, right};
    return spec;
}

}  // namespace test_helpers
