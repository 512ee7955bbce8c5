#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>
#include <random>

#include "partsplat/rasterizer.hpp"
#include "test_helpers.hpp"

using namespace partsplat;
using test_helpers::random_scene;
using test_helpers::test_camera;

namespace {

GaussianScene single_gaussian(double depth, double log_scale, double opacity_logit) {
    GaussianScene scene;
    scene.resize(1);
    scene.positions[0] = {0, 0, depth};
    scene.log_scales[0] = {log_scale, log_scale, log_scale};
    scene.opacity_logits[0] = opacity_logit;
    return scene;
}

double fd_loss(const GaussianScene& scene, const Camera& cam, Channel channel,
               const Vec3& bg, const Image& weights) {
    const RenderOutput out = render(scene, cam, channel, bg);
    double loss = 0;
    for (size_t i = 0; i < out.image.data.size(); ++i)
        loss += weights.data[i] * out.image.data[i];
    return loss;
}

}  // namespace

TEST_CASE("project puts an on-axis gaussian at the principal point") {
    // Pinhole similar-triangles oracle: screen sigma^2 = (focal * s / z)^2
    // plus the documented 0.3 regularization.
    const double z = 5.0, s = 0.05, focal = 100.0;
    Camera cam = look_at_camera({0, 0, 0}, {0, 0, 1}, {0, 1, 0}, 64, 64, focal, 0.1, 100);
    GaussianScene scene = single_gaussian(z, std::log(s), 0.0);
    const auto splats = project(scene, cam);
    REQUIRE(splats.size() == 1);
    REQUIRE_FALSE(splats[0].culled);
    CHECK(splats[0].mean.x == Catch::Approx(cam.cx).margin(1e-9));
    CHECK(splats[0].mean.y == Catch::Approx(cam.cy).margin(1e-9));
    const double expected_var = focal * s / z * (focal * s / z) + kCovRegularization;
    CHECK(splats[0].cov[0] == Catch::Approx(expected_var).margin(1e-9));
    CHECK(splats[0].cov[2] == Catch::Approx(expected_var).margin(1e-9));
    CHECK(splats[0].cov[1] == Catch::Approx(0.0).margin(1e-9));
    CHECK(splats[0].depth == Catch::Approx(z));
}

TEST_CASE("project culls gaussians behind the camera") {
    Camera cam = look_at_camera({0, 0, 0}, {0, 0, 1}, {0, 1, 0}, 64, 64, 50, 0.1, 100);
    GaussianScene scene = single_gaussian(-2.0, -2.0, 0.0);
    CHECK(project(scene, cam)[0].culled);
}

TEST_CASE("project is invariant under a shared rigid translation") {
    GaussianScene scene = random_scene(3, 12);
    Camera cam = test_camera();
    const auto base = project(scene, cam);

    const Vec3 offset{3.0, -2.0, 5.0};
    GaussianScene moved = scene;
    for (auto& p : moved.positions) p += offset;
    Camera cam2 = cam;
    // world-to-camera for the shifted world: R (p + o) + t = R p + (t + R o)
    // is reproduced by t' = t - R o applied to the shifted positions.
    cam2.translation = cam.translation - (cam.rotation * offset);
    const auto shifted = project(moved, cam2);

    for (size_t i = 0; i < base.size(); ++i) {
        REQUIRE(base[i].culled == shifted[i].culled);
        if (base[i].culled) continue;
        CHECK(shifted[i].mean.x == Catch::Approx(base[i].mean.x).margin(1e-9));
        CHECK(shifted[i].mean.y == Catch::Approx(base[i].mean.y).margin(1e-9));
        CHECK(shifted[i].depth == Catch::Approx(base[i].depth).margin(1e-9));
        for (int k = 0; k < 3; ++k)
            CHECK(shifted[i].cov[k] == Catch::Approx(base[i].cov[k]).margin(1e-9));
    }
}

TEST_CASE("render of an empty scene is the background") {
    GaussianScene scene;
    Camera cam = test_camera();
    const RenderOutput out = render(scene, cam, Channel::Color, {1, 1, 1});
    for (double v : out.image.data) CHECK(v == 1.0);
    for (double v : out.alpha.data) CHECK(v == 0.0);
}

TEST_CASE("render rejects a zero-size image") {
    GaussianScene scene;
    Camera cam = test_camera();
    cam.width = 0;
    CHECK_THROWS_AS(render(scene, cam, Channel::Color, {0, 0, 0}), StructuralError);
}

TEST_CASE("a frame-covering opaque gaussian renders its DC label color") {
    GaussianScene scene = single_gaussian(4.0, std::log(2.0), 12.0);
    auto label = scene.label_block(0);
    label[0] = sh_dc_from_value(1.0);   // red
    label[16] = sh_dc_from_value(0.0);  // green
    label[32] = sh_dc_from_value(0.0);  // blue
    Camera cam = look_at_camera({0, 0, 0}, {0, 0, 1}, {0, 1, 0}, 33, 33, 60, 0.1, 100);
    const RenderOutput out = render(scene, cam, Channel::Label, {0, 0, 0});
    const int cx = 16, cy = 16;
    CHECK(out.image.at(cy, cx, 0) == Catch::Approx(1.0).margin(1e-3));
    CHECK(out.image.at(cy, cx, 1) == Catch::Approx(0.0).margin(1e-3));
    CHECK(out.image.at(cy, cx, 2) == Catch::Approx(0.0).margin(1e-3));
}

TEST_CASE("a fully opaque near gaussian annihilates a far one") {
    GaussianScene both;
    both.resize(2);
    both.positions[0] = {0, 0, 6.0};  // far
    both.positions[1] = {0, 0, 3.0};  // near, nearly opaque, frame-wide footprint
    both.log_scales[0] = {0.0, 0.0, 0.0};
    both.log_scales[1] = {4.0, 4.0, 4.0};
    both.opacity_logits[0] = 2.0;
    both.opacity_logits[1] = 20.0;  // sigmoid -> 1 - 2e-9

    GaussianScene near_only = both;
    std::vector<char> subset{0, 1};

    Camera cam = look_at_camera({0, 0, 0}, {0, 0, 1}, {0, 1, 0}, 32, 32, 60, 0.1, 100);
    const RenderOutput with_far = render(both, cam, Channel::Color, {0.2, 0.3, 0.4});
    const RenderOutput without_far =
        render(near_only, cam, Channel::Color, {0.2, 0.3, 0.4}, &subset);
    // Compare where the near gaussian saturates (transmittance below the
    // early-out floor); there the far contribution is dropped exactly.
    for (int y = 14; y <= 17; ++y)
        for (int x = 14; x <= 17; ++x)
            for (int c = 0; c < 3; ++c)
                CHECK(with_far.image.at(y, x, c) == without_far.image.at(y, x, c));
}

TEST_CASE("background-substitution identity: image difference is (1-alpha) * bg difference") {
    // Implies the compositing conservation law: per pixel the background is
    // weighted by exactly 1 minus the sum of contributor weights.
    const GaussianScene scene = random_scene(17, 15);
    Camera cam = test_camera();
    const Vec3 bg0{0, 0, 0}, bg1{1, 0.5, 0.25};
    const RenderOutput r0 = render(scene, cam, Channel::Color, bg0);
    const RenderOutput r1 = render(scene, cam, Channel::Color, bg1);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            const double t = 1.0 - r0.alpha.at(y, x, 0);
            CHECK(r1.image.at(y, x, 0) - r0.image.at(y, x, 0) ==
                  Catch::Approx(t * bg1.x).margin(1e-5));
            CHECK(r1.image.at(y, x, 1) - r0.image.at(y, x, 1) ==
                  Catch::Approx(t * bg1.y).margin(1e-5));
            CHECK(r1.image.at(y, x, 2) - r0.image.at(y, x, 2) ==
                  Catch::Approx(t * bg1.z).margin(1e-5));
            CHECK(r0.alpha.at(y, x, 0) >= 0.0);
            CHECK(r0.alpha.at(y, x, 0) <= 1.0);
        }
}

TEST_CASE("permuting gaussian storage order leaves the render bit-identical") {
    const GaussianScene scene = random_scene(23, 20);
    Camera cam = test_camera();
    const RenderOutput base = render(scene, cam, Channel::Color, {1, 1, 1});

    std::vector<size_t> perm(scene.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937 rng(99);
    std::shuffle(perm.begin(), perm.end(), rng);

    GaussianScene shuffled;
    shuffled.resize(scene.size());
    for (size_t i = 0; i < perm.size(); ++i) {
        const size_t j = perm[i];
        shuffled.positions[i] = scene.positions[j];
        shuffled.log_scales[i] = scene.log_scales[j];
        shuffled.rotations[i] = scene.rotations[j];
        shuffled.opacity_logits[i] = scene.opacity_logits[j];
        std::copy(scene.color_block(j).begin(), scene.color_block(j).end(),
                  shuffled.color_block(i).begin());
        std::copy(scene.label_block(j).begin(), scene.label_block(j).end(),
                  shuffled.label_block(i).begin());
    }
    const RenderOutput permuted = render(shuffled, cam, Channel::Color, {1, 1, 1});
    CHECK(base.image.data == permuted.image.data);
    CHECK(base.alpha.data == permuted.alpha.data);
}

TEST_CASE("render_backward returns zeros for a zero upstream gradient") {
    const GaussianScene scene = random_scene(31, 8);
    Camera cam = test_camera();
    const RenderOutput fwd = render(scene, cam, Channel::Label, {0, 0, 0});
    const GradBuffer grad = render_backward(scene, cam, fwd, Image(32, 32, 3));
    for (double v : grad.d_label_sh) CHECK(v == 0.0);
    for (double v : grad.d_opacity) CHECK(v == 0.0);
}

TEST_CASE("render_backward validates the forward cache") {
    const GaussianScene scene = random_scene(37, 5);
    Camera cam = test_camera();
    const RenderOutput fwd = render(scene, cam, Channel::Label, {0, 0, 0});
    const GaussianScene other = random_scene(38, 6);
    CHECK_THROWS_AS(render_backward(other, cam, fwd, Image(32, 32, 3)), StructuralError);
    CHECK_THROWS_AS(render_backward(scene, cam, fwd, Image(16, 16, 3)), StructuralError);
}

TEST_CASE("culled gaussians receive zero gradients") {
    GaussianScene scene = random_scene(41, 6);
    scene.positions[2] = {0, 0, -50};  // far behind the camera
    Camera cam = test_camera();
    const RenderOutput fwd = render(scene, cam, Channel::Label, {0, 0, 0});
    REQUIRE(fwd.splats[2].culled);
    Image g(32, 32, 3, 1.0);
    const GradBuffer grad = render_backward(scene, cam, fwd, g);
    const auto block = static_cast<size_t>(scene.label_block_size());
    for (size_t c = 2 * block; c < 3 * block; ++c) CHECK(grad.d_label_sh[c] == 0.0);
    CHECK(grad.d_opacity[2] == 0.0);
}

TEST_CASE("single-gaussian label gradients match central finite differences") {
    GaussianScene scene = single_gaussian(4.0, std::log(0.35), 0.5);
    for (auto& v : scene.label_block(0)) v = 0.1;
    Camera cam = test_camera();

    std::mt19937 rng(5);
    std::uniform_real_distribution<double> uni(-1, 1);
    Image g(32, 32, 3);
    for (auto& v : g.data) v = uni(rng);

    const RenderOutput fwd = render(scene, cam, Channel::Label, {0.3, 0.3, 0.3});
    const GradBuffer grad = render_backward(scene, cam, fwd, g);

    const double h = 1e-4;
    for (size_t i = 0; i < scene.label_sh.size(); ++i) {
        GaussianScene plus = scene, minus = scene;
        plus.label_sh[i] += h;
        minus.label_sh[i] -= h;
        const double fd = (fd_loss(plus, cam, Channel::Label, {0.3, 0.3, 0.3}, g) -
                           fd_loss(minus, cam, Channel::Label, {0.3, 0.3, 0.3}, g)) /
                          (2 * h);
        const double an = grad.d_label_sh[i];
        const double err = std::abs(fd - an);
        CHECK(err <= std::max(1e-3 * std::max(std::abs(fd), std::abs(an)), 1e-6));
    }
}

TEST_CASE("gradient check over random scenes and both channels") {
    // Smaller sibling of the acceptance criterion: 3 scenes, all label SH and
    // opacity coordinates, 99% pass rate at 1e-3 relative error.
    int bad = 0, total = 0;
    for (unsigned seed = 100; seed < 103; ++seed) {
        const GaussianScene scene = random_scene(seed, 10);
        Camera cam = test_camera();
        std::mt19937 rng(seed);
        std::uniform_real_distribution<double> uni(-1, 1);
        Image g(32, 32, 3);
        for (auto& v : g.data) v = uni(rng);
        const Vec3 bg{0.2, 0.5, 0.7};
        const double h = 1e-4;
        GaussianScene mutable_scene = scene;
        auto check_coord = [&](double* coord, double analytic) {
            const double saved = *coord;
            *coord = saved + h;
            const double up = fd_loss(mutable_scene, cam, Channel::Label, bg, g);
            *coord = saved - h;
            const double dn = fd_loss(mutable_scene, cam, Channel::Label, bg, g);
            *coord = saved;
            const double fd = (up - dn) / (2 * h);
            ++total;
            if (std::abs(fd - analytic) >
                std::max(1e-3 * std::max(std::abs(fd), std::abs(analytic)), 1e-6))
                ++bad;
        };
        const RenderOutput fwd2 = render(mutable_scene, cam, Channel::Label, bg);
        const GradBuffer grad2 = render_backward(mutable_scene, cam, fwd2, g);
        for (size_t i = 0; i < mutable_scene.label_sh.size(); ++i)
            check_coord(&mutable_scene.label_sh[i], grad2.d_label_sh[i]);
        for (size_t i = 0; i < mutable_scene.size(); ++i)
            check_coord(&mutable_scene.opacity_logits[i], grad2.d_opacity[i]);
    }
    INFO("bad coordinates: " << bad << " / " << total);
    CHECK(bad * 100 <= total);
}

TEST_CASE("render and backward are bit-identical across thread counts") {
    // Per-tile gradient buffers merge in tile order, so the reduction result
    // never depends on how tiles are assigned to threads.
    const GaussianScene scene = random_scene(53, 40);
    Camera cam = look_at_camera({0, 0, -4}, {0, 0, 0}, {0, 1, 0}, 96, 96, 120, 0.1, 100);
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> uni(-1, 1);
    Image g(96, 96, 3);
    for (auto& v : g.data) v = uni(rng);

    auto run = [&](const char* threads) {
        setenv("PARTSPLAT_THREADS", threads, 1);
        const RenderOutput fwd = render(scene, cam, Channel::Color, {0.1, 0.2, 0.3});
        GradBuffer grad = render_backward(scene, cam, fwd, g);
        unsetenv("PARTSPLAT_THREADS");
        return std::make_pair(fwd.image.data, std::move(grad));
    };
    const auto [img1, grad1] = run("1");
    const auto [img4, grad4] = run("4");
    CHECK(img1 == img4);
    CHECK(grad1.d_color_sh == grad4.d_color_sh);
    CHECK(grad1.d_opacity == grad4.d_opacity);
}

TEST_CASE("masked_l1_image basics") {
    SECTION("identical images give zero loss and gradient") {
        Image a(4, 4, 3, 0.3), mask(4, 4, 1, 1.0);
        const MaskedL1 out = masked_l1_image(a, a, mask);
        CHECK(out.loss == 0.0);
        for (double v : out.grad.data) CHECK(v == 0.0);
    }
    SECTION("an all-zero mask gives zero loss by convention") {
        Image a(4, 4, 3, 0.9), b(4, 4, 3, 0.1), mask(4, 4, 1, 0.0);
        const MaskedL1 out = masked_l1_image(a, b, mask);
        CHECK(out.loss == 0.0);
    }
    SECTION("1x1 arithmetic: channel-mean absolute difference") {
        Image a(1, 1, 3, 0.8), b(1, 1, 3, 0.3), mask(1, 1, 1, 1.0);
        const MaskedL1 out = masked_l1_image(a, b, mask);
        CHECK(out.loss == Catch::Approx(0.5));
        for (double v : out.grad.data) CHECK(v == Catch::Approx(1.0 / 3.0));
    }
    SECTION("shape mismatch is a structural error") {
        Image a(4, 4, 3), b(4, 5, 3), mask(4, 4, 1, 1.0);
        CHECK_THROWS_AS(masked_l1_image(a, b, mask), StructuralError);
    }
}
