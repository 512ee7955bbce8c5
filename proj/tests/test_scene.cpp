#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "partsplat/camera.hpp"
#include "partsplat/palette.hpp"
#include "partsplat/scene.hpp"

using namespace partsplat;

namespace {

Vec3 random_unit(std::mt19937& rng) {
    std::normal_distribution<double> gauss;
    Vec3 v{gauss(rng), gauss(rng), gauss(rng)};
    return normalized(v);
}

std::vector<double> zero_block(int degree) {
    return std::vector<double>(static_cast<size_t>(3 * sh_coeff_count(degree)), 0.0);
}

}  // namespace

TEST_CASE("sh_eval with all-zero coefficients returns the DC offset") {
    const auto block = zero_block(3);
    const auto rgb = sh_eval(block, {0, 0, 1});
    CHECK(rgb[0] == Catch::Approx(0.5));
    CHECK(rgb[1] == Catch::Approx(0.5));
    CHECK(rgb[2] == Catch::Approx(0.5));
}

TEST_CASE("sh_eval DC term reproduces the numeric Y00 basis value") {
    // Independent oracle: Y00 is the constant 0.28209479... so a red DC
    // coefficient of 0.5 / Y00 must saturate the red channel at exactly 1.
    const double y00 = 0.5 / std::sqrt(M_PI);  // 0.28209479177387814
    REQUIRE(y00 == Catch::Approx(0.28209479).margin(1e-8));
    auto block = zero_block(3);
    block[0] = 0.5 / y00;  // = 1.7724538509
    REQUIRE(block[0] == Catch::Approx(1.7725).margin(1e-4));
    for (const Vec3 dir : {Vec3{0, 0, 1}, Vec3{1, 0, 0}, Vec3{0.6, 0, 0.8}}) {
        const auto rgb = sh_eval(block, dir);
        CHECK(rgb[0] == Catch::Approx(1.0).margin(1e-12));
        CHECK(rgb[1] == Catch::Approx(0.5));
        CHECK(rgb[2] == Catch::Approx(0.5));
    }
}

TEST_CASE("degree-0 blocks are direction independent") {
    std::vector<double> block{0.3, -0.1, 0.7};
    const auto a = sh_eval(block, {1, 0, 0});
    const auto b = sh_eval(block, {0, 0, -1});
    CHECK(a == b);

    std::mt19937 rng(7);
    const auto ref = sh_eval_raw(block, random_unit(rng));
    for (int i = 0; i < 100; ++i) {
        const auto v = sh_eval_raw(block, random_unit(rng));
        for (int c = 0; c < 3; ++c) CHECK(v[c] == Catch::Approx(ref[c]).margin(1e-14));
    }
}

TEST_CASE("sh_eval_raw is linear in the coefficients") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> uni(-1, 1);
    for (int trial = 0; trial < 20; ++trial) {
        auto c1 = zero_block(3), c2 = zero_block(3), mix = zero_block(3);
        const double a = uni(rng), b = uni(rng);
        for (size_t i = 0; i < c1.size(); ++i) {
            c1[i] = uni(rng);
            c2[i] = uni(rng);
            mix[i] = a * c1[i] + b * c2[i];
        }
        const Vec3 dir = random_unit(rng);
        const auto v1 = sh_eval_raw(c1, dir);
        const auto v2 = sh_eval_raw(c2, dir);
        const auto vm = sh_eval_raw(mix, dir);
        for (int c = 0; c < 3; ++c) {
            // The DC offset is affine, so linearity holds on offsets-removed values.
            const double expect = a * (v1[c] - 0.5) + b * (v2[c] - 0.5) + 0.5;
            CHECK(vm[c] == Catch::Approx(expect).margin(1e-10));
        }
    }
}

TEST_CASE("sh_eval rejects malformed block lengths") {
    std::vector<double> bad(17, 0.0);
    CHECK_THROWS_AS(sh_eval(bad, Vec3{0, 0, 1}), StructuralError);
    CHECK(sh_degree_from_block(3) == 0);
    CHECK(sh_degree_from_block(48) == 3);
    CHECK(sh_degree_from_block(20) == -1);
}

TEST_CASE("quaternion normalization is idempotent") {
    const Quat q{2.0, -1.0, 0.5, 0.25};
    const Quat n1 = q.normalized();
    const Quat n2 = n1.normalized();
    CHECK(n1.norm() == Catch::Approx(1.0).margin(1e-12));
    CHECK(n2.w == Catch::Approx(n1.w).margin(1e-15));
    CHECK(n2.x == Catch::Approx(n1.x).margin(1e-15));
}

TEST_CASE("view_direction points from the camera center to the position") {
    Camera cam = look_at_camera({0, 0, 0}, {0, 0, 1}, {0, 1, 0}, 64, 64, 50, 0.01, 100);
    const Vec3 d = view_direction(cam, {0, 0, 1});
    CHECK(d.x == Catch::Approx(0).margin(1e-12));
    CHECK(d.y == Catch::Approx(0).margin(1e-12));
    CHECK(d.z == Catch::Approx(1).margin(1e-12));

    Camera cam2 = look_at_camera({1, 0, 0}, {1, 0, 5}, {0, 1, 0}, 64, 64, 50, 0.01, 100);
    const Vec3 d2 = view_direction(cam2, {1, 0, 2});
    CHECK(d2.z == Catch::Approx(1).margin(1e-12));

    CHECK_THROWS_AS(view_direction(cam, cam.center()), DegenerateError);
}

TEST_CASE("camera validation rejects bad parameters") {
    Camera cam = look_at_camera({0, 0, -3}, {0, 0, 0}, {0, 1, 0}, 32, 32, 40, 0.1, 100);
    CHECK_NOTHROW(cam.validate());
    Camera bad = cam;
    bad.fy = 0;
    CHECK_THROWS_AS(bad.validate(), ParameterError);
    bad = cam;
    bad.near = bad.far;
    CHECK_THROWS_AS(bad.validate(), ParameterError);
    bad = cam;
    bad.rotation(0, 0) += 0.01;
    CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("validate_scene reports nothing for an empty scene") {
    GaussianScene scene;
    CHECK(validate_scene(scene).empty());
}

TEST_CASE("validate_scene names the index of a denormalized quaternion") {
    GaussianScene scene;
    scene.resize(3);
    scene.rotations[1] = Quat{2, 0, 0, 0};
    const auto issues = validate_scene(scene);
    REQUIRE(issues.size() == 1);
    CHECK(issues[0].index == 1);
    CHECK(issues[0].detail.find("quaternion") != std::string::npos);
}

TEST_CASE("validate_scene flags mismatched array lengths") {
    GaussianScene scene;
    scene.resize(2);
    scene.opacity_logits.push_back(0.0);
    const auto issues = validate_scene(scene);
    REQUIRE_FALSE(issues.empty());
    CHECK(issues[0].detail.find("opacity_logits") != std::string::npos);
}

TEST_CASE("palette construction enforces the invariants") {
    using Label = LabelPalette::Label;
    CHECK_NOTHROW(LabelPalette({Label{"background", {0.2, 0.2, 0.2}},
                                Label{"part", {0.9, 0.2, 0.2}}}));
    // too close
    CHECK_THROWS_AS(LabelPalette({Label{"background", {0.2, 0.2, 0.2}},
                                  Label{"part", {0.2, 0.2, 0.3}}}),
                    ParameterError);
    // no background
    CHECK_THROWS_AS(LabelPalette({Label{"a", {0.2, 0.2, 0.2}}, Label{"b", {0.9, 0.2, 0.2}}}),
                    ParameterError);
    // single label
    CHECK_THROWS_AS(LabelPalette({Label{"background", {0.2, 0.2, 0.2}}}), ParameterError);
    // two backgrounds
    CHECK_THROWS_AS(LabelPalette({Label{"background", {0.2, 0.2, 0.2}},
                                  Label{"background", {0.9, 0.2, 0.2}}}),
                    ParameterError);
}

TEST_CASE("palette nearest snaps to the lower index on ties") {
    const LabelPalette palette({LabelPalette::Label{"background", {0.0, 0.0, 0.0}},
                                LabelPalette::Label{"part", {1.0, 0.0, 0.0}}});
    CHECK(palette.nearest({0.5, 0.0, 0.0}) == 0);
    CHECK(palette.nearest({0.51, 0.0, 0.0}) == 1);
}
