#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "partsplat/io/config.hpp"
#include "partsplat/io/json_io.hpp"
#include "partsplat/io/latents.hpp"
#include "partsplat/io/ply.hpp"
#include "partsplat/io/png_io.hpp"
#include "partsplat/io/toml.hpp"
#include "test_helpers.hpp"

using namespace partsplat;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("partsplat_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::vector<char> slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("ply round trip is bit-exact") {
    TempDir dir;
    GaussianScene scene = test_helpers::random_scene(3, 100);
    scene.gt_part.assign(scene.size(), 0);
    for (size_t i = 0; i < scene.size(); ++i) scene.gt_part[i] = static_cast<int>(i % 3);

    const std::string path = dir.file("scene.ply");
    io::save_ply(scene, path);
    const io::PlyScene loaded = io::load_ply(path);

    CHECK(loaded.scene.positions == scene.positions);
    CHECK(loaded.scene.log_scales == scene.log_scales);
    CHECK(loaded.scene.opacity_logits == scene.opacity_logits);
    CHECK(loaded.scene.color_sh == scene.color_sh);
    CHECK(loaded.scene.label_sh == scene.label_sh);
    CHECK(loaded.scene.gt_part == scene.gt_part);
    for (size_t i = 0; i < scene.size(); ++i) {
        CHECK(loaded.scene.rotations[i].w == scene.rotations[i].w);
        CHECK(loaded.scene.rotations[i].x == scene.rotations[i].x);
    }

    // File-level determinism: saving the loaded scene reproduces the bytes.
    const std::string path2 = dir.file("scene2.ply");
    io::save_ply(loaded.scene, path2);
    CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("ply without label properties defaults the label field to zero") {
    TempDir dir;
    // Hand-build a minimal standard PLY with one vertex and no label block.
    std::ostringstream os;
    os << "ply\nformat binary_little_endian 1.0\nelement vertex 1\n";
    os << "property float x\nproperty float y\nproperty float z\n";
    for (int c = 0; c < 3; ++c) os << "property float f_dc_" << c << "\n";
    for (int r = 0; r < 45; ++r) os << "property float f_rest_" << r << "\n";
    os << "property float opacity\n";
    for (int i = 0; i < 3; ++i) os << "property float scale_" << i << "\n";
    for (int i = 0; i < 4; ++i) os << "property float rot_" << i << "\n";
    os << "end_header\n";
    const std::string path = dir.file("plain.ply");
    {
        std::ofstream f(path, std::ios::binary);
        f << os.str();
        std::vector<float> row(59, 0.25f);
        f.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(row.size() * 4));
    }
    const io::PlyScene loaded = io::load_ply(path);
    REQUIRE(loaded.scene.size() == 1);
    for (double v : loaded.scene.label_sh) CHECK(v == 0.0);
    CHECK(loaded.scene.positions[0].x == 0.25);
}

TEST_CASE("ply unknown properties are preserved verbatim") {
    TempDir dir;
    GaussianScene scene = test_helpers::random_scene(5, 10);
    std::vector<io::PlyExtraProperty> extras(1);
    extras[0].name = "nx";
    extras[0].type = "float";
    extras[0].data.resize(scene.size() * 4);
    std::mt19937 rng(8);
    for (size_t i = 0; i < scene.size(); ++i) {
        const float v = static_cast<float>(i) * 0.5f;
        std::memcpy(extras[0].data.data() + i * 4, &v, 4);
    }
    const std::string path = dir.file("extra.ply");
    io::save_ply(scene, path, extras);
    const io::PlyScene loaded = io::load_ply(path);
    REQUIRE(loaded.extras.size() == 1);
    CHECK(loaded.extras[0].name == "nx");
    CHECK(loaded.extras[0].type == "float");
    CHECK(loaded.extras[0].data == extras[0].data);

    const std::string path2 = dir.file("extra2.ply");
    io::save_ply(loaded.scene, path2, loaded.extras);
    CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("ply parse errors are descriptive") {
    TempDir dir;
    SECTION("missing mandatory property names it") {
        std::ofstream f(dir.file("bad.ply"), std::ios::binary);
        f << "ply\nformat binary_little_endian 1.0\nelement vertex 0\n"
          << "property float x\nproperty float y\nend_header\n";
        f.close();
        try {
            io::load_ply(dir.file("bad.ply"));
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("'z'") != std::string::npos);
        }
    }
    SECTION("truncated data is a parse error, not a crash") {
        GaussianScene scene = test_helpers::random_scene(7, 4);
        const std::string path = dir.file("trunc.ply");
        io::save_ply(scene, path);
        auto bytes = slurp(path);
        bytes.resize(bytes.size() - 17);
        std::ofstream f(path, std::ios::binary);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        f.close();
        CHECK_THROWS_AS(io::load_ply(path), ParseError);
    }
    SECTION("malformed header reports a byte offset") {
        const std::string path = dir.file("hdr.ply");
        std::ofstream f(path, std::ios::binary);
        f << "ply\nformat binary_little_endian 1.0\nelement vertex 1\nwhat is this\n";
        f.close();
        try {
            io::load_ply(path);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
        }
    }
}

TEST_CASE("camera json round trip and validation") {
    TempDir dir;
    SECTION("identity pose parses") {
        std::ofstream f(dir.file("cams.json"));
        f << R"([{"width": 64, "height": 48, "fx": 50, "fy": 50, "cx": 32, "cy": 24,
               "world_to_camera": [1,0,0,0, 0,1,0,0, 0,0,1,0, 0,0,0,1]}])";
        f.close();
        const auto cams = io::load_cameras(dir.file("cams.json"));
        REQUIRE(cams.size() == 1);
        CHECK(cams[0].width == 64);
        CHECK(cams[0].rotation(0, 0) == 1.0);
    }
    SECTION("wrong matrix size is an error") {
        std::ofstream f(dir.file("bad.json"));
        f << R"([{"width": 64, "height": 48, "fx": 50, "fy": 50, "cx": 32, "cy": 24,
               "world_to_camera": [1,0,0,0, 0,1,0,0, 0,0,1,0]}])";
        f.close();
        CHECK_THROWS_AS(io::load_cameras(dir.file("bad.json")), ParseError);
    }
    SECTION("non-positive focal is an error") {
        std::ofstream f(dir.file("fy.json"));
        f << R"([{"width": 64, "height": 48, "fx": 50, "fy": 0, "cx": 32, "cy": 24,
               "world_to_camera": [1,0,0,0, 0,1,0,0, 0,0,1,0, 0,0,0,1]}])";
        f.close();
        CHECK_THROWS_AS(io::load_cameras(dir.file("fy.json")), std::exception);
    }
    SECTION("slightly skewed rotations are re-orthonormalized") {
        std::ofstream f(dir.file("skew.json"));
        f << R"([{"width": 64, "height": 48, "fx": 50, "fy": 50, "cx": 32, "cy": 24,
               "world_to_camera": [1.0001,0,0,0, 0,1,0,0, 0,0,1,0, 0,0,0,1]}])";
        f.close();
        const auto cams = io::load_cameras(dir.file("skew.json"));
        CHECK(cams[0].rotation.orthonormality_defect() < 1e-9);
    }
    SECTION("rotations far from orthonormal are rejected") {
        std::ofstream f(dir.file("far.json"));
        f << R"([{"width": 64, "height": 48, "fx": 50, "fy": 50, "cx": 32, "cy": 24,
               "world_to_camera": [1.2,0,0,0, 0,1,0,0, 0,0,1,0, 0,0,0,1]}])";
        f.close();
        CHECK_THROWS_AS(io::load_cameras(dir.file("far.json")), ParseError);
    }
    SECTION("save then load reproduces the cameras") {
        const auto rig = orbit_rig(2.0, 3, 1, 64, 64);
        io::save_cameras(rig, dir.file("rig.json"));
        const auto loaded = io::load_cameras(dir.file("rig.json"));
        REQUIRE(loaded.size() == rig.size());
        for (size_t i = 0; i < rig.size(); ++i) {
            CHECK(loaded[i].fx == rig[i].fx);
            CHECK(loaded[i].translation.x == Catch::Approx(rig[i].translation.x).margin(1e-12));
        }
    }
}

TEST_CASE("png quantization uses round-half-to-even and round trips k/255") {
    TempDir dir;
    Image img(4, 8, 3);
    std::mt19937 rng(13);
    std::uniform_int_distribution<int> level(0, 255);
    for (auto& v : img.data) v = level(rng) / 255.0;
    const std::string path = dir.file("img.png");
    io::write_png(path, img);
    const Image back = io::read_png(path);
    REQUIRE(back.same_shape(img));
    CHECK(max_abs_difference(back, img) < 1e-12);

    // Half-integer scaled values round to even: 0.5/255 -> 0, 1.5/255 -> 2.
    CHECK(io::quantize_u8(0.5 / 255.0) == 0);
    CHECK(io::quantize_u8(1.5 / 255.0) == 2);
    CHECK(io::quantize_u8(2.5 / 255.0) == 2);
}

TEST_CASE("png grayscale round trip") {
    TempDir dir;
    Image gray(6, 5, 1);
    for (size_t i = 0; i < gray.data.size(); ++i)
        gray.data[i] = static_cast<double>(i % 256) / 255.0;
    io::write_png(dir.file("g.png"), gray);
    const Image back = io::read_png(dir.file("g.png"));
    CHECK(back.channels == 1);
    CHECK(max_abs_difference(back, gray) < 1e-12);
}

TEST_CASE("latent files round trip with the sidecar") {
    TempDir dir;
    LatentField z;
    z.grid = Image(5, 7, 4);
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> uni(-2, 2);
    for (auto& v : z.grid.data) v = static_cast<float>(uni(rng));
    z.t = 0.375;
    const std::string path = dir.file("z.pslt");
    io::save_latent(z, path);
    const LatentField back = io::load_latent(path);
    CHECK(back.grid.data == z.grid.data);
    CHECK(back.t == 0.375);

    SECTION("bad magic is rejected") {
        auto bytes = slurp(path);
        bytes[0] = 'X';
        std::ofstream f(path, std::ios::binary);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        f.close();
        CHECK_THROWS_AS(io::load_latent(path), ParseError);
    }
    SECTION("truncation is rejected") {
        auto bytes = slurp(path);
        bytes.resize(bytes.size() / 2);
        std::ofstream f(path, std::ios::binary);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        f.close();
        CHECK_THROWS_AS(io::load_latent(path), ParseError);
    }
}

TEST_CASE("toml subset parser") {
    SECTION("scalars, arrays and tables") {
        const auto t = toml::parse(R"(
# a comment
title = "hello \"world\""
count = 42
rate = 0.25
flag = true

[section]
values = [1, 2, 3]
nested = [[0.1, 0.2], [0.3, 0.4]]

[section.sub]
name = "deep"
)");
        CHECK(toml::string_or(t, "title", "") == "hello \"world\"");
        CHECK(toml::integer_or(t, "count", 0) == 42);
        CHECK(toml::number_or(t, "rate", 0) == 0.25);
        CHECK(toml::boolean_or(t, "flag", false));
        CHECK(toml::find(t, "section.values")->array().size() == 3);
        CHECK(toml::find(t, "section.nested")->array()[1].array()[0].number() == 0.3);
        CHECK(toml::string_or(t, "section.sub.name", "") == "deep");
    }
    SECTION("arrays of tables") {
        const auto t = toml::parse(R"(
[[parts]]
name = "a"
count = 1

[[parts]]
name = "b"
count = 2
)");
        const auto& parts = toml::find(t, "parts")->array();
        REQUIRE(parts.size() == 2);
        CHECK(toml::string_or(parts[1].table(), "name", "") == "b");
    }
    SECTION("parse errors carry line numbers") {
        try {
            toml::parse("a b c\n");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("line 1") != std::string::npos);
        }
    }
    SECTION("serialization round trips") {
        const auto t = toml::parse(R"(
x = 1.5
y = "str"
[sub]
z = [1, 2]
)");
        const auto t2 = toml::parse(toml::serialize(t));
        CHECK(t == t2);
    }
}

TEST_CASE("run config round trips through TOML") {
    io::RunConfig cfg;
    cfg.paths.scene = "a.ply";
    cfg.paths.output_dir = "out";
    cfg.galp.base.steps = 123;
    cfg.galp.base.w_galp = 0.75;
    cfg.galp.target = "left";
    cfg.slamp.schedule = BlendSchedule::uniform(12, 0.2, 0.8, 3);
    cfg.slamp.ts_candidates = {1, 2, 3};
    cfg.edit.base.lambda1 = 0.4;
    cfg.edit.provider = "match_target";
    cfg.synth.scene = test_helpers::two_sphere_spec(5, 50);
    cfg.synth.corruption.label_flip_rate = 0.15;
    cfg.synth.corruption.merge_pairs = {{1, 2}};

    const toml::Table t = io::run_config_to_toml(cfg);
    const io::RunConfig back = io::run_config_from_toml(toml::parse(toml::serialize(t)));
    CHECK(back == cfg);
}

TEST_CASE("run config loading validates the file") {
    CHECK_THROWS_AS(io::load_run_config("/nonexistent/path/config.toml"), ParseError);
}

TEST_CASE("PARTSPLAT_SEED overrides every configured seed") {
    const auto table = toml::parse("[galp]\nseed = 1\n[slamp]\nseed = 2\n"
                                   "[synth]\nseed = 3\n[corruption]\nseed = 4\n");
    setenv("PARTSPLAT_SEED", "777", 1);
    const io::RunConfig cfg = io::run_config_from_toml(table);
    unsetenv("PARTSPLAT_SEED");
    CHECK(cfg.galp.base.seed == 777u);
    CHECK(cfg.slamp.seed == 777u);
    CHECK(cfg.synth.scene.seed == 777u);
    CHECK(cfg.synth.corruption.seed == 777u);

    const io::RunConfig plain = io::run_config_from_toml(table);
    CHECK(plain.galp.base.seed == 1u);
    CHECK(plain.synth.corruption.seed == 4u);
}
