#pragma once

// Run configuration: one TOML file drives the CLI subcommands. Parsing and
// serialization round-trip exactly; PARTSPLAT_SEED overrides every seed field
// when set.

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "partsplat/editor.hpp"
#include "partsplat/errors.hpp"
#include "partsplat/galp.hpp"
#include "partsplat/io/toml.hpp"
#include "partsplat/slamp.hpp"
#include "partsplat/synth.hpp"

namespace partsplat::io {

struct PathsConfig {
    std::string scene;
    std::string cameras;
    std::string palette;
    std::string maps_dir;
    std::string anchors_dir;
    std::string output_dir = "out";

    bool operator==(const PathsConfig&) const = default;
};

struct RenderConfig {
    int width = 128;
    int height = 128;
    Vec3 background = {1.0, 1.0, 1.0};

    bool operator==(const RenderConfig&) const = default;
};

struct GalpRunConfig {
    GalpConfig base;
    std::string target;               // palette label selected into the 3D mask
    double opacity_threshold = 0.1;
    double mask2d_threshold = 0.5;

    bool operator==(const GalpRunConfig&) const = default;
};

struct SlampRunConfig {
    BlendSchedule schedule = BlendSchedule::uniform();
    double gamma = 0.5;
    unsigned seed = 0;
    int width = 32;
    int height = 32;
    int channels = 3;
    std::vector<int> ts_candidates = {0, 2, 4, 7, 10, 14, 21, 28};

    bool operator==(const SlampRunConfig&) const = default;
};

struct EditRunConfig {
    EditConfig base;
    std::string provider = "zero";    // zero | match_target | random
    std::string provider_target;      // image path for match_target
    unsigned seed = 0;

    bool operator==(const EditRunConfig&) const = default;
};

struct SynthRunConfig {
    SceneSpec scene;
    CorruptionSpec corruption;
    int ring_cameras = 16;
    int top_cameras = 4;
    int image_size = 128;

    bool operator==(const SynthRunConfig&) const = default;
};

struct RunConfig {
    PathsConfig paths;
    RenderConfig render;
    GalpRunConfig galp;
    SlampRunConfig slamp;
    EditRunConfig edit;
    SynthRunConfig synth;

    bool operator==(const RunConfig&) const = default;
};

namespace detail {

inline Vec3 vec3_from(const toml::Value& v) {
    const auto& arr = v.array();
    if (arr.size() != 3) throw ParseError("config: expected a 3-element array");
    return {arr[0].number(), arr[1].number(), arr[2].number()};
}

inline toml::Value vec3_to(const Vec3& v) {
    return toml::Value(toml::Array{toml::Value(v.x), toml::Value(v.y), toml::Value(v.z)});
}

inline Primitive primitive_from(const std::string& s) {
    if (s == "sphere") return Primitive::Sphere;
    if (s == "ellipsoid") return Primitive::Ellipsoid;
    if (s == "box-shell") return Primitive::BoxShell;
    throw ParseError("config: unknown primitive '" + s + "'");
}

inline std::string primitive_to(Primitive p) {
    switch (p) {
        case Primitive::Sphere: return "sphere";
        case Primitive::Ellipsoid: return "ellipsoid";
        default: return "box-shell";
    }
}

}  // namespace detail

inline RunConfig run_config_from_toml(const toml::Table& t) {
    RunConfig cfg;
    cfg.paths.scene = toml::string_or(t, "paths.scene", "");
    cfg.paths.cameras = toml::string_or(t, "paths.cameras", "");
    cfg.paths.palette = toml::string_or(t, "paths.palette", "");
    cfg.paths.maps_dir = toml::string_or(t, "paths.maps_dir", "");
    cfg.paths.anchors_dir = toml::string_or(t, "paths.anchors_dir", "");
    cfg.paths.output_dir = toml::string_or(t, "paths.output_dir", cfg.paths.output_dir);

    cfg.render.width = static_cast<int>(toml::integer_or(t, "render.width", cfg.render.width));
    cfg.render.height =
        static_cast<int>(toml::integer_or(t, "render.height", cfg.render.height));
    if (const auto* v = toml::find(t, "render.background"))
        cfg.render.background = detail::vec3_from(*v);

    GalpConfig& g = cfg.galp.base;
    g.steps = static_cast<int>(toml::integer_or(t, "galp.steps", g.steps));
    g.anchor_count = static_cast<int>(toml::integer_or(t, "galp.anchor_count", g.anchor_count));
    g.neighbor_count =
        static_cast<int>(toml::integer_or(t, "galp.neighbor_count", g.neighbor_count));
    g.w_galp = toml::number_or(t, "galp.w_galp", g.w_galp);
    g.lr = toml::number_or(t, "galp.lr", g.lr);
    g.resample_interval =
        static_cast<int>(toml::integer_or(t, "galp.resample_interval", g.resample_interval));
    g.seed = static_cast<unsigned>(toml::integer_or(t, "galp.seed", g.seed));
    g.variance_directions = static_cast<int>(
        toml::integer_or(t, "galp.variance_directions", g.variance_directions));
    const std::string mode = toml::string_or(t, "galp.anchor_mode", "softness");
    if (mode == "softness") g.anchor_mode = AnchorMode::Softness;
    else if (mode == "random") g.anchor_mode = AnchorMode::Random;
    else throw ParseError("config: galp.anchor_mode must be 'softness' or 'random'");
    cfg.galp.target = toml::string_or(t, "galp.target", "");
    cfg.galp.opacity_threshold =
        toml::number_or(t, "galp.opacity_threshold", cfg.galp.opacity_threshold);
    cfg.galp.mask2d_threshold =
        toml::number_or(t, "galp.mask2d_threshold", cfg.galp.mask2d_threshold);

    BlendSchedule& s = cfg.slamp.schedule;
    const int slamp_steps =
        static_cast<int>(toml::integer_or(t, "slamp.steps", static_cast<int>(s.timesteps.size())));
    s = BlendSchedule::uniform(slamp_steps, toml::number_or(t, "slamp.alpha_base", s.alpha_base),
                               toml::number_or(t, "slamp.alpha_last", s.alpha_last),
                               static_cast<int>(toml::integer_or(t, "slamp.t_s", s.t_s)));
    cfg.slamp.gamma = toml::number_or(t, "slamp.gamma", cfg.slamp.gamma);
    cfg.slamp.seed = static_cast<unsigned>(toml::integer_or(t, "slamp.seed", cfg.slamp.seed));
    cfg.slamp.width = static_cast<int>(toml::integer_or(t, "slamp.width", cfg.slamp.width));
    cfg.slamp.height = static_cast<int>(toml::integer_or(t, "slamp.height", cfg.slamp.height));
    cfg.slamp.channels =
        static_cast<int>(toml::integer_or(t, "slamp.channels", cfg.slamp.channels));
    if (const auto* v = toml::find(t, "slamp.ts_candidates")) {
        cfg.slamp.ts_candidates.clear();
        for (const auto& e : v->array())
            cfg.slamp.ts_candidates.push_back(static_cast<int>(e.integer()));
    }

    EditConfig& e = cfg.edit.base;
    e.lambda1 = toml::number_or(t, "edit.lambda1", e.lambda1);
    e.lambda2 = toml::number_or(t, "edit.lambda2", e.lambda2);
    e.steps = static_cast<int>(toml::integer_or(t, "edit.steps", e.steps));
    if (const auto* v = toml::find(t, "edit.neutral")) e.neutral = detail::vec3_from(*v);
    if (const auto* v = toml::find(t, "edit.background")) e.background = detail::vec3_from(*v);
    e.update_opacity = toml::boolean_or(t, "edit.update_opacity", e.update_opacity);
    e.lr = toml::number_or(t, "edit.lr", e.lr);
    const std::string opt = toml::string_or(t, "edit.optimizer", "adam");
    if (opt == "adam") e.optimizer = OptimizerMode::Adam;
    else if (opt == "sgd") e.optimizer = OptimizerMode::Sgd;
    else throw ParseError("config: edit.optimizer must be 'adam' or 'sgd'");
    e.condition = toml::string_or(t, "edit.condition", e.condition);
    cfg.edit.provider = toml::string_or(t, "edit.provider", cfg.edit.provider);
    cfg.edit.provider_target = toml::string_or(t, "edit.provider_target", "");
    cfg.edit.seed = static_cast<unsigned>(toml::integer_or(t, "edit.seed", cfg.edit.seed));

    SceneSpec& spec = cfg.synth.scene;
    spec.global_scale = toml::number_or(t, "synth.global_scale", spec.global_scale);
    spec.seed = static_cast<unsigned>(toml::integer_or(t, "synth.seed", spec.seed));
    spec.opacity = toml::number_or(t, "synth.opacity", spec.opacity);
    if (const auto* v = toml::find(t, "synth.background_color"))
        spec.background_color = detail::vec3_from(*v);
    if (const auto* v = toml::find(t, "synth.parts")) {
        for (const auto& entry : v->array()) {
            const toml::Table& pt = entry.table();
            PartSpec part;
            part.name = toml::string_or(pt, "name", "");
            part.primitive =
                detail::primitive_from(toml::string_or(pt, "primitive", "sphere"));
            if (const auto* c = toml::find(pt, "center")) part.center = detail::vec3_from(*c);
            if (const auto* x = toml::find(pt, "extent")) part.extent = detail::vec3_from(*x);
            part.count = static_cast<int>(toml::integer_or(pt, "count", 0));
            if (const auto* c = toml::find(pt, "color")) part.color = detail::vec3_from(*c);
            spec.parts.push_back(std::move(part));
        }
    }
    cfg.synth.ring_cameras =
        static_cast<int>(toml::integer_or(t, "synth.ring_cameras", cfg.synth.ring_cameras));
    cfg.synth.top_cameras =
        static_cast<int>(toml::integer_or(t, "synth.top_cameras", cfg.synth.top_cameras));
    cfg.synth.image_size =
        static_cast<int>(toml::integer_or(t, "synth.image_size", cfg.synth.image_size));

    CorruptionSpec& corr = cfg.synth.corruption;
    corr.label_flip_rate = toml::number_or(t, "corruption.label_flip_rate", 0.0);
    corr.boundary_jitter = toml::number_or(t, "corruption.boundary_jitter", 0.0);
    corr.view_dropout_rate = toml::number_or(t, "corruption.view_dropout_rate", 0.0);
    corr.seed = static_cast<unsigned>(toml::integer_or(t, "corruption.seed", 0));
    if (const auto* v = toml::find(t, "corruption.merge_pairs")) {
        for (const auto& pair : v->array()) {
            const auto& arr = pair.array();
            if (arr.size() != 2) throw ParseError("config: merge pair must hold 2 indices");
            corr.merge_pairs.emplace_back(static_cast<size_t>(arr[0].integer()),
                                          static_cast<size_t>(arr[1].integer()));
        }
    }
    corr.validate();

    if (const char* env = std::getenv("PARTSPLAT_SEED")) {
        const unsigned seed = static_cast<unsigned>(std::strtoul(env, nullptr, 10));
        cfg.galp.base.seed = seed;
        cfg.slamp.seed = seed;
        cfg.edit.seed = seed;
        cfg.synth.scene.seed = seed;
        cfg.synth.corruption.seed = seed;
    }
    return cfg;
}

inline toml::Table run_config_to_toml(const RunConfig& cfg) {
    toml::Table t;
    toml::Table paths;
    paths["scene"] = cfg.paths.scene;
    paths["cameras"] = cfg.paths.cameras;
    paths["palette"] = cfg.paths.palette;
    paths["maps_dir"] = cfg.paths.maps_dir;
    paths["anchors_dir"] = cfg.paths.anchors_dir;
    paths["output_dir"] = cfg.paths.output_dir;
    t["paths"] = std::move(paths);

    toml::Table render;
    render["width"] = cfg.render.width;
    render["height"] = cfg.render.height;
    render["background"] = detail::vec3_to(cfg.render.background);
    t["render"] = std::move(render);

    toml::Table galp;
    galp["steps"] = cfg.galp.base.steps;
    galp["anchor_count"] = cfg.galp.base.anchor_count;
    galp["neighbor_count"] = cfg.galp.base.neighbor_count;
    galp["w_galp"] = cfg.galp.base.w_galp;
    galp["lr"] = cfg.galp.base.lr;
    galp["resample_interval"] = cfg.galp.base.resample_interval;
    galp["seed"] = static_cast<std::int64_t>(cfg.galp.base.seed);
    galp["variance_directions"] = cfg.galp.base.variance_directions;
    galp["anchor_mode"] =
        cfg.galp.base.anchor_mode == AnchorMode::Softness ? "softness" : "random";
    galp["target"] = cfg.galp.target;
    galp["opacity_threshold"] = cfg.galp.opacity_threshold;
    galp["mask2d_threshold"] = cfg.galp.mask2d_threshold;
    t["galp"] = std::move(galp);

    toml::Table slamp;
    slamp["steps"] = static_cast<std::int64_t>(cfg.slamp.schedule.timesteps.size());
    slamp["alpha_base"] = cfg.slamp.schedule.alpha_base;
    slamp["alpha_last"] = cfg.slamp.schedule.alpha_last;
    slamp["t_s"] = cfg.slamp.schedule.t_s;
    slamp["gamma"] = cfg.slamp.gamma;
    slamp["seed"] = static_cast<std::int64_t>(cfg.slamp.seed);
    slamp["width"] = cfg.slamp.width;
    slamp["height"] = cfg.slamp.height;
    slamp["channels"] = cfg.slamp.channels;
    toml::Array ts;
    for (int v : cfg.slamp.ts_candidates) ts.push_back(toml::Value(v));
    slamp["ts_candidates"] = std::move(ts);
    t["slamp"] = std::move(slamp);

    toml::Table edit;
    edit["lambda1"] = cfg.edit.base.lambda1;
    edit["lambda2"] = cfg.edit.base.lambda2;
    edit["steps"] = cfg.edit.base.steps;
    edit["neutral"] = detail::vec3_to(cfg.edit.base.neutral);
    edit["background"] = detail::vec3_to(cfg.edit.base.background);
    edit["update_opacity"] = cfg.edit.base.update_opacity;
    edit["lr"] = cfg.edit.base.lr;
    edit["optimizer"] = cfg.edit.base.optimizer == OptimizerMode::Adam ? "adam" : "sgd";
    edit["condition"] = cfg.edit.base.condition;
    edit["provider"] = cfg.edit.provider;
    edit["provider_target"] = cfg.edit.provider_target;
    edit["seed"] = static_cast<std::int64_t>(cfg.edit.seed);
    t["edit"] = std::move(edit);

    toml::Table synth;
    synth["global_scale"] = cfg.synth.scene.global_scale;
    synth["seed"] = static_cast<std::int64_t>(cfg.synth.scene.seed);
    synth["opacity"] = cfg.synth.scene.opacity;
    synth["background_color"] = detail::vec3_to(cfg.synth.scene.background_color);
    synth["ring_cameras"] = cfg.synth.ring_cameras;
    synth["top_cameras"] = cfg.synth.top_cameras;
    synth["image_size"] = cfg.synth.image_size;
    toml::Array parts;
    for (const PartSpec& p : cfg.synth.scene.parts) {
        toml::Table pt;
        pt["name"] = p.name;
        pt["primitive"] = detail::primitive_to(p.primitive);
        pt["center"] = detail::vec3_to(p.center);
        pt["extent"] = detail::vec3_to(p.extent);
        pt["count"] = p.count;
        pt["color"] = detail::vec3_to(p.color);
        parts.push_back(toml::Value(std::move(pt)));
    }
    synth["parts"] = std::move(parts);
    t["synth"] = std::move(synth);

    toml::Table corruption;
    corruption["label_flip_rate"] = cfg.synth.corruption.label_flip_rate;
    corruption["boundary_jitter"] = cfg.synth.corruption.boundary_jitter;
    corruption["view_dropout_rate"] = cfg.synth.corruption.view_dropout_rate;
    corruption["seed"] = static_cast<std::int64_t>(cfg.synth.corruption.seed);
    toml::Array pairs;
    for (const auto& [a, b] : cfg.synth.corruption.merge_pairs)
        pairs.push_back(toml::Value(toml::Array{
            toml::Value(static_cast<std::int64_t>(a)), toml::Value(static_cast<std::int64_t>(b))}));
    corruption["merge_pairs"] = std::move(pairs);
    t["corruption"] = std::move(corruption);
    return t;
}

inline RunConfig load_run_config(const std::string& path) {
    if (!std::filesystem::exists(path))
        throw ParseError("config: file not found: '" + path + "'");
    return run_config_from_toml(toml::parse_file(path));
}

inline void require_input_path(const std::string& path, const char* what) {
    if (path.empty())
        throw ParseError(std::string("config: missing required path for ") + what);
    if (!std::filesystem::exists(path))
        throw ParseError(std::string("config: ") + what + " path does not exist: '" + path +
                         "'");
}

}  // namespace partsplat::io
