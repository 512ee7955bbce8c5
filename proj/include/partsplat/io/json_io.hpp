#pragma once

// JSON interchange: camera lists, palettes, 3D masks, IoU reports.

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "partsplat/camera.hpp"
#include "partsplat/errors.hpp"
#include "partsplat/galp.hpp"
#include "partsplat/metrics.hpp"
#include "partsplat/palette.hpp"

namespace partsplat::io {

inline nlohmann::json load_json_file(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw ParseError("json: cannot open '" + path + "'");
    try {
        nlohmann::json j;
        file >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("json: malformed '" + path + "': " + e.what());
    }
}

inline void write_json_file(const nlohmann::json& j, const std::string& path) {
    std::ofstream file(path);
    if (!file) throw ParseError("json: cannot write '" + path + "'");
    file << j.dump(2) << "\n";
}

// Cameras: array of {width, height, fx, fy, cx, cy, near, far,
// world_to_camera: 16 row-major numbers}. Rotations within 1e-3 of orthonormal
// are re-orthonormalized; anything worse is an error.
inline std::vector<Camera> load_cameras(const std::string& path) {
    const nlohmann::json j = load_json_file(path);
    if (!j.is_array()) throw ParseError("cameras: expected a JSON array in '" + path + "'");
    std::vector<Camera> cams;
    cams.reserve(j.size());
    for (const auto& entry : j) {
        Camera cam;
        try {
            cam.width = entry.at("width").get<int>();
            cam.height = entry.at("height").get<int>();
            cam.fx = entry.at("fx").get<double>();
            cam.fy = entry.at("fy").get<double>();
            cam.cx = entry.at("cx").get<double>();
            cam.cy = entry.at("cy").get<double>();
            cam.near = entry.value("near", 0.01);
            cam.far = entry.value("far", 1000.0);
            const auto& m = entry.at("world_to_camera");
            if (!m.is_array() || m.size() != 16)
                throw ParseError("cameras: world_to_camera must hold 16 numbers");
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c)
                    cam.rotation(r, c) = m.at(static_cast<size_t>(4 * r + c)).get<double>();
            cam.translation = {m.at(3).get<double>(), m.at(7).get<double>(),
                               m.at(11).get<double>()};
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("cameras: malformed entry in '" + path + "': " + e.what());
        }
        const double defect = cam.rotation.orthonormality_defect();
        if (std::abs(cam.rotation.det()) < 1e-9)
            throw ParseError("cameras: non-invertible transform in '" + path + "'");
        if (defect > 1e-3)
            throw ParseError("cameras: rotation too far from orthonormal in '" + path + "'");
        if (defect > 1e-6) cam.rotation = cam.rotation.orthonormalized();
        cam.validate();
        cams.push_back(cam);
    }
    return cams;
}

inline void save_cameras(std::span<const Camera> cams, const std::string& path) {
    nlohmann::json j = nlohmann::json::array();
    for (const Camera& cam : cams) {
        nlohmann::json m = nlohmann::json::array();
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) {
                double v;
                if (r < 3 && c < 3) v = cam.rotation(r, c);
                else if (r < 3) v = cam.translation[r];
                else v = c == 3 ? 1.0 : 0.0;
                m.push_back(v);
            }
        j.push_back({{"width", cam.width},
                     {"height", cam.height},
                     {"fx", cam.fx},
                     {"fy", cam.fy},
                     {"cx", cam.cx},
                     {"cy", cam.cy},
                     {"near", cam.near},
                     {"far", cam.far},
                     {"world_to_camera", m}});
    }
    write_json_file(j, path);
}

// Palette: JSON array of {name, rgb: [r, g, b]}.
inline LabelPalette load_palette(const std::string& path) {
    const nlohmann::json j = load_json_file(path);
    if (!j.is_array()) throw ParseError("palette: expected a JSON array in '" + path + "'");
    std::vector<LabelPalette::Label> labels;
    for (const auto& entry : j) {
        try {
            const auto& rgb = entry.at("rgb");
            labels.push_back({entry.at("name").get<std::string>(),
                              Vec3{rgb.at(0).get<double>(), rgb.at(1).get<double>(),
                                   rgb.at(2).get<double>()}});
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("palette: malformed entry in '" + path + "': " + e.what());
        }
    }
    return LabelPalette(std::move(labels));
}

inline void save_palette(const LabelPalette& palette, const std::string& path) {
    nlohmann::json j = nlohmann::json::array();
    for (size_t i = 0; i < palette.size(); ++i)
        j.push_back({{"name", palette[i].name},
                     {"rgb", {palette[i].color.x, palette[i].color.y, palette[i].color.z}}});
    write_json_file(j, path);
}

inline void save_mask3d(const Mask3D& mask, const std::string& target_name,
                        const std::string& path) {
    nlohmann::json j;
    j["target"] = target_name;
    j["assignment"] = mask.assignment;
    nlohmann::json sel = nlohmann::json::array();
    for (char s : mask.selected) sel.push_back(s != 0);
    j["selected"] = sel;
    write_json_file(j, path);
}

inline Mask3D load_mask3d(const std::string& path) {
    const nlohmann::json j = load_json_file(path);
    Mask3D mask;
    try {
        mask.assignment = j.at("assignment").get<std::vector<int>>();
        for (bool b : j.at("selected").get<std::vector<bool>>())
            mask.selected.push_back(b ? 1 : 0);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("mask3d: malformed '" + path + "': " + e.what());
    }
    if (mask.assignment.size() != mask.selected.size())
        throw ParseError("mask3d: assignment/selected length mismatch in '" + path + "'");
    return mask;
}

inline nlohmann::json iou_report_json(const IoUReport& report, const LabelPalette* palette) {
    nlohmann::json per_label = nlohmann::json::array();
    for (size_t i = 0; i < report.per_label.size(); ++i) {
        nlohmann::json entry;
        if (palette && i < palette->size()) entry["label"] = (*palette)[i].name;
        entry["index"] = i;
        if (report.defined[i]) entry["iou"] = report.per_label[i];
        else entry["iou"] = nullptr;
        per_label.push_back(entry);
    }
    return {{"miou", report.miou}, {"per_label", per_label}};
}

}  // namespace partsplat::io
