#pragma once

// Binary little-endian PLY with the standard splat vertex layout
// (x,y,z, f_dc_0..2, f_rest_0..44, opacity, scale_0..2, rot_0..3), an optional
// label extension (label_dc_0..2, label_rest_0..44) and an optional gt_part
// integer. Properties this library does not interpret are carried through
// verbatim. The label extension is written after the standard properties so
// stock splat viewers still open the files.

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "partsplat/errors.hpp"
#include "partsplat/scene.hpp"

namespace partsplat::io {

inline constexpr int kPlyShRestCount = 45;  // 3 channels x 15 higher-order coeffs (degree 3)

struct PlyExtraProperty {
    std::string name;
    std::string type;                 // PLY type token, e.g. "float"
    std::vector<unsigned char> data;  // per-vertex values, packed
};

struct PlyScene {
    GaussianScene scene;
    std::vector<PlyExtraProperty> extras;
};

namespace detail {

inline size_t ply_type_size(const std::string& type) {
    if (type == "char" || type == "int8" || type == "uchar" || type == "uint8") return 1;
    if (type == "short" || type == "int16" || type == "ushort" || type == "uint16") return 2;
    if (type == "int" || type == "int32" || type == "uint" || type == "uint32" ||
        type == "float" || type == "float32")
        return 4;
    if (type == "double" || type == "float64") return 8;
    return 0;
}

inline std::string sh_property_name(const char* prefix, int channel, int rest_index) {
    std::ostringstream os;
    if (rest_index < 0)
        os << prefix << "_dc_" << channel;
    else
        os << prefix << "_rest_" << (channel * 15 + rest_index);
    return os.str();
}

}  // namespace detail

inline PlyScene load_ply(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw ParseError("ply: cannot open '" + path + "'");
    std::vector<char> bytes((std::istreambuf_iterator<char>(file)),
                            std::istreambuf_iterator<char>());

    // Header: newline-delimited text up to "end_header".
    size_t pos = 0;
    auto next_line = [&]() -> std::string {
        const size_t start = pos;
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        if (pos >= bytes.size())
            throw ParseError("ply: header not terminated (byte offset " +
                             std::to_string(start) + ")");
        std::string line(bytes.data() + start, pos - start);
        ++pos;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };

    if (next_line() != "ply") throw ParseError("ply: missing magic at byte offset 0");
    bool end_seen = false;
    bool format_seen = false;
    size_t vertex_count = 0;
    bool in_vertex_element = false;
    struct Property {
        std::string type, name;
        size_t offset = 0, size = 0;
    };
    std::vector<Property> props;
    size_t stride = 0;

    while (pos < bytes.size()) {
        const size_t line_offset = pos;
        const std::string line = next_line();
        if (line == "end_header") {
            end_seen = true;
            break;
        }
        std::istringstream is(line);
        std::string word;
        is >> word;
        if (word == "comment" || word.empty()) continue;
        if (word == "format") {
            std::string fmt, version;
            is >> fmt >> version;
            if (fmt != "binary_little_endian")
                throw ParseError("ply: unsupported format '" + fmt + "' at byte offset " +
                                 std::to_string(line_offset));
            format_seen = true;
        } else if (word == "element") {
            std::string name;
            size_t count = 0;
            is >> name >> count;
            if (name != "vertex")
                throw ParseError("ply: unsupported element '" + name + "' at byte offset " +
                                 std::to_string(line_offset));
            vertex_count = count;
            in_vertex_element = true;
        } else if (word == "property") {
            if (!in_vertex_element)
                throw ParseError("ply: property outside an element at byte offset " +
                                 std::to_string(line_offset));
            Property p;
            is >> p.type >> p.name;
            if (p.type == "list")
                throw ParseError("ply: list properties are not supported (byte offset " +
                                 std::to_string(line_offset) + ")");
            p.size = detail::ply_type_size(p.type);
            if (p.size == 0)
                throw ParseError("ply: unknown property type '" + p.type +
                                 "' at byte offset " + std::to_string(line_offset));
            p.offset = stride;
            stride += p.size;
            props.push_back(std::move(p));
        } else {
            throw ParseError("ply: unexpected header line '" + line + "' at byte offset " +
                             std::to_string(line_offset));
        }
    }
    if (!end_seen) throw ParseError("ply: missing end_header");
    if (!format_seen) throw ParseError("ply: missing format line");

    const size_t data_start = pos;
    if (bytes.size() - data_start < vertex_count * stride)
        throw ParseError("ply: truncated data, expected " +
                         std::to_string(vertex_count * stride) + " bytes after offset " +
                         std::to_string(data_start));

    std::map<std::string, const Property*> by_name;
    for (const auto& p : props) by_name[p.name] = &p;

    auto require_float = [&](const std::string& name) -> const Property* {
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw ParseError("ply: missing mandatory property '" + name + "'");
        if (it->second->type != "float" && it->second->type != "float32")
            throw ParseError("ply: property '" + name + "' must be float");
        return it->second;
    };
    auto find_optional = [&](const std::string& name) -> const Property* {
        auto it = by_name.find(name);
        return it == by_name.end() ? nullptr : it->second;
    };

    std::array<const Property*, 3> p_pos = {require_float("x"), require_float("y"),
                                            require_float("z")};
    std::array<const Property*, 3> p_scale = {require_float("scale_0"),
                                              require_float("scale_1"),
                                              require_float("scale_2")};
    std::array<const Property*, 4> p_rot = {require_float("rot_0"), require_float("rot_1"),
                                            require_float("rot_2"), require_float("rot_3")};
    const Property* p_opacity = require_float("opacity");
    std::vector<const Property*> p_color, p_label;
    bool has_label = find_optional("label_dc_0") != nullptr;
    for (int c = 0; c < 3; ++c) {
        p_color.push_back(require_float(detail::sh_property_name("f", c, -1)));
        if (has_label)
            p_label.push_back(require_float(detail::sh_property_name("label", c, -1)));
    }
    for (int c = 0; c < 3; ++c)
        for (int r = 0; r < 15; ++r) {
            p_color.push_back(require_float(detail::sh_property_name("f", c, r)));
            if (has_label)
                p_label.push_back(require_float(detail::sh_property_name("label", c, r)));
        }
    const Property* p_gt = find_optional("gt_part");
    if (p_gt && detail::ply_type_size(p_gt->type) != 4)
        throw ParseError("ply: gt_part must be a 4-byte integer");

    std::vector<char> known(props.size(), 0);
    auto mark = [&](const Property* p) {
        known[static_cast<size_t>(p - props.data())] = 1;
    };
    for (auto* p : p_pos) mark(p);
    for (auto* p : p_scale) mark(p);
    for (auto* p : p_rot) mark(p);
    mark(p_opacity);
    for (auto* p : p_color) mark(p);
    for (auto* p : p_label) mark(p);
    if (p_gt) mark(p_gt);

    PlyScene out;
    GaussianScene& scene = out.scene;
    scene.resize(vertex_count);
    if (p_gt) scene.gt_part.resize(vertex_count);

    auto read_float = [&](size_t vertex, const Property* p) {
        float v;
        std::memcpy(&v, bytes.data() + data_start + vertex * stride + p->offset, 4);
        return static_cast<double>(v);
    };

    // The SH property order (dc_0..2 then rest grouped 15 per channel) maps
    // directly onto the channel-major coefficient blocks.
    const int nc_color = sh_coeff_count(scene.color_sh_degree);
    const int nc_label = sh_coeff_count(scene.label_sh_degree);
    for (size_t v = 0; v < vertex_count; ++v) {
        scene.positions[v] = {read_float(v, p_pos[0]), read_float(v, p_pos[1]),
                              read_float(v, p_pos[2])};
        scene.log_scales[v] = {read_float(v, p_scale[0]), read_float(v, p_scale[1]),
                               read_float(v, p_scale[2])};
        scene.rotations[v] = {read_float(v, p_rot[0]), read_float(v, p_rot[1]),
                              read_float(v, p_rot[2]), read_float(v, p_rot[3])};
        scene.opacity_logits[v] = read_float(v, p_opacity);
        auto color = scene.color_block(v);
        auto label = scene.label_block(v);
        for (int c = 0; c < 3; ++c) {
            color[static_cast<size_t>(c * nc_color)] = read_float(v, p_color[static_cast<size_t>(c)]);
            if (has_label)
                label[static_cast<size_t>(c * nc_label)] =
                    read_float(v, p_label[static_cast<size_t>(c)]);
        }
        for (int c = 0; c < 3; ++c)
            for (int r = 0; r < 15; ++r) {
                const size_t src = static_cast<size_t>(3 + c * 15 + r);
                color[static_cast<size_t>(c * nc_color + 1 + r)] = read_float(v, p_color[src]);
                if (has_label)
                    label[static_cast<size_t>(c * nc_label + 1 + r)] =
                        read_float(v, p_label[src]);
            }
        if (p_gt) {
            std::int32_t g;
            std::memcpy(&g, bytes.data() + data_start + v * stride + p_gt->offset, 4);
            scene.gt_part[v] = g;
        }
    }

    for (size_t pi = 0; pi < props.size(); ++pi) {
        if (known[pi]) continue;
        PlyExtraProperty extra;
        extra.name = props[pi].name;
        extra.type = props[pi].type;
        extra.data.resize(vertex_count * props[pi].size);
        for (size_t v = 0; v < vertex_count; ++v)
            std::memcpy(extra.data.data() + v * props[pi].size,
                        bytes.data() + data_start + v * stride + props[pi].offset,
                        props[pi].size);
        out.extras.push_back(std::move(extra));
    }
    return out;
}

inline void save_ply(const GaussianScene& scene, const std::string& path,
                     std::span<const PlyExtraProperty> extras = {}) {
    const size_t n = scene.size();
    for (const auto& e : extras) {
        if (detail::ply_type_size(e.type) == 0)
            throw ParameterError("ply: extra property '" + e.name + "' has unknown type");
        if (e.data.size() != n * detail::ply_type_size(e.type))
            throw ParameterError("ply: extra property '" + e.name + "' has wrong size");
    }
    if (scene.color_sh_degree != 3 || scene.label_sh_degree != 3)
        throw ParameterError("ply: only degree-3 SH blocks are serializable");

    std::ofstream file(path, std::ios::binary);
    if (!file) throw ParseError("ply: cannot write '" + path + "'");

    std::ostringstream header;
    header << "ply\nformat binary_little_endian 1.0\n";
    header << "element vertex " << n << "\n";
    auto prop = [&](const char* type, const std::string& name) {
        header << "property " << type << " " << name << "\n";
    };
    prop("float", "x");
    prop("float", "y");
    prop("float", "z");
    for (int c = 0; c < 3; ++c) prop("float", detail::sh_property_name("f", c, -1));
    for (int c = 0; c < 3; ++c)
        for (int r = 0; r < 15; ++r) prop("float", detail::sh_property_name("f", c, r));
    prop("float", "opacity");
    for (int i = 0; i < 3; ++i) prop("float", "scale_" + std::to_string(i));
    for (int i = 0; i < 4; ++i) prop("float", "rot_" + std::to_string(i));
    for (int c = 0; c < 3; ++c) prop("float", detail::sh_property_name("label", c, -1));
    for (int c = 0; c < 3; ++c)
        for (int r = 0; r < 15; ++r) prop("float", detail::sh_property_name("label", c, r));
    const bool has_gt = scene.gt_part.size() == n && n > 0;
    if (has_gt) prop("int", "gt_part");
    for (const auto& e : extras) prop(e.type.c_str(), e.name);
    header << "end_header\n";
    const std::string header_str = header.str();
    file.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));

    std::vector<unsigned char> row;
    auto push_float = [&](double v) {
        const float f = static_cast<float>(v);
        unsigned char b[4];
        std::memcpy(b, &f, 4);
        row.insert(row.end(), b, b + 4);
    };
    const int nc = sh_coeff_count(3);
    for (size_t v = 0; v < n; ++v) {
        row.clear();
        push_float(scene.positions[v].x);
        push_float(scene.positions[v].y);
        push_float(scene.positions[v].z);
        const auto color = scene.color_block(v);
        const auto label = scene.label_block(v);
        for (int c = 0; c < 3; ++c) push_float(color[static_cast<size_t>(c * nc)]);
        for (int c = 0; c < 3; ++c)
            for (int r = 0; r < 15; ++r) push_float(color[static_cast<size_t>(c * nc + 1 + r)]);
        push_float(scene.opacity_logits[v]);
        push_float(scene.log_scales[v].x);
        push_float(scene.log_scales[v].y);
        push_float(scene.log_scales[v].z);
        push_float(scene.rotations[v].w);
        push_float(scene.rotations[v].x);
        push_float(scene.rotations[v].y);
        push_float(scene.rotations[v].z);
        for (int c = 0; c < 3; ++c) push_float(label[static_cast<size_t>(c * nc)]);
        for (int c = 0; c < 3; ++c)
            for (int r = 0; r < 15; ++r) push_float(label[static_cast<size_t>(c * nc + 1 + r)]);
        if (has_gt) {
            const std::int32_t g = scene.gt_part[v];
            unsigned char b[4];
            std::memcpy(b, &g, 4);
            row.insert(row.end(), b, b + 4);
        }
        for (const auto& e : extras) {
            const size_t sz = detail::ply_type_size(e.type);
            row.insert(row.end(), e.data.data() + v * sz, e.data.data() + (v + 1) * sz);
        }
        file.write(reinterpret_cast<const char*>(row.data()),
                   static_cast<std::streamsize>(row.size()));
    }
    if (!file) throw ParseError("ply: write failed for '" + path + "'");
}

}  // namespace partsplat::io
