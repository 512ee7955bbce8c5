#pragma once

// Latent/mask tensor files: a 16-byte header (4-byte magic "PSLT", then H, W,
// C as little-endian u32) followed by float32 data, with a JSON sidecar
// (<path>.json) carrying the timestep metadata.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "partsplat/errors.hpp"
#include "partsplat/slamp.hpp"

namespace partsplat::io {

inline constexpr std::uint32_t kLatentMagic = 0x544C5350;  // "PSLT" little-endian

inline void save_latent(const LatentField& latent, const std::string& path) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw ParseError("latent: cannot write '" + path + "'");
    const std::uint32_t header[4] = {kLatentMagic,
                                     static_cast<std::uint32_t>(latent.grid.height),
                                     static_cast<std::uint32_t>(latent.grid.width),
                                     static_cast<std::uint32_t>(latent.grid.channels)};
    file.write(reinterpret_cast<const char*>(header), sizeof(header));
    std::vector<float> buf(latent.grid.data.size());
    for (size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(latent.grid.data[i]);
    file.write(reinterpret_cast<const char*>(buf.data()),
               static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!file) throw ParseError("latent: write failed for '" + path + "'");

    nlohmann::json sidecar;
    sidecar["t"] = latent.t;
    std::ofstream meta(path + ".json");
    meta << sidecar.dump(2) << "\n";
}

inline LatentField load_latent(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw ParseError("latent: cannot open '" + path + "'");
    std::uint32_t header[4];
    if (!file.read(reinterpret_cast<char*>(header), sizeof(header)))
        throw ParseError("latent: truncated header in '" + path + "'");
    if (header[0] != kLatentMagic) throw ParseError("latent: bad magic in '" + path + "'");

    LatentField latent;
    latent.grid = Image(static_cast<int>(header[1]), static_cast<int>(header[2]),
                        static_cast<int>(header[3]));
    std::vector<float> buf(latent.grid.data.size());
    if (!file.read(reinterpret_cast<char*>(buf.data()),
                   static_cast<std::streamsize>(buf.size() * sizeof(float))))
        throw ParseError("latent: truncated data in '" + path + "'");
    for (size_t i = 0; i < buf.size(); ++i) latent.grid.data[i] = buf[i];

    std::ifstream meta(path + ".json");
    if (meta) {
        nlohmann::json sidecar;
        try {
            meta >> sidecar;
            latent.t = sidecar.value("t", 0.0);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("latent: bad sidecar for '" + path + "': " + e.what());
        }
    }
    return latent;
}

}  // namespace partsplat::io
