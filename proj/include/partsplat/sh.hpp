#pragma once

// Real spherical harmonics up to degree 3 for view-dependent color and label
// channels. Coefficient blocks are channel-major: block[ch * n + i] with
// n = (degree+1)^2 and i = 0 the DC term. Evaluation adds the conventional
// +0.5 DC offset; sh_eval additionally clamps to [0, 1].

#include <algorithm>
#include <array>
#include <cmath>
#include <span>

#include "partsplat/errors.hpp"
#include "partsplat/linalg.hpp"

namespace partsplat {

inline constexpr int kMaxShDegree = 3;
inline constexpr double kShDcOffset = 0.5;

inline constexpr double kShC0 = 0.28209479177387814;
inline constexpr double kShC1 = 0.4886025119029199;
inline constexpr std::array<double, 5> kShC2 = {1.0925484305920792, -1.0925484305920792,
                                                0.31539156525252005, -1.0925484305920792,
                                                0.5462742152960396};
inline constexpr std::array<double, 7> kShC3 = {-0.5900435899266435, 2.890611442640554,
                                                -0.4570457994644658, 0.3731763325901154,
                                                -0.4570457994644658, 1.445305721320277,
                                                -0.5900435899266435};

inline constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

// -1 when the block length is not 3*(d+1)^2 for a supported degree.
inline int sh_degree_from_block(size_t block_len) {
    for (int d = 0; d <= kMaxShDegree; ++d)
        if (block_len == static_cast<size_t>(3 * sh_coeff_count(d))) return d;
    return -1;
}

// Basis values Y_lm(dir) in the storage order used by the coefficient blocks.
inline void sh_basis(const Vec3& dir, int degree, double* out) {
    const double x = dir.x, y = dir.y, z = dir.z;
    out[0] = kShC0;
    if (degree < 1) return;
    out[1] = -kShC1 * y;
    out[2] = kShC1 * z;
    out[3] = -kShC1 * x;
    if (degree < 2) return;
    const double xx = x * x, yy = y * y, zz = z * z;
    const double xy = x * y, yz = y * z, xz = x * z;
    out[4] = kShC2[0] * xy;
    out[5] = kShC2[1] * yz;
    out[6] = kShC2[2] * (2.0 * zz - xx - yy);
    out[7] = kShC2[3] * xz;
    out[8] = kShC2[4] * (xx - yy);
    if (degree < 3) return;
    out[9] = kShC3[0] * y * (3.0 * xx - yy);
    out[10] = kShC3[1] * xy * z;
    out[11] = kShC3[2] * y * (4.0 * zz - xx - yy);
    out[12] = kShC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    out[13] = kShC3[4] * x * (4.0 * zz - xx - yy);
    out[14] = kShC3[5] * z * (xx - yy);
    out[15] = kShC3[6] * x * (xx - 3.0 * yy);
}

// Per-channel SH value plus the DC offset, no clamp.
inline std::array<double, 3> sh_eval_raw(std::span<const double> block, const Vec3& dir) {
    const int degree = sh_degree_from_block(block.size());
    if (degree < 0) throw StructuralError("sh_eval: coefficient block has invalid length");
    const int n = sh_coeff_count(degree);
    std::array<double, 16> basis{};
    sh_basis(dir, degree, basis.data());
    std::array<double, 3> rgb{};
    for (int c = 0; c < 3; ++c) {
        double acc = 0;
        const double* coeff = block.data() + static_cast<size_t>(c) * n;
        for (int i = 0; i < n; ++i) acc += coeff[i] * basis[static_cast<size_t>(i)];
        rgb[static_cast<size_t>(c)] = acc + kShDcOffset;
    }
    return rgb;
}

inline std::array<double, 3> sh_eval(std::span<const double> block, const Vec3& dir) {
    auto rgb = sh_eval_raw(block, dir);
    for (double& v : rgb) v = std::clamp(v, 0.0, 1.0);
    return rgb;
}

// DC coefficient that makes sh_eval return `value` from any direction when all
// higher orders are zero.
inline double sh_dc_from_value(double value) { return (value - kShDcOffset) / kShC0; }

inline double sh_value_from_dc(double dc) { return dc * kShC0 + kShDcOffset; }

}  // namespace partsplat
