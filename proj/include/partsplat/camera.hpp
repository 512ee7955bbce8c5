#pragma once

// Pinhole camera with a rigid world-to-camera transform. Camera space is
// x-right, z-forward; a point projects to (fx*X/Z + cx, fy*Y/Z + cy).

#include <cmath>

#include "partsplat/errors.hpp"
#include "partsplat/linalg.hpp"

namespace partsplat {

struct Camera {
    int width = 0;
    int height = 0;
    double fx = 0, fy = 0;
    double cx = 0, cy = 0;
    Mat3 rotation;      // world-to-camera
    Vec3 translation;   // x_cam = R * x_world + t
    double near = 0.01;
    double far = 1000.0;

    void validate() const {
        if (width <= 0 || height <= 0) throw ParameterError("camera: image size must be positive");
        if (fx <= 0 || fy <= 0) throw ParameterError("camera: focal lengths must be positive");
        if (!(near < far)) throw ParameterError("camera: near must be less than far");
        if (rotation.orthonormality_defect() > 1e-6)
            throw ParameterError("camera: rotation is not orthonormal");
    }

    Vec3 to_camera(const Vec3& p) const { return rotation * p + translation; }

    Vec3 center() const {
        const Vec3 t = translation;
        const Mat3 rt = rotation.transposed();
        return rt * Vec3{-t.x, -t.y, -t.z};
    }
};

inline Vec3 view_direction(const Camera& camera, const Vec3& position) {
    const Vec3 d = position - camera.center();
    const double n = norm(d);
    if (n < 1e-12) throw DegenerateError("view_direction: position coincides with camera center");
    return d / n;
}

// Camera at `eye` looking at `target`, proper rotation (det +1).
inline Camera look_at_camera(const Vec3& eye, const Vec3& target, const Vec3& up, int width,
                             int height, double focal, double near, double far) {
    const Vec3 forward = normalized(target - eye);
    const Vec3 right = normalized(cross(up, forward));
    const Vec3 down = cross(forward, right);
    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.fx = cam.fy = focal;
    cam.cx = width * 0.5;
    cam.cy = height * 0.5;
    cam.rotation.m = {right.x, right.y, right.z, down.x, down.y, down.z,
                      forward.x, forward.y, forward.z};
    const Vec3 t = cam.rotation * eye;
    cam.translation = {-t.x, -t.y, -t.z};
    cam.near = near;
    cam.far = far;
    return cam;
}

}  // namespace partsplat
