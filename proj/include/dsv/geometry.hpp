#ifndef DSV_GEOMETRY_HPP
#define DSV_GEOMETRY_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "dsv/error.hpp"
#include "dsv/linalg.hpp"
#include "dsv/video.hpp"

namespace dsv {

struct TrackSet;  // tracks.hpp

// Shared pinhole intrinsics, constant across a clip.
struct CameraIntrinsics {
    double fx = 0.0, fy = 0.0;
    double cx = 0.0, cy = 0.0;
    int width = 0, height = 0;

    void validate() const;
};

// World-to-camera rigid pose: x_cam = rotation * x_world + translation.
// Frame 0 defines the world frame, so the first pose of every path is the
// identity.
struct CameraPose {
    Mat3 rotation;
    Vec3 translation;

    static CameraPose identity() { return CameraPose{}; }

    bool is_identity(double tol = 0.0) const;
    void validate() const;  // orthonormal within 1e-6, det +1 within 1e-6

    Vec3 apply(const Vec3& world) const { return rotation * world + translation; }
    Vec3 apply_inverse(const Vec3& cam) const {
        return rotation.transposed() * (cam - translation);
    }
    Vec3 center() const { return rotation.transposed() * (translation * -1.0); }
};

struct CameraPath {
    std::vector<CameraPose> poses;
    CameraIntrinsics intrinsics;

    int frames() const { return static_cast<int>(poses.size()); }
};

// Positive metric depths with an explicit validity grid.
struct DepthMap {
    int height = 0, width = 0;
    std::vector<double> values;
    std::vector<uint8_t> valid;

    DepthMap() = default;
    DepthMap(int h, int w)
        : height(h),
          width(w),
          values(static_cast<size_t>(h) * w, 0.0),
          valid(static_cast<size_t>(h) * w, 0) {}

    double& at(int y, int x) { return values[static_cast<size_t>(y) * width + x]; }
    double at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }
    bool is_valid(int y, int x) const { return valid[static_cast<size_t>(y) * width + x] != 0; }
    void set(int y, int x, double d) {
        values[static_cast<size_t>(y) * width + x] = d;
        valid[static_cast<size_t>(y) * width + x] = 1;
    }
};

// pixel + depth -> camera-frame point (d*(u-cx)/fx, d*(v-cy)/fy, d).
Vec3 unproject(const CameraIntrinsics& intr, const Vec2& pixel, double depth);

// camera-frame point -> pixel; throws behind-camera for z <= 0. May land
// outside the image bounds; clipping is the caller's business.
Vec2 project(const CameraIntrinsics& intr, const Vec3& point);

// Bilinear depth sample at a fractional position, skipping invalid texels
// (weights renormalized over the valid neighbors). Empty optional when no
// valid neighbor exists.
std::optional<double> sample_depth(const DepthMap& depth, const Vec2& pos);

struct CanonicalTrack {
    std::vector<Vec2> points;       // per frame, frame-0 image plane
    std::vector<uint8_t> visible;   // behind-camera reprojections get masked here
};

// Lift each visible step with its depth, map through pose_0 * pose_u^-1, and
// project into the frame-0 image plane. Invisible input steps pass through
// unmodified and stay flagged.
CanonicalTrack canonicalize_track(const std::vector<Vec2>& track,
                                  const std::vector<double>& depths,
                                  const std::vector<uint8_t>& visible,
                                  const CameraPath& path);

struct WarpResult {
    Image image;                  // H x W x 3, zero-filled holes
    std::vector<uint8_t> valid;   // H x W hit mask
};

// Forward-splat the first frame through unproject -> rigid transform ->
// project with z-buffering. Throws empty-warp when nothing lands in frame.
WarpResult warp_first_frame(const Image& image, const DepthMap& depth0,
                            const CameraIntrinsics& intr, const CameraPose& target_pose);

// Per-track per-frame visibility from first-frame depth ordering: where steps
// of different objects land in the same pixel, only the object with the
// smallest frame-0 depth survives (ties: lower object id).
std::vector<std::vector<uint8_t>> occlusion_mask(const TrackSet& tracks,
                                                 const DepthMap& depth0);

}  // namespace dsv

#endif
