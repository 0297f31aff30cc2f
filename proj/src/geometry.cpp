#include "dsv/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "dsv/tracks.hpp"

namespace dsv {

void CameraIntrinsics::validate() const {
    require(fx > 0.0 && fy > 0.0, "intrinsics: focal lengths must be positive");
    require(cx >= 0.0 && cx < width, "intrinsics: cx outside image");
    require(cy >= 0.0 && cy < height, "intrinsics: cy outside image");
    require(width > 0 && height > 0, "intrinsics: empty image");
}

bool CameraPose::is_identity(double tol) const {
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (std::fabs(rotation(i, j) - (i == j ? 1.0 : 0.0)) > tol) return false;
    return std::fabs(translation.x) <= tol && std::fabs(translation.y) <= tol &&
           std::fabs(translation.z) <= tol;
}

void CameraPose::validate() const {
    const Mat3 rtr = rotation.transposed() * rotation;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const double want = i == j ? 1.0 : 0.0;
            require(std::fabs(rtr(i, j) - want) <= 1e-6, "pose: rotation not orthonormal");
        }
    require(std::fabs(rotation.det() - 1.0) <= 1e-6, "pose: rotation determinant != 1");
}

Mat3 orthonormalize_rotation(const Mat3& m) {
    // R = M (MᵀM)^(-1/2), eigendecomposition route.
    Mat3 mtm = m.transposed() * m;
    std::array<double, 9> a;
    for (int i = 0; i < 9; ++i) a[i] = mtm.m[i];
    std::array<double, 3> evals;
    std::array<double, 9> evecs;
    jacobi_eigen_sym<3>(a, evals, evecs);

    // R = U Vᵀ; a reflection flips the weakest singular direction (k = 0,
    // eigenvalues ascending) so det(R) = +1 either way.
    const double flip = m.det() < 0.0 ? -1.0 : 1.0;
    Mat3 inv_sqrt;
    inv_sqrt.m.fill(0.0);
    for (int k = 0; k < 3; ++k) {
        const double lam = std::max(evals[k], 1e-300);
        const double s = (k == 0 ? flip : 1.0) / std::sqrt(lam);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                inv_sqrt(i, j) += s * evecs[i * 3 + k] * evecs[j * 3 + k];
    }
    return m * inv_sqrt;
}

Vec3 unproject(const CameraIntrinsics& intr, const Vec2& pixel, double depth) {
    if (!(depth > 0.0) || !std::isfinite(depth)) {
        fail_invalid("unproject: depth must be positive and finite");
    }
    return {depth * (pixel.x - intr.cx) / intr.fx, depth * (pixel.y - intr.cy) / intr.fy,
            depth};
}

Vec2 project(const CameraIntrinsics& intr, const Vec3& point) {
    if (!(point.z > 0.0)) {
        fail_invalid("project: point behind camera");
    }
    return {intr.fx * point.x / point.z + intr.cx, intr.fy * point.y / point.z + intr.cy};
}

std::optional<double> sample_depth(const DepthMap& depth, const Vec2& pos) {
    const int x0 = static_cast<int>(std::floor(pos.x));
    const int y0 = static_cast<int>(std::floor(pos.y));
    const double ax = pos.x - x0;
    const double ay = pos.y - y0;

    double acc = 0.0, wsum = 0.0;
    for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
            const int x = x0 + dx;
            const int y = y0 + dy;
            if (x < 0 || x >= depth.width || y < 0 || y >= depth.height) continue;
            if (!depth.is_valid(y, x)) continue;
            const double w = (dx ? ax : 1.0 - ax) * (dy ? ay : 1.0 - ay);
            acc += w * depth.at(y, x);
            wsum += w;
        }
    }
    if (wsum <= 0.0) return std::nullopt;
    return acc / wsum;
}

CanonicalTrack canonicalize_track(const std::vector<Vec2>& track,
                                  const std::vector<double>& depths,
                                  const std::vector<uint8_t>& visible,
                                  const CameraPath& path) {
    const size_t n = track.size();
    require(depths.size() == n && visible.size() == n, "canonicalize: length mismatch");
    require(path.poses.size() == n, "canonicalize: track length != path length");

    CanonicalTrack out;
    out.points = track;
    out.visible = visible;

    const CameraPose& pose0 = path.poses.empty() ? CameraPose{} : path.poses[0];

    for (size_t u = 0; u < n; ++u) {
        if (!visible[u]) continue;  // pass through unmodified
        const Vec3 cam_u = unproject(path.intrinsics, track[u], depths[u]);
        const Vec3 world = path.poses[u].apply_inverse(cam_u);
        const Vec3 cam_0 = pose0.apply(world);
        if (!(cam_0.z > 0.0)) {
            out.visible[u] = 0;  // behind the frame-0 camera: masked, not an error
            continue;
        }
        out.points[u] = project(path.intrinsics, cam_0);
    }
    return out;
}

WarpResult warp_first_frame(const Image& image, const DepthMap& depth0,
                            const CameraIntrinsics& intr, const CameraPose& target_pose) {
    require(image.height == depth0.height && image.width == depth0.width,
            "warp: image/depth size mismatch");
    const int h = image.height, w = image.width;

    WarpResult out;
    out.image = Image(h, w, 3);
    out.valid.assign(static_cast<size_t>(h) * w, 0);
    std::vector<double> zbuf(static_cast<size_t>(h) * w,
                             std::numeric_limits<double>::infinity());

    bool any_valid_depth = false;
    int hits = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!depth0.is_valid(y, x)) continue;
            any_valid_depth = true;
            const Vec3 p = unproject(intr, {static_cast<double>(x), static_cast<double>(y)},
                                     depth0.at(y, x));
            const Vec3 q = target_pose.apply(p);  // world frame == frame-0 camera frame
            if (!(q.z > 0.0)) continue;
            const Vec2 uv = project(intr, q);
            const int tx = static_cast<int>(std::lround(uv.x));
            const int ty = static_cast<int>(std::lround(uv.y));
            if (tx < 0 || tx >= w || ty < 0 || ty >= h) continue;
            const size_t idx = static_cast<size_t>(ty) * w + tx;
            if (q.z < zbuf[idx]) {
                zbuf[idx] = q.z;
                for (int c = 0; c < 3; ++c) out.image.at(ty, tx, c) = image.at(y, x, c);
                if (!out.valid[idx]) {
                    out.valid[idx] = 1;
                    ++hits;
                }
            }
        }
    }

    if (!any_valid_depth) fail_invalid("warp: depth map has no valid entries");
    if (hits == 0) fail_invalid("warp: no source pixel lands in the target frame");
    return out;
}

std::vector<std::vector<uint8_t>> occlusion_mask(const TrackSet& tracks,
                                                 const DepthMap& depth0) {
    const int n = tracks.count();
    const int t_frames = tracks.frames();

    std::vector<std::vector<uint8_t>> vis = tracks.visible;

    // Frame-0 depth per object, sampled at each track's frame-0 position;
    // an object's depth is the minimum over its tracks (front surface).
    std::map<int, double> object_depth;
    for (int i = 0; i < n; ++i) {
        const auto d = sample_depth(depth0, tracks.positions[i][0]);
        if (!d) continue;
        auto it = object_depth.find(tracks.object_id[i]);
        if (it == object_depth.end() || *d < it->second) object_depth[tracks.object_id[i]] = *d;
    }

    struct Entry {
        int track;
        int object;
    };

    for (int t = 0; t < t_frames; ++t) {
        std::map<std::pair<int, int>, std::vector<Entry>> cells;
        for (int i = 0; i < n; ++i) {
            if (!tracks.visible[i][t]) continue;
            const Vec2& p = tracks.positions[i][t];
            const int px = std::clamp(static_cast<int>(std::lround(p.x)), 0, tracks.width - 1);
            const int py = std::clamp(static_cast<int>(std::lround(p.y)), 0, tracks.height - 1);
            cells[{py, px}].push_back({i, tracks.object_id[i]});
        }
        for (const auto& [cell, entries] : cells) {
            bool multi_object = false;
            for (const auto& e : entries)
                if (e.object != entries[0].object) multi_object = true;
            if (!multi_object) continue;

            int winner = entries[0].object;
            double best = std::numeric_limits<double>::infinity();
            for (const auto& e : entries) {
                const auto it = object_depth.find(e.object);
                const double d =
                    it == object_depth.end() ? std::numeric_limits<double>::infinity() : it->second;
                if (d < best || (d == best && e.object < winner)) {
                    best = d;
                    winner = e.object;
                }
            }
            for (const auto& e : entries)
                if (e.object != winner) vis[e.track][t] = 0;
        }
    }
    return vis;
}

}  // namespace dsv
