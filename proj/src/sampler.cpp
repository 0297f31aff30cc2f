#include "dsv/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dsv {

std::pair<LatentGrid, LatentGrid> euler_integrate_joint(const JointVelocityField& velocity,
                                                        LatentGrid z_can, LatentGrid z_tar,
                                                        int steps) {
    require(steps >= 1, "sampler: steps must be >= 1");
    const double dt = 1.0 / steps;
    for (int k = 0; k < steps; ++k) {
        const double t = 1.0 - k * dt;
        const auto [v_can, v_tar] = velocity(z_can, z_tar, t);
        require(v_can.same_shape(z_can) && v_tar.same_shape(z_tar),
                "sampler: velocity shape mismatch");
        for (size_t i = 0; i < z_can.values.size(); ++i) {
            z_can.values[i] -= dt * v_can.values[i];
            z_tar.values[i] -= dt * v_tar.values[i];
        }
        for (double v : z_can.values) {
            if (!std::isfinite(v)) {
                std::ostringstream oss;
                oss << "sampler: non-finite canonical latent after step " << k << " (t=" << t
                    << ")";
                fail_runtime(oss.str());
            }
        }
        for (double v : z_tar.values) {
            if (!std::isfinite(v)) {
                std::ostringstream oss;
                oss << "sampler: non-finite target latent after step " << k << " (t=" << t
                    << ")";
                fail_runtime(oss.str());
            }
        }
    }
    return {std::move(z_can), std::move(z_tar)};
}

GeneratedClips sample(DualStreamModel& model, const ConditionBundle& bundle_can,
                      const ConditionBundle& bundle_tar, const DepthMap& depth0, int steps,
                      uint64_t seed) {
    const ModelConfig& cfg = model.config();
    require(!bundle_can.path.poses.empty() && bundle_can.path.poses[0].is_identity(1e-12),
            "sampler: canonical bundle must carry the identity camera");
    for (const auto& p : bundle_can.path.poses) {
        require(p.is_identity(1e-12), "sampler: canonical bundle must carry the identity camera");
    }
    require(!bundle_tar.trajectory.has_value(),
            "sampler: target bundle must carry an empty trajectory condition");

    const LatentGrid zcam_can = encode_camera(bundle_can, depth0, cfg);
    const LatentGrid zcam_tar = encode_camera(bundle_tar, depth0, cfg);
    const TrajectoryMap* trk_can =
        bundle_can.trajectory.has_value() ? &*bundle_can.trajectory : nullptr;
    const std::optional<int> label =
        bundle_can.label.has_value() ? bundle_can.label : bundle_tar.label;

    LatentGrid init(cfg.latent_frames(), cfg.latent_height(), cfg.latent_width(),
                    cfg.d_video());
    Rng rng(splitmix64(seed ^ 0x5a3317eULL));
    LatentGrid z_can = gaussian_like(init, rng);
    LatentGrid z_tar = gaussian_like(init, rng);

    const auto field = [&](const LatentGrid& a, const LatentGrid& b, double t) {
        return model.infer(a, b, t, &zcam_can, &zcam_tar, trk_can, nullptr, label);
    };
    auto [z0_can, z0_tar] = euler_integrate_joint(field, std::move(z_can), std::move(z_tar),
                                                  steps);

    GeneratedClips out;
    out.target = codec_decode(z0_tar, cfg.patch_t, cfg.patch_s);
    out.canonical = codec_decode(z0_can, cfg.patch_t, cfg.patch_s);
    return out;
}

int inference_track_count(int height, int width) {
    const double scale = static_cast<double>(height) * width / (480.0 * 832.0);
    return std::max(16, static_cast<int>(std::lround(1500.0 * scale)));
}

std::pair<ConditionBundle, ConditionBundle> prepare_user_condition(
    const std::vector<Stroke>& strokes, const DepthMap& depth0,
    const std::vector<std::vector<uint8_t>>& object_masks, const Image& first_frame,
    const CameraPath& camera_program, int d_trk, std::optional<int> label) {
    const int h = depth0.height, w = depth0.width;
    const int frames = static_cast<int>(camera_program.poses.size());

    TrackSet tracks;
    tracks.height = h;
    tracks.width = w;

    const int budget = inference_track_count(h, w);
    const int per_stroke = std::max(1, budget / std::max<int>(1, strokes.size()));

    for (size_t si = 0; si < strokes.size(); ++si) {
        const Stroke& stroke = strokes[si];
        require(static_cast<int>(stroke.points.size()) == frames,
                "stroke " + std::to_string(si) + ": length must equal the frame count");
        const Vec2 anchor = stroke.points[0];
        if (anchor.x < 0 || anchor.x >= w || anchor.y < 0 || anchor.y >= h) {
            fail_invalid("stroke " + std::to_string(si) + ": anchor outside the image");
        }

        // The stroked object: the mask containing the anchor pixel.
        const int ax = static_cast<int>(std::lround(anchor.x));
        const int ay = static_cast<int>(std::lround(anchor.y));
        int object = -1;
        for (size_t mi = 0; mi < object_masks.size(); ++mi) {
            if (object_masks[mi][static_cast<size_t>(ay) * w + ax]) {
                object = static_cast<int>(mi);
                break;
            }
        }
        if (object < 0) {
            fail_invalid("stroke " + std::to_string(si) + ": anchor hits no object mask");
        }

        // Replicate the stroke displacement over the mask pixels, subsampled
        // evenly to the per-stroke budget.
        std::vector<Vec2> mask_pixels;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (object_masks[object][static_cast<size_t>(y) * w + x])
                    mask_pixels.push_back({static_cast<double>(x), static_cast<double>(y)});
        require(!mask_pixels.empty(), "stroke " + std::to_string(si) + ": empty object mask");

        const size_t stride = std::max<size_t>(1, mask_pixels.size() / per_stroke);
        for (size_t pi = 0; pi < mask_pixels.size(); pi += stride) {
            std::vector<Vec2> pos(frames);
            std::vector<uint8_t> vis(frames, 1);
            for (int t = 0; t < frames; ++t) {
                pos[t] = mask_pixels[pi] + (stroke.points[t] - stroke.points[0]);
                if (pos[t].x < 0 || pos[t].x >= w || pos[t].y < 0 || pos[t].y >= h) {
                    vis[t] = t == 0 ? 1 : 0;
                    pos[t].x = std::clamp(pos[t].x, 0.0, w - 1.0);
                    pos[t].y = std::clamp(pos[t].y, 0.0, h - 1.0);
                }
            }
            tracks.push_track(std::move(pos), std::move(vis), object, stroke.role);
        }
    }

    // Occlusion-aware masking from the first-frame depth, then rasterize.
    // No strokes at all is valid: unconditional motion via the zero grid.
    ConditionBundle canonical;
    canonical.first_frame = first_frame;
    canonical.path.intrinsics = camera_program.intrinsics;
    canonical.path.poses.assign(frames, CameraPose::identity());
    if (tracks.empty()) {
        canonical.trajectory = TrajectoryMap(frames, h, w, d_trk);
    } else {
        tracks.visible = occlusion_mask(tracks, depth0);
        canonical.trajectory = rasterize(tracks, d_trk);
    }
    canonical.label = label;

    ConditionBundle target;
    target.first_frame = first_frame;
    target.path = camera_program;
    target.label = label;
    return {std::move(canonical), std::move(target)};
}

}  // namespace dsv
