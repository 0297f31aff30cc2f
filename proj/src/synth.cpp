#include "dsv/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace dsv {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kMaxStepRotationDeg = 2.0;
constexpr double kMaxStepTranslationFrac = 0.02;
constexpr double kPassiveDamping = 0.9;
constexpr double kFiducialSigmaPx = 1.6;
constexpr double kFiducialMarginPx = 4.5;

const std::array<std::array<double, 3>, 4> kFiducialColors = {{
    {1.00, 0.05, 0.95},  // magenta
    {0.05, 0.95, 1.00},  // cyan
    {1.00, 0.95, 0.05},  // yellow
    {0.10, 0.35, 1.00},  // blue
}};

bool rects_overlap(const Vec2& ca, const ObjectSpec& a, const Vec2& cb, const ObjectSpec& b,
                   double margin = 0.0) {
    return std::fabs(ca.x - cb.x) <= a.half_w + b.half_w + margin &&
           std::fabs(ca.y - cb.y) <= a.half_h + b.half_h + margin;
}

// Contact normal = axis of least penetration, signed from a toward b.
Vec2 contact_normal(const Vec2& ca, const ObjectSpec& a, const Vec2& cb, const ObjectSpec& b) {
    const double pen_x = a.half_w + b.half_w - std::fabs(ca.x - cb.x);
    const double pen_y = a.half_h + b.half_h - std::fabs(ca.y - cb.y);
    if (pen_x <= pen_y) {
        return {cb.x >= ca.x ? 1.0 : -1.0, 0.0};
    }
    return {0.0, cb.y >= ca.y ? 1.0 : -1.0};
}

}  // namespace

const char* to_string(Script s) {
    switch (s) {
        case Script::none: return "none";
        case Script::push: return "push";
        case Script::pull: return "pull";
        case Script::collide: return "collide";
    }
    return "?";
}

const char* to_string(CameraKind k) {
    switch (k) {
        case CameraKind::static_cam: return "static";
        case CameraKind::orbit: return "orbit";
        case CameraKind::pan: return "pan";
        case CameraKind::zoom: return "zoom";
        case CameraKind::mixed: return "mixed";
    }
    return "?";
}

const char* to_string(SupervisionMode m) {
    switch (m) {
        case SupervisionMode::paired: return "paired";
        case SupervisionMode::static_dup: return "static-dup";
        case SupervisionMode::single_dynamic: return "single-dynamic";
    }
    return "?";
}

void SceneSpec::validate() const {
    intrinsics.validate();
    require(frames >= 1, "scene: frames >= 1");
    require(background_depth > 0.0, "scene: background depth must be positive");
    int active_count = 0;
    std::set<double> depths;
    for (const auto& o : objects) {
        require(o.depth > 0.0 && o.depth < background_depth,
                "scene: object depth outside (0, background)");
        require(o.half_w > 0.0 && o.half_h > 0.0, "scene: degenerate object extents");
        if (o.role == Role::active) ++active_count;
        depths.insert(o.depth);
    }
    require(depths.size() == objects.size(), "scene: object depths must be distinct");
    if (script != Script::none) {
        require(active_count == 1, "scene: interaction scripts need exactly one active object");
    }
    // Start poses inside the view frustum of the identity camera.
    for (const auto& o : objects) {
        const double half_view_x = (intrinsics.cx / intrinsics.fx) * o.depth;
        const double half_view_y = (intrinsics.cy / intrinsics.fy) * o.depth;
        require(std::fabs(o.x0) + o.half_w <= half_view_x &&
                    std::fabs(o.y0) + o.half_h <= half_view_y,
                "scene: object start pose outside view frustum");
    }
}

WorldTrajectory simulate(const SceneSpec& spec) {
    const int t_frames = spec.frames;
    const int n = static_cast<int>(spec.objects.size());

    WorldTrajectory world(t_frames, std::vector<Vec2>(n));
    for (int k = 0; k < n; ++k) world[0][k] = {spec.objects[k].x0, spec.objects[k].y0};

    int active = -1;
    for (int k = 0; k < n; ++k)
        if (spec.objects[k].role == Role::active) active = k;

    Vec2 active_vel{0.0, 0.0};
    if (spec.script != Script::none && active >= 0) {
        active_vel = Vec2{spec.motion_dir_x, spec.motion_dir_y} * spec.active_speed;
    }

    std::vector<Vec2> passive_vel(n, Vec2{0.0, 0.0});
    std::vector<bool> moving(n, false);
    bool active_stopped = false;

    for (int t = 1; t < t_frames; ++t) {
        world[t] = world[t - 1];

        if (active >= 0 && !active_stopped) {
            world[t][active] = world[t - 1][active] + active_vel;
        }

        for (int k = 0; k < n; ++k) {
            if (k == active) continue;
            if (moving[k]) {
                world[t][k] = world[t][k] + passive_vel[k];
                passive_vel[k] = passive_vel[k] * kPassiveDamping;
            }
        }

        // First contact activates a passive object. Push and collide transfer
        // the contact-normal component of the active velocity; pull drags the
        // adjacent object along with the full velocity. The pull contact test
        // is inflated by one step so the departing active still counts as
        // touching.
        if (active >= 0 && spec.script != Script::none) {
            const double margin = spec.script == Script::pull ? spec.active_speed + 0.05 : 0.0;
            for (int k = 0; k < n; ++k) {
                if (k == active || moving[k]) continue;
                if (!rects_overlap(world[t][active], spec.objects[active], world[t][k],
                                   spec.objects[k], margin))
                    continue;
                if (spec.script == Script::pull) {
                    passive_vel[k] = active_vel;
                } else {
                    const Vec2 normal = contact_normal(world[t][active], spec.objects[active],
                                                       world[t][k], spec.objects[k]);
                    const double along = active_vel.x * normal.x + active_vel.y * normal.y;
                    passive_vel[k] = normal * std::max(along, 0.0);
                }
                moving[k] = true;
                if (spec.script == Script::collide) active_stopped = true;
            }
        }
    }
    return world;
}

std::vector<Fiducial> fiducials(const SceneSpec& spec) {
    const auto& in = spec.intrinsics;
    const double zb = spec.background_depth;
    const double m = kFiducialMarginPx;
    const std::array<Vec2, 4> px = {{{m, m},
                                     {in.width - 1 - m, m},
                                     {m, in.height - 1 - m},
                                     {in.width - 1 - m, in.height - 1 - m}}};
    std::vector<Fiducial> out;
    for (int i = 0; i < 4; ++i) {
        Fiducial f;
        f.world = unproject(in, px[i], zb);
        f.color = kFiducialColors[i];
        f.sigma_px = kFiducialSigmaPx;
        out.push_back(f);
    }
    return out;
}

std::array<double, 3> background_texture_color(int texture_id, double wx, double wy) {
    const uint64_t h = splitmix64(static_cast<uint64_t>(texture_id) + 17);
    const double a = 1.5 + 0.9 * ((h & 0xff) / 255.0);
    const double b = 1.1 + 0.9 * (((h >> 8) & 0xff) / 255.0);
    const double p1 = 2.0 * kPi * (((h >> 16) & 0xff) / 255.0);
    const double p2 = 2.0 * kPi * (((h >> 24) & 0xff) / 255.0);
    const double v = 0.45 + 0.16 * std::sin(a * wx + p1) * std::sin(b * wy + p2) +
                     0.09 * std::sin(0.7 * a * (wx + wy) + p2);
    // Muted gray ramp so saturated object / fiducial colors stay separable.
    return {v, v, 0.92 * v + 0.03};
}

namespace {

struct FrameContext {
    const SceneSpec* spec;
    const WorldTrajectory* world;
    int frame;
    CameraPose pose;
    Mat3 rt;        // rotation transposed
    Vec3 rt_t;      // rotation^T * translation
    std::vector<int> order;  // objects sorted by ascending depth
    std::vector<Fiducial> fids;
    std::vector<Vec2> fid_px;        // projected blob centers this frame
    std::vector<uint8_t> fid_front;  // projection exists (z > 0)
};

FrameContext make_context(const SceneSpec& spec, const WorldTrajectory& world, int frame,
                          const CameraPose& pose) {
    FrameContext ctx{&spec, &world, frame, pose, pose.rotation.transposed(), {}, {}, {}};
    ctx.rt_t = ctx.rt * pose.translation;
    ctx.order.resize(spec.objects.size());
    for (size_t i = 0; i < spec.objects.size(); ++i) ctx.order[i] = static_cast<int>(i);
    std::sort(ctx.order.begin(), ctx.order.end(), [&](int a, int b) {
        return spec.objects[a].depth < spec.objects[b].depth;
    });
    ctx.fids = fiducials(spec);
    for (const auto& f : ctx.fids) {
        const Vec3 cam = pose.apply(f.world);
        if (cam.z > 0.0) {
            ctx.fid_px.push_back(project(spec.intrinsics, cam));
            ctx.fid_front.push_back(1);
        } else {
            ctx.fid_px.push_back({0.0, 0.0});
            ctx.fid_front.push_back(0);
        }
    }
    return ctx;
}

// Ray through pixel (u, v) hits world plane z = plane_z at parameter lambda
// (= camera depth) and world coordinates (wx, wy). Returns false for rays
// that never reach the plane in front of the camera.
bool ray_plane(const FrameContext& ctx, double u, double v, double plane_z, double* lambda,
               double* wx, double* wy) {
    const auto& in = ctx.spec->intrinsics;
    const Vec3 dir{(u - in.cx) / in.fx, (v - in.cy) / in.fy, 1.0};
    const Vec3 dw = ctx.rt * dir;
    if (dw.z <= 1e-12) return false;
    const double lam = (plane_z + ctx.rt_t.z) / dw.z;
    if (lam <= 0.0) return false;
    *lambda = lam;
    *wx = lam * dw.x - ctx.rt_t.x;
    *wy = lam * dw.y - ctx.rt_t.y;
    return true;
}

// Frontmost surface along the pixel ray: object index, or -1 for background,
// or -2 for a miss.
int trace_pixel(const FrameContext& ctx, double u, double v, double* depth_out,
                std::array<double, 3>* color_out) {
    const SceneSpec& spec = *ctx.spec;
    for (int k : ctx.order) {
        double lam, wx, wy;
        if (!ray_plane(ctx, u, v, spec.objects[k].depth, &lam, &wx, &wy)) continue;
        const Vec2 c = (*ctx.world)[ctx.frame][k];
        if (std::fabs(wx - c.x) <= spec.objects[k].half_w &&
            std::fabs(wy - c.y) <= spec.objects[k].half_h) {
            *depth_out = lam;
            if (color_out) *color_out = spec.objects[k].albedo;
            return k;
        }
    }
    double lam, wx, wy;
    if (!ray_plane(ctx, u, v, spec.background_depth, &lam, &wx, &wy)) return -2;
    *depth_out = lam;
    if (color_out) {
        auto col = background_texture_color(spec.background_texture, wx, wy);
        // Blobs are painted radially symmetric in image space around the
        // exact projection of their 3D anchor, on a uniform gray disc that
        // suppresses the texture; centroids then localize sub-pixel under
        // any camera motion.
        const std::array<double, 3>& gray = kFiducialBaseGray;
        for (size_t fi = 0; fi < ctx.fids.size(); ++fi) {
            if (!ctx.fid_front[fi]) continue;
            const Fiducial& f = ctx.fids[fi];
            const double dx = u - ctx.fid_px[fi].x;
            const double dy = v - ctx.fid_px[fi].y;
            const double r = std::sqrt(dx * dx + dy * dy);
            // Flat gray pedestal under the whole color support, smooth skirt
            // outside: the color field is then an exact function of r.
            const double core = 2.2 * f.sigma_px;
            const double skirt = r <= core ? 1.0
                                           : std::exp(-(r - core) * (r - core) /
                                                      (2.0 * 0.49 * f.sigma_px * f.sigma_px));
            for (int c = 0; c < 3; ++c) col[c] = col[c] * (1.0 - skirt) + gray[c] * skirt;
            const double g = std::exp(-r * r / (2.0 * f.sigma_px * f.sigma_px));
            for (int c = 0; c < 3; ++c) col[c] = col[c] * (1.0 - g) + f.color[c] * g;
        }
        *color_out = col;
    }
    return -1;
}

}  // namespace

RenderOut render(const SceneSpec& spec, const WorldTrajectory& world,
                 const std::vector<CameraPose>& poses) {
    require(static_cast<int>(poses.size()) == spec.frames, "render: pose count != frames");
    require(static_cast<int>(world.size()) == spec.frames, "render: trajectory length != frames");

    RenderOut out;
    out.clip = Video(spec.frames, spec.height, spec.width, 3);
    out.depth.resize(spec.frames);

    for (int t = 0; t < spec.frames; ++t) {
        const FrameContext ctx = make_context(spec, world, t, poses[t]);

        // Degenerate pose guard: every corner of an object behind the camera.
        for (size_t k = 0; k < spec.objects.size(); ++k) {
            const ObjectSpec& o = spec.objects[k];
            const Vec2 c = world[t][k];
            bool any_front = false;
            for (int sx = -1; sx <= 1; sx += 2)
                for (int sy = -1; sy <= 1; sy += 2) {
                    const Vec3 corner{c.x + sx * o.half_w, c.y + sy * o.half_h, o.depth};
                    if (poses[t].apply(corner).z > 0.0) any_front = true;
                }
            if (!any_front) fail_invalid("render: object fully behind camera");
        }

        out.depth[t] = DepthMap(spec.height, spec.width);
        for (int y = 0; y < spec.height; ++y) {
            for (int x = 0; x < spec.width; ++x) {
                double depth;
                std::array<double, 3> color;
                const int hit = trace_pixel(ctx, x, y, &depth, &color);
                if (hit == -2) continue;  // ray misses everything: invalid pixel
                out.depth[t].set(y, x, depth);
                for (int c = 0; c < 3; ++c)
                    out.clip.at(t, y, x, c) = static_cast<float>(color[c]);
            }
        }
    }
    return out;
}

bool point_visible(const SceneSpec& spec, const WorldTrajectory& world, int frame,
                   const CameraPose& pose, int object, const Vec3& world_point,
                   Vec2* pixel_out) {
    const Vec3 cam = pose.apply(world_point);
    if (!(cam.z > 0.0)) return false;
    const Vec2 px = project(spec.intrinsics, cam);
    if (px.x < 0.0 || px.x >= spec.width || px.y < 0.0 || px.y >= spec.height) return false;

    // Exact occlusion: the camera-to-point segment against every nearer plane.
    const Vec3 center = pose.center();
    for (size_t j = 0; j < spec.objects.size(); ++j) {
        if (static_cast<int>(j) == object) continue;
        const ObjectSpec& o = spec.objects[j];
        const double dz = world_point.z - center.z;
        if (std::fabs(dz) < 1e-12) continue;
        const double s = (o.depth - center.z) / dz;
        if (s <= 0.0 || s >= 1.0) continue;  // plane not between camera and point
        const double qx = center.x + s * (world_point.x - center.x);
        const double qy = center.y + s * (world_point.y - center.y);
        const Vec2 c = world[frame][j];
        if (std::fabs(qx - c.x) <= o.half_w && std::fabs(qy - c.y) <= o.half_h) return false;
    }
    if (pixel_out) *pixel_out = px;
    return true;
}

TrackSet view_tracks(const SceneSpec& spec, const WorldTrajectory& world,
                     const std::vector<CameraPose>& poses, int per_object_quota,
                     std::vector<int>* grid_ids) {
    if (grid_ids) grid_ids->clear();
    const int n = static_cast<int>(spec.objects.size());
    TrackSet out;
    out.height = spec.height;
    out.width = spec.width;
    if (n == 0) return out;

    std::vector<int> quota(n, per_object_quota);
    if (per_object_quota <= 0) {
        double total_area = 0.0;
        for (const auto& o : spec.objects) total_area += o.half_w * o.half_h;
        for (int k = 0; k < n; ++k) {
            const double frac = (spec.objects[k].half_w * spec.objects[k].half_h) / total_area;
            quota[k] = std::max(4, static_cast<int>(std::lround(frac * spec.track_count)));
        }
    }

    for (int k = 0; k < n; ++k) {
        const ObjectSpec& o = spec.objects[k];
        const int g = std::max(2, static_cast<int>(std::ceil(std::sqrt(double(quota[k])))));
        for (int gy = 0; gy < g; ++gy) {
            for (int gx = 0; gx < g; ++gx) {
                const double lx = (2.0 * (gx + 0.5) / g - 1.0) * o.half_w;
                const double ly = (2.0 * (gy + 0.5) / g - 1.0) * o.half_h;

                std::vector<Vec2> pos(spec.frames);
                std::vector<uint8_t> vis(spec.frames, 0);
                for (int t = 0; t < spec.frames; ++t) {
                    const Vec2 c = world[t][k];
                    const Vec3 wp{c.x + lx, c.y + ly, o.depth};
                    Vec2 px;
                    if (point_visible(spec, world, t, poses[t], k, wp, &px)) {
                        pos[t] = px;
                        vis[t] = 1;
                    } else {
                        // Keep the raw projection when it exists so invisible
                        // steps still carry a position.
                        const Vec3 cam = poses[t].apply(wp);
                        pos[t] = cam.z > 0.0 ? project(spec.intrinsics, cam) : Vec2{0.0, 0.0};
                    }
                }
                if (!vis[0]) continue;  // tracks must anchor at a visible frame-0 pixel
                if (grid_ids) grid_ids->push_back((k * 4096 + gy) * 4096 + gx);
                out.push_track(std::move(pos), std::move(vis), k, o.role);
            }
        }
    }
    return out;
}

std::vector<CameraPose> identity_path(int frames) {
    return std::vector<CameraPose>(frames, CameraPose::identity());
}

std::vector<CameraPose> sample_camera_program(CameraKind kind, double magnitude, int frames,
                                              double scene_depth) {
    std::vector<CameraPose> poses(frames, CameraPose::identity());
    if (frames <= 1 || kind == CameraKind::static_cam) return poses;

    const int steps = frames - 1;
    const double max_trans = kMaxStepTranslationFrac * scene_depth * steps;
    const double max_rot_deg = kMaxStepRotationDeg * steps;

    const auto ramp = [&](int t) { return static_cast<double>(t) / steps; };

    switch (kind) {
        case CameraKind::pan: {
            const double total = std::clamp(magnitude, -max_trans, max_trans);
            for (int t = 0; t < frames; ++t) {
                poses[t].translation = {-total * ramp(t), 0.0, 0.0};
            }
            break;
        }
        case CameraKind::zoom: {
            const double total = std::clamp(magnitude, -max_trans, max_trans);
            for (int t = 0; t < frames; ++t) {
                poses[t].translation = {0.0, 0.0, -total * ramp(t)};
            }
            break;
        }
        case CameraKind::orbit:
        case CameraKind::mixed: {
            // The orbit chord per step is ~depth * theta, so the translation
            // budget also caps the angle: theta_step <= 0.02 rad.
            const double max_orbit_deg =
                std::min(max_rot_deg, kMaxStepTranslationFrac * steps * 180.0 / kPi * 0.995);
            const double orbit_deg =
                std::clamp(kind == CameraKind::mixed ? 0.6 * magnitude : magnitude,
                           -max_orbit_deg, max_orbit_deg);
            const Vec3 g{0.0, 0.0, scene_depth};
            for (int t = 0; t < frames; ++t) {
                const double theta = orbit_deg * kPi / 180.0 * ramp(t);
                const Mat3 rot = Mat3::rotation_y(theta);
                Vec3 center = g + rot * (g * -1.0);
                if (kind == CameraKind::mixed) {
                    const double extra = std::clamp(0.25 * magnitude / 90.0 * scene_depth,
                                                    -max_trans, max_trans);
                    center.x += 0.6 * extra * ramp(t);
                    center.z += 0.8 * extra * ramp(t);
                }
                // Look at the centroid, world-y as "down".
                const Vec3 zaxis = (g - center).normalized();
                const Vec3 xaxis = Vec3{0.0, 1.0, 0.0}.cross(zaxis).normalized();
                const Vec3 yaxis = zaxis.cross(xaxis);
                CameraPose p;
                p.rotation.m = {xaxis.x, xaxis.y, xaxis.z, yaxis.x, yaxis.y,
                                yaxis.z, zaxis.x, zaxis.y, zaxis.z};
                p.translation = (p.rotation * center) * -1.0;
                poses[t] = p;
            }
            // Numerical identity at frame 0.
            poses[0] = CameraPose::identity();
            break;
        }
        case CameraKind::static_cam:
            break;
    }
    return poses;
}

Sample make_sample(const SceneSpec& spec) {
    spec.validate();
    const WorldTrajectory world = simulate(spec);

    const std::vector<CameraPose> id_path = identity_path(spec.frames);
    RenderOut canonical = render(spec, world, id_path);

    double mean_depth = spec.background_depth * 0.5;
    if (!spec.objects.empty()) {
        mean_depth = 0.0;
        for (const auto& o : spec.objects) mean_depth += o.depth;
        mean_depth /= static_cast<double>(spec.objects.size());
    }
    const std::vector<CameraPose> cam_path = sample_camera_program(
        spec.camera_kind, spec.camera_magnitude, spec.frames, mean_depth);

    Sample s;
    s.spec = spec;
    s.canonical = canonical.clip;
    s.depth0 = canonical.depth[0];
    s.tracks = view_tracks(spec, world, id_path);
    s.label = static_cast<MotionLabel>(spec.script);
    s.mode = spec.mode;
    s.path.poses = cam_path;
    s.path.intrinsics = spec.intrinsics;

    if (spec.camera_kind == CameraKind::static_cam) {
        s.target = s.canonical;  // same render inputs, bit-exact duplicate
    } else {
        s.target = render(spec, world, cam_path).clip;
    }
    return s;
}

SceneSpec random_scene_spec(uint64_t seed, const GenConfig& cfg) {
    Rng rng(seed);
    SceneSpec spec;
    spec.seed = seed;
    spec.height = cfg.height;
    spec.width = cfg.width;
    spec.frames = cfg.frames;
    spec.intrinsics.fx = spec.intrinsics.fy = 1.25 * cfg.width;
    spec.intrinsics.cx = cfg.width / 2.0;
    spec.intrinsics.cy = cfg.height / 2.0;
    spec.intrinsics.width = cfg.width;
    spec.intrinsics.height = cfg.height;
    spec.background_depth = 10.0;
    spec.background_texture = static_cast<int>(rng.uniform_int(0, 1 << 20));
    spec.track_count = sample_track_count(cfg.height, cfg.width, rng);

    // Supervision mode first; static duplication implies a static camera.
    const double mode_draw = rng.uniform();
    const double denom = cfg.paired_ratio + cfg.static_dup_ratio + cfg.single_dynamic_ratio;
    if (mode_draw < cfg.static_dup_ratio / denom) {
        spec.mode = SupervisionMode::static_dup;
        spec.camera_kind = CameraKind::static_cam;
        spec.camera_magnitude = 0.0;
    } else {
        spec.mode = mode_draw < (cfg.static_dup_ratio + cfg.single_dynamic_ratio) / denom
                        ? SupervisionMode::single_dynamic
                        : SupervisionMode::paired;
        const int k = static_cast<int>(rng.uniform_int(0, 3));
        spec.camera_kind = std::array<CameraKind, 4>{CameraKind::orbit, CameraKind::pan,
                                                     CameraKind::zoom, CameraKind::mixed}[k];
        switch (spec.camera_kind) {
            case CameraKind::orbit: spec.camera_magnitude = rng.uniform(3.5, 7.5); break;
            case CameraKind::pan: spec.camera_magnitude = rng.uniform(0.25, 0.6); break;
            case CameraKind::zoom: spec.camera_magnitude = rng.uniform(0.6, 1.4); break;
            default: spec.camera_magnitude = rng.uniform(4.0, 8.0); break;
        }
        if (rng.bernoulli(0.5)) spec.camera_magnitude = -spec.camera_magnitude;
    }

    if (rng.uniform() < cfg.script_none_ratio) {
        spec.script = Script::none;
    } else {
        const int k = static_cast<int>(rng.uniform_int(1, 3));
        spec.script = static_cast<Script>(k);
    }

    // Motion along a random direction, dominant-axis biased so contact
    // normals stay intuitive.
    double angle = rng.uniform(0.0, 2.0 * kPi);
    angle = std::round(angle / (kPi / 2.0)) * (kPi / 2.0) + rng.uniform(-0.3, 0.3);
    spec.motion_dir_x = std::cos(angle);
    spec.motion_dir_y = std::sin(angle);
    spec.active_speed = spec.script == Script::collide ? rng.uniform(0.20, 0.28)
                                                       : rng.uniform(0.14, 0.20);

    // Passive object near the image center, active placed up-stream of the
    // motion direction so contact happens early and the consequence covers a
    // visible stretch of the clip.
    ObjectSpec passive;
    passive.half_w = rng.uniform(0.7, 0.95);
    passive.half_h = rng.uniform(0.7, 0.95);
    passive.x0 = rng.uniform(-0.3, 0.3);
    passive.y0 = rng.uniform(-0.3, 0.3);
    passive.depth = rng.uniform(5.4, 6.4);
    passive.role = Role::passive;

    ObjectSpec active;
    active.half_w = rng.uniform(0.45, 0.65);
    active.half_h = rng.uniform(0.45, 0.65);
    active.depth = passive.depth + rng.uniform(0.8, 1.6);
    active.role = Role::active;

    const std::array<std::array<double, 3>, 5> palette = {{
        {0.95, 0.10, 0.10},  // red
        {0.10, 0.90, 0.10},  // green
        {1.00, 0.50, 0.00},  // orange
        {0.55, 0.15, 0.95},  // purple
        {1.00, 0.30, 0.55},  // pink
    }};
    const int base_color = static_cast<int>(rng.uniform_int(0, 4));
    passive.albedo = palette[base_color];
    active.albedo = palette[(base_color + 2) % 5];

    if (spec.script == Script::none) {
        passive.role = Role::passive;
        active.role = Role::passive;
        active.x0 = passive.x0 + (rng.bernoulli(0.5) ? 1.0 : -1.0) *
                                     (passive.half_w + active.half_w + rng.uniform(0.3, 0.6));
        active.y0 = rng.uniform(-0.4, 0.4);
        spec.active_speed = 0.0;
    } else {
        const Vec2 dir{spec.motion_dir_x, spec.motion_dir_y};
        const int contact_frame = 2;
        const double touch =
            std::fabs(dir.x) >= std::fabs(dir.y)
                ? (active.half_w + passive.half_w) / std::max(std::fabs(dir.x), 0.3)
                : (active.half_h + passive.half_h) / std::max(std::fabs(dir.y), 0.3);
        double gap = spec.active_speed * contact_frame;
        if (spec.script == Script::pull) gap = -0.02;  // start adjacent, move away
        active.x0 = passive.x0 - dir.x * (touch * 0.98 + gap);
        active.y0 = passive.y0 - dir.y * (touch * 0.98 + gap);
        if (spec.script == Script::pull) {
            spec.motion_dir_x = -dir.x;
            spec.motion_dir_y = -dir.y;
        }
    }

    spec.objects = {active, passive};
    // Keep everything inside the identity frustum by shrinking bold layouts.
    for (auto& o : spec.objects) {
        const double half_view_x = (spec.intrinsics.cx / spec.intrinsics.fx) * o.depth * 0.92;
        const double half_view_y = (spec.intrinsics.cy / spec.intrinsics.fy) * o.depth * 0.92;
        o.x0 = std::clamp(o.x0, -(half_view_x - o.half_w), half_view_x - o.half_w);
        o.y0 = std::clamp(o.y0, -(half_view_y - o.half_h), half_view_y - o.half_h);
    }
    spec.validate();
    return spec;
}

}  // namespace dsv
