#include "dsv/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace dsv {

namespace {

double median_of(std::vector<double> xs) {
    require(!xs.empty(), "median of empty set");
    std::sort(xs.begin(), xs.end());
    const size_t n = xs.size();
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

double color_dist2(const float* px, const std::array<double, 3>& c) {
    double acc = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double d = px[i] - c[i];
        acc += d * d;
    }
    return acc;
}

}  // namespace

std::optional<Vec2> ColorDetector::centroid(const Video& clip, int frame,
                                            const std::array<double, 3>& color,
                                            double* mass_out) const {
    double mass = 0.0, sx = 0.0, sy = 0.0;
    for (int y = 0; y < clip.height; ++y) {
        for (int x = 0; x < clip.width; ++x) {
            const float* px = &clip.data[((static_cast<size_t>(frame) * clip.height + y) *
                                              clip.width +
                                          x) *
                                         clip.channels];
            const double d2 = color_dist2(px, color);
            if (d2 >= radius2) continue;
            // Nearest-palette gate kills cross-color bleed.
            bool nearest = true;
            for (const auto& other : palette) {
                if (other == color) continue;
                if (color_dist2(px, other) < d2) {
                    nearest = false;
                    break;
                }
            }
            if (!nearest) continue;
            const double w = 1.0 - d2 / radius2;
            mass += w;
            sx += w * x;
            sy += w * y;
        }
    }
    if (mass_out) *mass_out = mass;
    if (mass < min_mass) return std::nullopt;
    return Vec2{sx / mass, sy / mass};
}

ColorDetector detector_for(const SceneSpec& spec) {
    ColorDetector det;
    for (const auto& o : spec.objects) det.palette.push_back(o.albedo);
    for (const auto& f : fiducials(spec)) det.palette.push_back(f.color);
    return det;
}

EpeResult epe(const Video& generated, const TrackSet& gt_tracks,
              const std::vector<std::array<double, 3>>& object_colors,
              const ColorDetector& detector) {
    const int frames = gt_tracks.frames();
    EpeResult result;
    std::vector<double> errors;

    for (size_t k = 0; k < object_colors.size(); ++k) {
        for (int t = 0; t < frames; ++t) {
            // Ground-truth centroid: mean of the object's visible steps.
            double sx = 0.0, sy = 0.0;
            int cnt = 0;
            for (int i = 0; i < gt_tracks.count(); ++i) {
                if (gt_tracks.object_id[i] != static_cast<int>(k) || !gt_tracks.visible[i][t])
                    continue;
                sx += gt_tracks.positions[i][t].x;
                sy += gt_tracks.positions[i][t].y;
                ++cnt;
            }
            if (cnt == 0) continue;
            const Vec2 gt{sx / cnt, sy / cnt};

            const auto detected = detector.centroid(generated, t, object_colors[k]);
            if (!detected) {
                ++result.steps_undetected;
                continue;
            }
            errors.push_back((*detected - gt).norm());
        }
    }

    if (errors.empty()) {
        fail_invalid("epe: metric undefined, no object detectable in the generated clip");
    }
    result.median_px = median_of(errors);
    result.steps_evaluated = static_cast<int>(errors.size());
    return result;
}

// ---------------------------------------------------------------------------
// Planar PnP
// ---------------------------------------------------------------------------

CameraPose pnp_planar(const std::vector<Vec3>& world_points, const std::vector<Vec2>& pixels,
                      const CameraIntrinsics& intr) {
    const size_t n = world_points.size();
    require(n >= 4 && pixels.size() == n, "pnp: need >= 4 correspondences");
    const double plane_z = world_points[0].z;
    for (const auto& p : world_points) {
        require(std::fabs(p.z - plane_z) < 1e-9, "pnp: points must be coplanar in z");
    }

    // Hartley normalization of both point sets.
    double mwx = 0, mwy = 0, mpx = 0, mpy = 0;
    for (size_t i = 0; i < n; ++i) {
        mwx += world_points[i].x;
        mwy += world_points[i].y;
        mpx += pixels[i].x;
        mpy += pixels[i].y;
    }
    mwx /= n;
    mwy /= n;
    mpx /= n;
    mpy /= n;
    double sw = 0, sp = 0;
    for (size_t i = 0; i < n; ++i) {
        sw += std::hypot(world_points[i].x - mwx, world_points[i].y - mwy);
        sp += std::hypot(pixels[i].x - mpx, pixels[i].y - mpy);
    }
    const double scale_w = std::sqrt(2.0) * n / std::max(sw, 1e-12);
    const double scale_p = std::sqrt(2.0) * n / std::max(sp, 1e-12);

    // Homography (normalized world plane coords -> normalized pixels) via the
    // smallest eigenvector of AtA.
    std::array<double, 81> ata{};
    for (size_t i = 0; i < n; ++i) {
        const double X = (world_points[i].x - mwx) * scale_w;
        const double Y = (world_points[i].y - mwy) * scale_w;
        const double u = (pixels[i].x - mpx) * scale_p;
        const double v = (pixels[i].y - mpy) * scale_p;
        const double rows[2][9] = {
            {X, Y, 1, 0, 0, 0, -u * X, -u * Y, -u},
            {0, 0, 0, X, Y, 1, -v * X, -v * Y, -v},
        };
        for (const auto& r : rows)
            for (int a = 0; a < 9; ++a)
                for (int b = 0; b < 9; ++b) ata[a * 9 + b] += r[a] * r[b];
    }
    std::array<double, 9> evals;
    std::array<double, 81> evecs;
    jacobi_eigen_sym<9>(ata, evals, evecs);
    // Smallest eigenvalue first (ascending sort): column 0.
    Mat3 hn;
    for (int i = 0; i < 9; ++i) hn.m[i] = evecs[i * 9 + 0];

    // Undo normalization: H = Tp^-1 * Hn * Tw.
    Mat3 tw, tp_inv;
    tw.m = {scale_w, 0, -scale_w * mwx, 0, scale_w, -scale_w * mwy, 0, 0, 1};
    tp_inv.m = {1.0 / scale_p, 0, mpx, 0, 1.0 / scale_p, mpy, 0, 0, 1};
    Mat3 h = tp_inv * hn * tw;

    // K^-1 H = lambda [r1 | r2 | z0 r3 + t].
    Mat3 kinv;
    kinv.m = {1.0 / intr.fx, 0, -intr.cx / intr.fx, 0, 1.0 / intr.fy, -intr.cy / intr.fy,
              0, 0, 1};
    Mat3 g = kinv * h;

    const auto col = [&](const Mat3& m, int c) { return Vec3{m(0, c), m(1, c), m(2, c)}; };
    CameraPose best;
    double best_score = -1e300;
    for (const double sign : {1.0, -1.0}) {
        const Vec3 h1 = col(g, 0) * sign;
        const Vec3 h2 = col(g, 1) * sign;
        const Vec3 h3 = col(g, 2) * sign;
        const double lambda = 2.0 / std::max(h1.norm() + h2.norm(), 1e-300);
        const Vec3 r1 = h1 * lambda;
        const Vec3 r2 = h2 * lambda;
        const Vec3 r3 = r1.cross(r2);
        Mat3 raw;
        raw.m = {r1.x, r2.x, r3.x, r1.y, r2.y, r3.y, r1.z, r2.z, r3.z};
        const Mat3 rot = orthonormalize_rotation(raw);
        CameraPose pose;
        pose.rotation = rot;
        const Vec3 r3o{rot(0, 2), rot(1, 2), rot(2, 2)};
        pose.translation = h3 * lambda - r3o * plane_z;

        // Cheirality: every fiducial in front of the camera.
        double score = 0.0;
        for (const auto& p : world_points) score += pose.apply(p).z;
        if (score > best_score) {
            best_score = score;
            best = pose;
        }
    }
    require(best_score > 0.0, "pnp: degenerate pose (points behind camera)");
    return best;
}

namespace {

// Expected detection mass of an untruncated blob (gray-disc blend sampled on
// the pixel grid); the minimum over subpixel offsets is the floor for the
// occlusion/truncation rejection below.
double ideal_blob_mass(const Fiducial& f, double radius2) {
    double base2 = 0.0;
    for (int c = 0; c < 3; ++c) {
        const double d = kFiducialBaseGray[c] - f.color[c];
        base2 += d * d;
    }
    double lowest = 1e300;
    for (const double ox : {0.0, 0.5}) {
        for (const double oy : {0.0, 0.5}) {
            double mass = 0.0;
            for (int y = -5; y <= 5; ++y)
                for (int x = -5; x <= 5; ++x) {
                    const double r2 = (x - ox) * (x - ox) + (y - oy) * (y - oy);
                    const double g = std::exp(-r2 / (2.0 * f.sigma_px * f.sigma_px));
                    const double d2 = (1.0 - g) * (1.0 - g) * base2;
                    if (d2 < radius2) mass += 1.0 - d2 / radius2;
                }
            lowest = std::min(lowest, mass);
        }
    }
    return lowest;
}

}  // namespace

CameraErrorResult camera_error(const Video& generated, const CameraPath& gt_path,
                               const std::vector<Fiducial>& fids,
                               const ColorDetector& detector) {
    require(fids.size() >= 4, "camera_error: need the four fiducials");
    const int frames = static_cast<int>(gt_path.poses.size());
    require(generated.frames == frames, "camera_error: clip/path length mismatch");

    // A blob losing a chunk of its mass is occluded or clipped; its centroid
    // would be biased, so the frame drops it.
    std::vector<double> mass_floor;
    for (const auto& f : fids) mass_floor.push_back(0.55 * ideal_blob_mass(f, detector.radius2));

    std::vector<double> rot_errors, trans_errors;
    for (int t = 0; t < frames; ++t) {
        std::vector<Vec3> world;
        std::vector<Vec2> px;
        for (size_t fi = 0; fi < fids.size(); ++fi) {
            const Fiducial& f = fids[fi];
            double mass = 0.0;
            const auto detected = detector.centroid(generated, t, f.color, &mass);
            if (!detected || mass < mass_floor[fi]) continue;
            world.push_back(f.world);
            px.push_back(*detected);
        }
        if (world.size() < 4) continue;

        CameraPose est;
        try {
            est = pnp_planar(world, px, gt_path.intrinsics);
        } catch (const Error&) {
            continue;
        }

        const Mat3 rel = est.rotation * gt_path.poses[t].rotation.transposed();
        const double cos_angle = std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0);
        rot_errors.push_back(std::acos(cos_angle) * 180.0 / 3.14159265358979323846);
        trans_errors.push_back((est.translation - gt_path.poses[t].translation).norm());
    }

    if (rot_errors.size() < 3) {
        fail_invalid("camera_error: metric undefined, fewer than 3 usable frames");
    }
    CameraErrorResult out;
    out.median_rotation_deg = median_of(rot_errors);
    out.median_translation = median_of(trans_errors);
    out.frames_used = static_cast<int>(rot_errors.size());
    return out;
}

// ---------------------------------------------------------------------------
// Causality probes
// ---------------------------------------------------------------------------

namespace {

// Ground-truth centroid displacement of one object between frame 0 and the
// last frame, from the stored canonical tracks.
std::optional<Vec2> gt_object_displacement(const Sample& sample, int object) {
    const TrackSet& tr = sample.tracks;
    double sx0 = 0, sy0 = 0, sx1 = 0, sy1 = 0;
    int c0 = 0, c1 = 0;
    const int last = tr.frames() - 1;
    for (int i = 0; i < tr.count(); ++i) {
        if (tr.object_id[i] != object) continue;
        if (tr.visible[i][0]) {
            sx0 += tr.positions[i][0].x;
            sy0 += tr.positions[i][0].y;
            ++c0;
        }
        if (tr.visible[i][last]) {
            sx1 += tr.positions[i][last].x;
            sy1 += tr.positions[i][last].y;
            ++c1;
        }
    }
    if (c0 == 0 || c1 == 0) return std::nullopt;
    return Vec2{sx1 / c1 - sx0 / c0, sy1 / c1 - sy0 / c0};
}

// Minimum pixel distance between two color masses in one frame.
std::optional<double> color_mass_distance(const Video& clip, int frame,
                                          const std::array<double, 3>& a,
                                          const std::array<double, 3>& b, double radius2) {
    std::vector<Vec2> pa, pb;
    for (int y = 0; y < clip.height; ++y)
        for (int x = 0; x < clip.width; ++x) {
            const float* px = &clip.data[((static_cast<size_t>(frame) * clip.height + y) *
                                              clip.width +
                                          x) *
                                         clip.channels];
            if (color_dist2(px, a) < radius2)
                pa.push_back({static_cast<double>(x), static_cast<double>(y)});
            if (color_dist2(px, b) < radius2)
                pb.push_back({static_cast<double>(x), static_cast<double>(y)});
        }
    if (pa.empty() || pb.empty()) return std::nullopt;
    double best = 1e300;
    for (const auto& p : pa)
        for (const auto& q : pb) best = std::min(best, (p - q).norm());
    return best;
}

}  // namespace

CausalityReport causality_probe(const Video& generated, const Sample& sample,
                                CausalityMode mode, const ColorDetector& detector) {
    CausalityReport report;
    report.mode = mode;

    int active = -1, passive = -1;
    for (size_t k = 0; k < sample.spec.objects.size(); ++k) {
        if (sample.spec.objects[k].role == Role::active && active < 0)
            active = static_cast<int>(k);
        if (sample.spec.objects[k].role == Role::passive && passive < 0)
            passive = static_cast<int>(k);
    }
    require(active >= 0 && passive >= 0,
            "causality_probe: sample needs one active and one passive object");

    const auto& act_color = sample.spec.objects[active].albedo;
    const auto& pas_color = sample.spec.objects[passive].albedo;
    const int last = generated.frames - 1;

    const auto detect_disp = [&](const std::array<double, 3>& color) -> std::optional<Vec2> {
        const auto p0 = detector.centroid(generated, 0, color);
        const auto p1 = detector.centroid(generated, last, color);
        if (!p0 || !p1) return std::nullopt;
        return *p1 - *p0;
    };

    if (mode == CausalityMode::forward) {
        const auto disp = detect_disp(pas_color);
        if (!disp) fail_invalid("causality_probe: passive object undetectable");
        const auto gt = gt_object_displacement(sample, passive);
        if (!gt) fail_invalid("causality_probe: ground-truth passive track unavailable");
        report.passive_disp_px = disp->norm();
        report.gt_passive_disp_px = gt->norm();
        const double denom = disp->norm() * gt->norm();
        report.direction_cosine =
            denom > 1e-9 ? (disp->x * gt->x + disp->y * gt->y) / denom : 0.0;
        return report;
    }

    // Inverse: measure the generated active displacement and whether contact
    // precedes the passive onset.
    const auto disp = detect_disp(act_color);
    if (!disp) fail_invalid("causality_probe: active object undetectable");
    report.active_disp_px = disp->norm();

    std::optional<Vec2> pas0 = detector.centroid(generated, 0, pas_color);
    for (int t = 0; t < generated.frames; ++t) {
        if (report.contact_frame < 0) {
            const auto dist =
                color_mass_distance(generated, t, act_color, pas_color, detector.radius2);
            if (dist && *dist <= 2.0) report.contact_frame = t;
        }
        if (report.passive_onset_frame < 0 && pas0) {
            const auto p = detector.centroid(generated, t, pas_color);
            if (p && (*p - *pas0).norm() > 0.5) report.passive_onset_frame = t;
        }
    }
    report.contact_before_onset =
        report.contact_frame >= 0 &&
        (report.passive_onset_frame < 0 || report.contact_frame <= report.passive_onset_frame);
    return report;
}

}  // namespace dsv
