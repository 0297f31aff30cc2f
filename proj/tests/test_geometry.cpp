#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dsv/geometry.hpp"
#include "dsv/rng.hpp"
#include "dsv/synth.hpp"
#include "dsv/tracks.hpp"

using namespace dsv;

namespace {

CameraIntrinsics toy_intrinsics() {
    CameraIntrinsics in;
    in.fx = in.fy = 40.0;
    in.cx = in.cy = 16.0;
    in.width = in.height = 32;
    return in;
}

}  // namespace

TEST_CASE("unproject principal point and unit tangent") {
    const auto in = toy_intrinsics();
    const Vec3 p = unproject(in, {in.cx, in.cy}, 2.0);
    CHECK(p.x == 0.0);
    CHECK(p.y == 0.0);
    CHECK(p.z == 2.0);

    const Vec3 q = unproject(in, {in.cx + in.fx, in.cy}, 1.0);
    CHECK(q.x == doctest::Approx(1.0));
    CHECK(q.y == doctest::Approx(0.0));
    CHECK(q.z == 1.0);
}

TEST_CASE("unproject rejects bad depth") {
    const auto in = toy_intrinsics();
    CHECK_THROWS_AS(unproject(in, {4.0, 4.0}, 0.0), Error);
    CHECK_THROWS_AS(unproject(in, {4.0, 4.0}, -1.0), Error);
    CHECK_THROWS_AS(unproject(in, {4.0, 4.0}, std::nan("")), Error);
}

TEST_CASE("project formula and behind-camera error") {
    CameraIntrinsics in;
    in.fx = in.fy = 100.0;
    in.cx = in.cy = 50.0;
    in.width = in.height = 100;

    Vec2 uv = project(in, {0.0, 0.0, 5.0});
    CHECK(uv.x == doctest::Approx(50.0));
    CHECK(uv.y == doctest::Approx(50.0));

    uv = project(in, {1.0, 0.0, 1.0});
    CHECK(uv.x == doctest::Approx(150.0));
    CHECK(uv.y == doctest::Approx(50.0));

    CHECK_THROWS_AS(project(in, {0.0, 0.0, 0.0}), Error);
    CHECK_THROWS_AS(project(in, {0.0, 0.0, -2.0}), Error);
}

TEST_CASE("projective invariance under positive scaling") {
    const auto in = toy_intrinsics();
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
        const Vec3 p{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(0.5, 9.0)};
        const double k = rng.uniform(0.1, 10.0);
        const Vec2 a = project(in, p);
        const Vec2 b = project(in, p * k);
        CHECK(std::fabs(a.x - b.x) < 1e-9);
        CHECK(std::fabs(a.y - b.y) < 1e-9);
    }
}

TEST_CASE("project after unproject is the identity on pixels") {
    const auto in = toy_intrinsics();
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
        const Vec2 px{rng.uniform(0.0, in.width - 1.0), rng.uniform(0.0, in.height - 1.0)};
        const double d = rng.uniform(1e-3, 50.0);
        const Vec2 back = project(in, unproject(in, px, d));
        CHECK(std::fabs(back.x - px.x) < 1e-9);
        CHECK(std::fabs(back.y - px.y) < 1e-9);
    }
}

TEST_CASE("canonicalize_track with identity path is the identity") {
    const auto in = toy_intrinsics();
    CameraPath path;
    path.intrinsics = in;
    path.poses.assign(6, CameraPose::identity());

    Rng rng(3);
    std::vector<Vec2> track;
    std::vector<double> depths;
    std::vector<uint8_t> vis;
    for (int t = 0; t < 6; ++t) {
        track.push_back({rng.uniform(1.0, 30.0), rng.uniform(1.0, 30.0)});
        depths.push_back(rng.uniform(2.0, 9.0));
        vis.push_back(1);
    }
    const CanonicalTrack out = canonicalize_track(track, depths, vis, path);
    for (int t = 0; t < 6; ++t) {
        CHECK(out.visible[t] == 1);
        CHECK(std::fabs(out.points[t].x - track[t].x) < 1e-9);
        CHECK(std::fabs(out.points[t].y - track[t].y) < 1e-9);
    }
}

TEST_CASE("canonicalize_track pure zoom closed form") {
    // Static point at depth 4; the camera advances 2 units along the optical
    // axis, so the point is observed at depth 2.
    const auto in = toy_intrinsics();
    const Vec3 world{0.7, -0.4, 4.0};

    CameraPose zoomed;
    zoomed.translation = {0.0, 0.0, -2.0};

    CameraPath path;
    path.intrinsics = in;
    path.poses = {CameraPose::identity(), zoomed};

    const Vec2 px0 = project(in, world);
    const Vec2 px1 = project(in, zoomed.apply(world));

    const CanonicalTrack out = canonicalize_track({px0, px1}, {4.0, 2.0}, {1, 1}, path);
    CHECK(std::fabs(out.points[1].x - px0.x) < 1e-6);
    CHECK(std::fabs(out.points[1].y - px0.y) < 1e-6);
}

TEST_CASE("canonicalize_track static world points stay frame-constant") {
    // Core disentanglement invariant, exercised over analytic scenes with
    // exact depths: 100 random static points under random smooth cameras.
    const auto in = toy_intrinsics();
    Rng rng(2024);
    for (int rep = 0; rep < 100; ++rep) {
        const Vec3 world{rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2), rng.uniform(4.0, 9.0)};

        CameraPath path;
        path.intrinsics = in;
        path.poses.push_back(CameraPose::identity());
        for (int t = 1; t < 8; ++t) {
            CameraPose p;
            p.rotation = Mat3::rotation_y(rng.uniform(-0.05, 0.05)) *
                         Mat3::rotation_x(rng.uniform(-0.05, 0.05));
            p.translation = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3),
                             rng.uniform(-0.5, 0.5)};
            path.poses.push_back(p);
        }

        std::vector<Vec2> track;
        std::vector<double> depths;
        std::vector<uint8_t> vis;
        for (const auto& pose : path.poses) {
            const Vec3 cam = pose.apply(world);
            track.push_back(project(in, cam));
            depths.push_back(cam.z);
            vis.push_back(1);
        }

        const Vec2 ref = project(in, world);
        const CanonicalTrack out = canonicalize_track(track, depths, vis, path);
        for (size_t t = 0; t < out.points.size(); ++t) {
            REQUIRE(out.visible[t] == 1);
            CHECK(std::fabs(out.points[t].x - ref.x) < 1e-6);
            CHECK(std::fabs(out.points[t].y - ref.y) < 1e-6);
        }
    }
}

TEST_CASE("canonicalize_track marks behind-camera reprojections invisible") {
    const auto in = toy_intrinsics();
    // Camera u sits at world z = -4 and observes a point at world z = -2,
    // which lies behind the frame-0 camera at the origin.
    CameraPose pulled_back;
    pulled_back.translation = {0.0, 0.0, 4.0};

    CameraPath path;
    path.intrinsics = in;
    path.poses = {CameraPose::identity(), pulled_back};

    const CanonicalTrack out =
        canonicalize_track({{16.0, 16.0}, {16.0, 16.0}}, {3.0, 2.0}, {1, 1}, path);
    CHECK(out.visible[0] == 1);
    CHECK(out.visible[1] == 0);
    // The masked step keeps its input position.
    CHECK(out.points[1].x == 16.0);
}

TEST_CASE("canonicalize passes invisible steps through unmodified") {
    const auto in = toy_intrinsics();
    CameraPath path;
    path.intrinsics = in;
    path.poses.assign(3, CameraPose::identity());
    const CanonicalTrack out = canonicalize_track({{4.0, 4.0}, {9.0, 9.0}, {5.0, 5.0}},
                                                  {2.0, 2.0, 2.0}, {1, 0, 1}, path);
    CHECK(out.visible[1] == 0);
    CHECK(out.points[1].x == 9.0);
    CHECK(out.points[1].y == 9.0);
}

TEST_CASE("warp_first_frame identity pose is the identity with full validity") {
    const auto in = toy_intrinsics();
    Image img(32, 32, 3);
    Rng rng(5);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform());
    DepthMap depth(32, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) depth.set(y, x, 6.0);

    const WarpResult out = warp_first_frame(img, depth, in, CameraPose::identity());
    for (size_t i = 0; i < img.data.size(); ++i) CHECK(out.image.data[i] == img.data[i]);
    for (uint8_t v : out.valid) CHECK(v == 1);
}

TEST_CASE("warp_first_frame analytic plane shift") {
    // Fronto-parallel plane at constant depth under pure horizontal camera
    // translation: image shifts by fx * tx / z pixels.
    const auto in = toy_intrinsics();
    const double z = 8.0;
    Image img(32, 32, 3);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            const auto c = background_texture_color(42, (x - in.cx) / in.fx * z,
                                                    (y - in.cy) / in.fy * z);
            for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = static_cast<float>(c[ch]);
        }
    DepthMap depth(32, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) depth.set(y, x, z);

    CameraPose pose;
    pose.translation = {0.6, 0.0, 0.0};
    const double shift = in.fx * pose.translation.x / z;  // +3 px

    const WarpResult out = warp_first_frame(img, depth, in, pose);
    int checked = 0;
    for (int y = 2; y < 30; ++y) {
        for (int x = 2; x < 30; ++x) {
            const size_t idx = static_cast<size_t>(y) * 32 + x;
            if (!out.valid[idx]) continue;
            const double src_x = x - shift;
            const int sx = static_cast<int>(std::lround(src_x));
            if (sx < 0 || sx >= 32) continue;
            // Within 1 px: compare against the nearest-pixel shifted source.
            CHECK(std::fabs(out.image.at(y, x, 0) - img.at(y, sx, 0)) < 0.08);
            ++checked;
        }
    }
    CHECK(checked > 400);
}

TEST_CASE("warp_first_frame degenerate poses raise empty-warp errors") {
    const auto in = toy_intrinsics();
    Image img(32, 32, 3);
    DepthMap depth(32, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) depth.set(y, x, 4.0);

    CameraPose behind;
    behind.translation = {0.0, 0.0, -100.0};  // everything behind the camera
    CHECK_THROWS_AS(warp_first_frame(img, depth, in, behind), Error);

    const DepthMap invalid(32, 32);  // no valid texel at all
    CHECK_THROWS_AS(warp_first_frame(img, invalid, in, CameraPose::identity()), Error);
}

namespace {

TrackSet two_track_set() {
    TrackSet ts;
    ts.height = ts.width = 32;
    // Track 0 (object 0): fixed at (5, 5). Track 1 (object 1): converges to
    // (5, 5) at frame 3, then leaves.
    ts.push_track({{5, 5}, {5, 5}, {5, 5}, {5, 5}, {5, 5}}, {1, 1, 1, 1, 1}, 0, Role::active);
    ts.push_track({{20, 5}, {15, 5}, {10, 5}, {5, 5}, {10, 5}}, {1, 1, 1, 1, 1}, 1,
                  Role::passive);
    return ts;
}

}  // namespace

TEST_CASE("occlusion_mask keeps non-colliding tracks visible") {
    TrackSet ts;
    ts.height = ts.width = 32;
    ts.push_track({{5, 5}, {6, 5}}, {1, 1}, 0, Role::active);
    ts.push_track({{20, 20}, {21, 20}}, {1, 1}, 1, Role::passive);
    DepthMap depth(32, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) depth.set(y, x, 3.0);

    const auto vis = occlusion_mask(ts, depth);
    for (const auto& track : vis)
        for (uint8_t v : track) CHECK(v == 1);
}

TEST_CASE("occlusion_mask masks the deeper object only at the collision frame") {
    TrackSet ts = two_track_set();
    DepthMap depth(32, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) depth.set(y, x, 2.0);
    depth.set(5, 5, 1.0);    // object 0 anchor: depth 1
    depth.set(5, 20, 2.0);   // object 1 anchor: depth 2

    const auto vis = occlusion_mask(ts, depth);
    CHECK(vis[0] == std::vector<uint8_t>{1, 1, 1, 1, 1});
    CHECK(vis[1] == std::vector<uint8_t>{1, 1, 1, 0, 1});
}

TEST_CASE("occlusion_mask equal depth tie-break prefers the lower object id") {
    TrackSet ts = two_track_set();
    DepthMap depth(32, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) depth.set(y, x, 2.0);

    const auto vis = occlusion_mask(ts, depth);
    CHECK(vis[0][3] == 1);
    CHECK(vis[1][3] == 0);
}

TEST_CASE("occlusion_mask is invariant to track order") {
    TrackSet ts = two_track_set();
    DepthMap depth(32, 32);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) depth.set(y, x, 2.0);
    depth.set(5, 5, 1.0);

    const auto vis = occlusion_mask(ts, depth);
    const TrackSet flipped = ts.select({1, 0});
    const auto vis_flipped = occlusion_mask(flipped, depth);
    CHECK(vis[0] == vis_flipped[1]);
    CHECK(vis[1] == vis_flipped[0]);
}

TEST_CASE("occlusion_mask agrees with the renderer on contested steps") {
    // One object passing in front of another; the approximate first-frame
    // depth ordering must match exact ray visibility on >= 95% of contested
    // steps.
    SceneSpec spec;
    spec.seed = 99;
    spec.height = spec.width = 32;
    spec.frames = 8;
    spec.intrinsics = toy_intrinsics();
    spec.background_depth = 10.0;
    spec.script = Script::push;
    spec.active_speed = 0.22;
    spec.motion_dir_x = 1.0;
    spec.motion_dir_y = 0.0;

    ObjectSpec front;  // nearer, moving right across the back object
    front.half_w = front.half_h = 0.7;
    front.x0 = -1.1;
    front.y0 = 0.0;
    front.depth = 5.0;
    front.role = Role::active;
    front.albedo = {1.0, 0.2, 0.2};

    ObjectSpec back;
    back.half_w = back.half_h = 0.7;
    back.x0 = 0.4;
    back.y0 = 0.0;
    back.depth = 6.5;
    back.role = Role::passive;
    back.albedo = {0.2, 1.0, 0.2};

    spec.objects = {front, back};
    // Keep the back object pinned so overlap persists: use script none and
    // move the front object kinematically via push with zero transfer. The
    // contact still transfers motion; that is fine for this oracle.
    const WorldTrajectory world = simulate(spec);
    const auto poses = identity_path(spec.frames);
    const RenderOut rendered = render(spec, world, poses);

    // Naive tracks: projected grid points, visible wherever they land
    // in-frame, ignoring occlusion.
    TrackSet naive;
    naive.height = spec.height;
    naive.width = spec.width;
    std::vector<std::vector<uint8_t>> exact;
    for (int k = 0; k < 2; ++k) {
        const ObjectSpec& o = spec.objects[k];
        for (int gy = 0; gy < 5; ++gy)
            for (int gx = 0; gx < 5; ++gx) {
                const double lx = (2.0 * (gx + 0.5) / 5 - 1.0) * o.half_w;
                const double ly = (2.0 * (gy + 0.5) / 5 - 1.0) * o.half_h;
                std::vector<Vec2> pos(spec.frames);
                std::vector<uint8_t> vis(spec.frames, 0), ex(spec.frames, 0);
                for (int t = 0; t < spec.frames; ++t) {
                    const Vec3 wp{world[t][k].x + lx, world[t][k].y + ly, o.depth};
                    const Vec2 px = project(spec.intrinsics, poses[t].apply(wp));
                    pos[t] = px;
                    vis[t] = px.x >= 0 && px.x < spec.width && px.y >= 0 && px.y < spec.height;
                    Vec2 unused;
                    ex[t] = point_visible(spec, world, t, poses[t], k, wp, &unused) ? 1 : 0;
                }
                if (!vis[0]) continue;
                naive.push_track(std::move(pos), std::move(vis), k, o.role);
                exact.push_back(std::move(ex));
            }
    }

    const auto masked = occlusion_mask(naive, rendered.depth[0]);

    // Contested steps: a rounded pixel shared by tracks of different objects.
    int contested = 0, agree = 0;
    for (int t = 0; t < spec.frames; ++t) {
        for (int i = 0; i < naive.count(); ++i) {
            if (!naive.visible[i][t]) continue;
            const int xi = static_cast<int>(std::lround(naive.positions[i][t].x));
            const int yi = static_cast<int>(std::lround(naive.positions[i][t].y));
            bool shared = false;
            for (int j = 0; j < naive.count() && !shared; ++j) {
                if (naive.object_id[j] == naive.object_id[i] || !naive.visible[j][t]) continue;
                const int xj = static_cast<int>(std::lround(naive.positions[j][t].x));
                const int yj = static_cast<int>(std::lround(naive.positions[j][t].y));
                shared = xi == xj && yi == yj;
            }
            if (!shared) continue;
            ++contested;
            if (masked[i][t] == exact[i][t]) ++agree;
        }
    }
    REQUIRE(contested > 0);
    CHECK(static_cast<double>(agree) / contested >= 0.95);
}
