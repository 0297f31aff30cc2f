#ifndef DSV_SYNTH_HPP
#define DSV_SYNTH_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dsv/geometry.hpp"
#include "dsv/rng.hpp"
#include "dsv/tracks.hpp"
#include "dsv/video.hpp"

namespace dsv {

enum class Script : uint8_t { none = 0, push = 1, pull = 2, collide = 3 };
enum class CameraKind : uint8_t { static_cam = 0, orbit = 1, pan = 2, zoom = 3, mixed = 4 };
enum class SupervisionMode : uint8_t { paired = 0, static_dup = 1, single_dynamic = 2 };

// Motion-type label standing in for text captions; the null/dropped slot is
// appended by the model, not listed here.
enum class MotionLabel : int { none = 0, push = 1, pull = 2, collide = 3 };
constexpr int kLabelVocab = 4;

const char* to_string(Script s);
const char* to_string(CameraKind k);
const char* to_string(SupervisionMode m);

// Axis-aligned textured rectangle living on the fronto-parallel world plane
// z = depth.
struct ObjectSpec {
    double half_w = 0.5, half_h = 0.5;
    double x0 = 0.0, y0 = 0.0;
    double depth = 6.0;
    std::array<double, 3> albedo{1.0, 0.0, 0.0};
    Role role = Role::passive;
};

struct SceneSpec {
    uint64_t seed = 0;
    int height = 32, width = 32, frames = 8;
    CameraIntrinsics intrinsics;
    double background_depth = 10.0;
    int background_texture = 0;
    std::vector<ObjectSpec> objects;
    Script script = Script::none;
    CameraKind camera_kind = CameraKind::static_cam;
    double camera_magnitude = 0.0;   // world units (pan/zoom/mixed) or degrees (orbit)
    double active_speed = 0.0;       // world units per frame
    double motion_dir_x = 1.0, motion_dir_y = 0.0;
    int track_count = 16;
    SupervisionMode mode = SupervisionMode::paired;

    void validate() const;
};

// Per-frame world-plane centers, [frame][object].
using WorldTrajectory = std::vector<std::vector<Vec2>>;

// Fiducial blobs render on a uniform gray disc, radially symmetric in
// image space around the projection of `world`.
constexpr std::array<double, 3> kFiducialBaseGray{0.5, 0.5, 0.49};

struct Fiducial {
    Vec3 world;                  // on the background plane
    std::array<double, 3> color;
    double sigma_px = 0.0;       // Gaussian blob radius, image space
};

struct RenderOut {
    Video clip;                    // T x H x W x 3
    std::vector<DepthMap> depth;   // per frame z-buffer
};

struct Sample {
    Video canonical;       // identity camera at every frame
    Video target;          // camera-program view
    DepthMap depth0;       // canonical frame-0 depth
    CameraPath path;       // target camera path (identity for the canonical stream)
    TrackSet tracks;       // canonical-frame ground truth
    MotionLabel label = MotionLabel::none;
    SupervisionMode mode = SupervisionMode::paired;
    SceneSpec spec;        // echo, enables exact re-simulation
};

// Scripted causal dynamics: the active object follows its script; a passive
// object starts moving at first AABB contact, with the contact-normal
// component of the active velocity damped by 0.9 per frame.
WorldTrajectory simulate(const SceneSpec& spec);

// The four background blobs enabling pose recovery; deterministic from the
// scene geometry.
std::vector<Fiducial> fiducials(const SceneSpec& spec);

std::array<double, 3> background_texture_color(int texture_id, double wx, double wy);

// Analytic painter's rendering of the depth-layered rectangles over the
// textured background plane; z-buffer depths are exact plane distances.
RenderOut render(const SceneSpec& spec, const WorldTrajectory& world,
                 const std::vector<CameraPose>& poses);

// Exact visibility of a world point attached to `object` under one pose.
bool point_visible(const SceneSpec& spec, const WorldTrajectory& world, int frame,
                   const CameraPose& pose, int object, const Vec3& world_point,
                   Vec2* pixel_out = nullptr);

// Ground-truth tracks of gridded object surface points projected into the
// given view. Tracks invisible at frame 0 are dropped. `per_object_quota`
// <= 0 distributes spec.track_count by area. `grid_ids` (optional) receives
// a stable id per kept track so tracks can be matched across views.
TrackSet view_tracks(const SceneSpec& spec, const WorldTrajectory& world,
                     const std::vector<CameraPose>& poses, int per_object_quota = 0,
                     std::vector<int>* grid_ids = nullptr);

std::vector<CameraPose> identity_path(int frames);

// Frame-0 pose is identity; per-frame rotation stays <= 2 degrees and
// translation <= 2% of scene depth. Orbit revolves about the scene centroid.
std::vector<CameraPose> sample_camera_program(CameraKind kind, double magnitude, int frames,
                                              double scene_depth);

Sample make_sample(const SceneSpec& spec);

struct GenConfig {
    int height = 32, width = 32, frames = 8;
    double paired_ratio = 0.5;
    double static_dup_ratio = 0.25;
    double single_dynamic_ratio = 0.25;
    double script_none_ratio = 0.25;
};

SceneSpec random_scene_spec(uint64_t seed, const GenConfig& cfg);

}  // namespace dsv

#endif
