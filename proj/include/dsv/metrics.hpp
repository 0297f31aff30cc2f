#ifndef DSV_METRICS_HPP
#define DSV_METRICS_HPP

#include <array>
#include <optional>
#include <vector>

#include "dsv/geometry.hpp"
#include "dsv/synth.hpp"
#include "dsv/tracks.hpp"
#include "dsv/video.hpp"

namespace dsv {

// Color-mass detection over a known palette: a pixel contributes to the
// target color only when that color is its nearest palette entry and lies
// within the detection radius. Synthworld's unique albedos make this a
// tracker-free object detector.
struct ColorDetector {
    std::vector<std::array<double, 3>> palette;
    double radius2 = 0.10;
    double min_mass = 2.0;

    std::optional<Vec2> centroid(const Video& clip, int frame,
                                 const std::array<double, 3>& color,
                                 double* mass_out = nullptr) const;
};

struct EpeResult {
    double median_px = 0.0;
    int steps_evaluated = 0;
    int steps_undetected = 0;
};

// Median l2 distance between detected color-mass centroids and ground-truth
// per-object track centroids, over every (object, frame) step. Undetected
// steps are excluded and counted. Throws metric-undefined when nothing is
// detectable.
EpeResult epe(const Video& generated, const TrackSet& gt_tracks,
              const std::vector<std::array<double, 3>>& object_colors,
              const ColorDetector& detector);

struct CameraErrorResult {
    double median_rotation_deg = 0.0;
    double median_translation = 0.0;
    int frames_used = 0;
};

// Per frame: detect the four fiducial blobs, recover the pose by planar
// homography DLT with orthonormalization, and compare against the ground
// truth. Medians over frames with all four detections; requires >= 3 usable
// frames.
CameraErrorResult camera_error(const Video& generated, const CameraPath& gt_path,
                               const std::vector<Fiducial>& fiducials,
                               const ColorDetector& detector);

// Pose from >= 4 coplanar world points (shared z) and their pixels.
CameraPose pnp_planar(const std::vector<Vec3>& world_points, const std::vector<Vec2>& pixels,
                      const CameraIntrinsics& intr);

enum class CausalityMode { forward, inverse };

struct CausalityReport {
    CausalityMode mode = CausalityMode::forward;
    // forward: the passive object's realized displacement vs ground truth.
    double passive_disp_px = 0.0;
    double gt_passive_disp_px = 0.0;
    double direction_cosine = 0.0;
    // inverse: the active object's realized displacement and contact order.
    double active_disp_px = 0.0;
    int contact_frame = -1;
    int passive_onset_frame = -1;
    bool contact_before_onset = false;
};

// Probes a generated canonical-view clip against the sample's ground truth.
CausalityReport causality_probe(const Video& generated, const Sample& sample,
                                CausalityMode mode, const ColorDetector& detector);

ColorDetector detector_for(const SceneSpec& spec);

}  // namespace dsv

#endif
