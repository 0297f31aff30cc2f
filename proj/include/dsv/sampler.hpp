#ifndef DSV_SAMPLER_HPP
#define DSV_SAMPLER_HPP

#include <functional>
#include <utility>
#include <vector>

#include "dsv/model.hpp"

namespace dsv {

using JointVelocityField = std::function<std::pair<LatentGrid, LatentGrid>(
    const LatentGrid&, const LatentGrid&, double)>;

// Euler steps on the uniform grid t: 1 -> 0, z_{t-dt} = z_t - dt * v(z_t, t),
// both streams advancing jointly. Aborts on a non-finite latent with step
// diagnostics.
std::pair<LatentGrid, LatentGrid> euler_integrate_joint(const JointVelocityField& velocity,
                                                        LatentGrid z_can, LatentGrid z_tar,
                                                        int steps);

struct GeneratedClips {
    Video target;     // handed to the user
    Video canonical;  // the "virtual anchor" stream
};

// Joint dual-stream sampling from seeded noise to video. The canonical
// bundle must carry the identity camera; the target bundle must carry an
// empty trajectory condition.
GeneratedClips sample(DualStreamModel& model, const ConditionBundle& bundle_can,
                      const ConditionBundle& bundle_tar, const DepthMap& depth0, int steps,
                      uint64_t seed);

// A user stroke: frame-0 anchored positions, one per frame.
struct Stroke {
    std::vector<Vec2> points;
    Role role = Role::active;
};

// Expands sparse strokes over their objects' masks into the configured
// inference track density, applies occlusion-aware masking from the
// first-frame depth, and builds the two condition bundles.
std::pair<ConditionBundle, ConditionBundle> prepare_user_condition(
    const std::vector<Stroke>& strokes, const DepthMap& depth0,
    const std::vector<std::vector<uint8_t>>& object_masks, const Image& first_frame,
    const CameraPath& camera_program, int d_trk, std::optional<int> label = std::nullopt);

// Inference track budget: 1500 at 480x832, scaled by pixel count, floor 16.
int inference_track_count(int height, int width);

}  // namespace dsv

#endif
