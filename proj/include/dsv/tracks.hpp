#ifndef DSV_TRACKS_HPP
#define DSV_TRACKS_HPP

#include <cstdint>
#include <vector>

#include "dsv/geometry.hpp"
#include "dsv/linalg.hpp"
#include "dsv/rng.hpp"

namespace dsv {

enum class Role : uint8_t { active = 0, passive = 1 };

// N pixel trajectories over T frames. Every track is visible at frame 0 and
// visible positions lie inside [0,W) x [0,H).
struct TrackSet {
    std::vector<std::vector<Vec2>> positions;     // [N][T]
    std::vector<std::vector<uint8_t>> visible;    // [N][T]
    std::vector<int> object_id;                   // [N]
    std::vector<Role> role;                       // [N]
    int height = 0, width = 0;

    int count() const { return static_cast<int>(positions.size()); }
    int frames() const { return positions.empty() ? 0 : static_cast<int>(positions[0].size()); }
    bool empty() const { return positions.empty(); }

    void push_track(std::vector<Vec2> pos, std::vector<uint8_t> vis, int obj, Role r) {
        positions.push_back(std::move(pos));
        visible.push_back(std::move(vis));
        object_id.push_back(obj);
        role.push_back(r);
    }

    TrackSet select(const std::vector<int>& indices) const;
    void validate() const;
};

// Space-time grid where every pixel touched by a track carries that track's
// correspondence embedding.
struct TrajectoryMap {
    int frames = 0, height = 0, width = 0, dim = 0;
    std::vector<double> embedding;    // [T][H][W][d]
    std::vector<uint8_t> occupancy;   // [T][H][W]

    TrajectoryMap() = default;
    TrajectoryMap(int t, int h, int w, int d)
        : frames(t),
          height(h),
          width(w),
          dim(d),
          embedding(static_cast<size_t>(t) * h * w * d, 0.0),
          occupancy(static_cast<size_t>(t) * h * w, 0) {}

    double* cell(int t, int y, int x) {
        return embedding.data() + ((static_cast<size_t>(t) * height + y) * width + x) * dim;
    }
    const double* cell(int t, int y, int x) const {
        return embedding.data() + ((static_cast<size_t>(t) * height + y) * width + x) * dim;
    }
    bool occupied(int t, int y, int x) const {
        return occupancy[(static_cast<size_t>(t) * height + y) * width + x] != 0;
    }
};

enum class CoarsenMode { object_level, patch };

// Disjoint active/passive partition by role label.
std::pair<TrackSet, TrackSet> decompose_roles(const TrackSet& tracks);

// One uniform draw xi; keeps the active subset iff xi < p, else the passive
// subset. An empty winner falls back to the other subset. `chose_active`
// reports the branch for instrumentation.
TrackSet causal_dropout(const TrackSet& tracks, double p, Rng& rng,
                        bool* chose_active = nullptr);

// Replace each group's per-track motion by the group's mean per-frame
// displacement; frame-0 anchors never move. Groups are objects
// (object_level) or s x s frame-0 cells (patch).
TrackSet coarsen(const TrackSet& tracks, CoarsenMode mode, int patch_size = 8);

// Simulated occlusion / tracking failure: random removal (track 0 exempt)
// plus random truncation after a frame sampled uniformly in [T/4, 3T/4].
TrackSet degrade(const TrackSet& tracks, double drop_prob, double truncate_prob, Rng& rng);

// Fixed sinusoidal embedding of a frame-0 position: d/2 channels per axis,
// alternating sin/cos over a geometric wavelength ladder from 4 px up to
// max(H, W) px.
std::vector<double> track_embedding(const Vec2& frame0_pos, int d_trk, int height, int width);

// Each visible step writes its track's embedding at the rounded pixel.
// Collisions: lowest object id wins, then lowest track index (callers apply
// occlusion_mask upstream when depth ordering matters).
TrajectoryMap rasterize(const TrackSet& tracks, int d_trk);

// Training-time track count: uniform in [500, 2000] at 480x832, scaled by
// pixel-count ratio with a floor of 16.
int sample_track_count(int height, int width, Rng& rng);

}  // namespace dsv

#endif
