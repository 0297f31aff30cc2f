#include "dsv/tracks.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace dsv {

TrackSet TrackSet::select(const std::vector<int>& indices) const {
    TrackSet out;
    out.height = height;
    out.width = width;
    for (int i : indices) {
        out.positions.push_back(positions[i]);
        out.visible.push_back(visible[i]);
        out.object_id.push_back(object_id[i]);
        out.role.push_back(role[i]);
    }
    return out;
}

void TrackSet::validate() const {
    const size_t n = positions.size();
    require(visible.size() == n && object_id.size() == n && role.size() == n,
            "trackset: ragged fields");
    for (size_t i = 0; i < n; ++i) {
        require(positions[i].size() == visible[i].size(), "trackset: ragged track");
        require(!visible[i].empty() && visible[i][0] != 0,
                "trackset: every track must be visible at frame 0");
        for (size_t t = 0; t < positions[i].size(); ++t) {
            if (!visible[i][t]) continue;
            const Vec2& p = positions[i][t];
            require(p.x >= 0.0 && p.x < width && p.y >= 0.0 && p.y < height,
                    "trackset: visible position outside image");
        }
    }
}

std::pair<TrackSet, TrackSet> decompose_roles(const TrackSet& tracks) {
    std::vector<int> act, pas;
    for (int i = 0; i < tracks.count(); ++i) {
        (tracks.role[i] == Role::active ? act : pas).push_back(i);
    }
    return {tracks.select(act), tracks.select(pas)};
}

TrackSet causal_dropout(const TrackSet& tracks, double p, Rng& rng, bool* chose_active) {
    require(p >= 0.0 && p <= 1.0, "causal_dropout: p outside [0,1]");
    auto [active, passive] = decompose_roles(tracks);
    const double xi = rng.uniform();  // exactly one draw
    bool keep_active = xi < p;
    if (keep_active && active.empty()) keep_active = false;
    if (!keep_active && passive.empty()) keep_active = true;
    if (chose_active) *chose_active = keep_active;
    return keep_active ? active : passive;
}

TrackSet coarsen(const TrackSet& tracks, CoarsenMode mode, int patch_size) {
    require(!tracks.empty(), "coarsen: empty track set");
    const int n = tracks.count();
    const int t_frames = tracks.frames();

    // Group key per track: object id, or flattened s x s frame-0 cell.
    std::vector<int64_t> key(n);
    for (int i = 0; i < n; ++i) {
        if (mode == CoarsenMode::object_level) {
            key[i] = tracks.object_id[i];
        } else {
            const int cx = static_cast<int>(tracks.positions[i][0].x) / patch_size;
            const int cy = static_cast<int>(tracks.positions[i][0].y) / patch_size;
            key[i] = static_cast<int64_t>(cy) * ((tracks.width + patch_size - 1) / patch_size + 1) + cx;
        }
    }

    std::map<int64_t, std::vector<int>> groups;
    for (int i = 0; i < n; ++i) groups[key[i]].push_back(i);

    TrackSet out = tracks;
    for (const auto& [k, members] : groups) {
        const double inv = 1.0 / static_cast<double>(members.size());
        for (int t = 0; t < t_frames; ++t) {
            Vec2 mean{0.0, 0.0};
            uint8_t all_visible = 1;
            for (int i : members) {
                mean = mean + (tracks.positions[i][t] - tracks.positions[i][0]);
                if (!tracks.visible[i][t]) all_visible = 0;
            }
            mean = mean * inv;
            for (int i : members) {
                out.positions[i][t] = tracks.positions[i][0] + mean;
                out.visible[i][t] = t == 0 ? tracks.visible[i][0] : all_visible;
            }
        }
    }
    return out;
}

TrackSet degrade(const TrackSet& tracks, double drop_prob, double truncate_prob, Rng& rng) {
    require(drop_prob >= 0.0 && drop_prob <= 1.0, "degrade: drop_prob outside [0,1]");
    require(truncate_prob >= 0.0 && truncate_prob <= 1.0, "degrade: truncate_prob outside [0,1]");
    const int n = tracks.count();
    const int t_frames = tracks.frames();

    std::vector<int> keep;
    for (int i = 0; i < n; ++i) {
        if (i == 0) {
            keep.push_back(i);  // first track is exempt: at least one survives
            continue;
        }
        if (!rng.bernoulli(drop_prob)) keep.push_back(i);
    }

    TrackSet out = tracks.select(keep);
    for (int i = 0; i < out.count(); ++i) {
        if (!rng.bernoulli(truncate_prob)) continue;
        const int lo = t_frames / 4;
        const int hi = (3 * t_frames) / 4;
        const int cut = static_cast<int>(rng.uniform_int(lo, hi));
        for (int t = cut + 1; t < t_frames; ++t) out.visible[i][t] = 0;
    }
    return out;
}

std::vector<double> track_embedding(const Vec2& frame0_pos, int d_trk, int height, int width) {
    require(d_trk > 0 && d_trk % 2 == 0, "track_embedding: d_trk must be even");
    const int half = d_trk / 2;
    const int n_lambda = (half + 1) / 2;
    const double lambda_min = 4.0;
    const double lambda_max = std::max(4.0, static_cast<double>(std::max(height, width)));
    const double two_pi = 6.283185307179586476925286766559;

    std::vector<double> emb(d_trk);
    const double pos[2] = {frame0_pos.x, frame0_pos.y};
    for (int axis = 0; axis < 2; ++axis) {
        for (int j = 0; j < half; ++j) {
            const int li = j / 2;
            const double frac = n_lambda > 1 ? static_cast<double>(li) / (n_lambda - 1) : 0.0;
            const double lambda = lambda_min * std::pow(lambda_max / lambda_min, frac);
            const double phase = two_pi * pos[axis] / lambda;
            emb[axis * half + j] = (j % 2 == 0) ? std::sin(phase) : std::cos(phase);
        }
    }
    return emb;
}

TrajectoryMap rasterize(const TrackSet& tracks, int d_trk) {
    if (d_trk <= 0 || d_trk % 2 != 0) {
        fail_invalid("rasterize: d_trk must be even and positive");
    }
    const int t_frames = tracks.frames();
    TrajectoryMap map(t_frames, tracks.height, tracks.width, d_trk);
    if (tracks.empty()) return map;

    std::vector<std::vector<double>> embeddings(tracks.count());
    for (int i = 0; i < tracks.count(); ++i) {
        embeddings[i] = track_embedding(tracks.positions[i][0], d_trk, tracks.height, tracks.width);
    }

    // winner[t][pixel] = track index currently written there.
    std::vector<int> winner(static_cast<size_t>(t_frames) * tracks.height * tracks.width, -1);
    for (int i = 0; i < tracks.count(); ++i) {
        for (int t = 0; t < t_frames; ++t) {
            if (!tracks.visible[i][t]) continue;
            const Vec2& p = tracks.positions[i][t];
            const int x = std::clamp(static_cast<int>(std::lround(p.x)), 0, tracks.width - 1);
            const int y = std::clamp(static_cast<int>(std::lround(p.y)), 0, tracks.height - 1);
            const size_t cell = (static_cast<size_t>(t) * tracks.height + y) * tracks.width + x;
            const int prev = winner[cell];
            if (prev >= 0) {
                if (tracks.object_id[prev] < tracks.object_id[i]) continue;
                if (tracks.object_id[prev] == tracks.object_id[i] && prev < i) continue;
            }
            winner[cell] = i;
            std::copy(embeddings[i].begin(), embeddings[i].end(), map.cell(t, y, x));
            map.occupancy[cell] = 1;
        }
    }
    return map;
}

int sample_track_count(int height, int width, Rng& rng) {
    const int base = static_cast<int>(rng.uniform_int(500, 2000));
    const double scale = static_cast<double>(height) * width / (480.0 * 832.0);
    return std::max(16, static_cast<int>(std::lround(base * scale)));
}

}  // namespace dsv
