#ifndef DSV_VIDEO_HPP
#define DSV_VIDEO_HPP

#include <cstdint>
#include <vector>

#include "dsv/error.hpp"

namespace dsv {

// Single frame, float32 channels-last, values nominally in [0, 1].
struct Image {
    int height = 0, width = 0, channels = 0;
    std::vector<float> data;

    Image() = default;
    Image(int h, int w, int c) : height(h), width(w), channels(c) {
        data.assign(static_cast<size_t>(h) * w * c, 0.0f);
    }

    float& at(int y, int x, int c) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    float at(int y, int x, int c) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
};

// Clip, float32, [T][H][W][C] row-major.
struct Video {
    int frames = 0, height = 0, width = 0, channels = 0;
    std::vector<float> data;

    Video() = default;
    Video(int t, int h, int w, int c) : frames(t), height(h), width(w), channels(c) {
        data.assign(static_cast<size_t>(t) * h * w * c, 0.0f);
    }

    float& at(int t, int y, int x, int c) {
        return data[((static_cast<size_t>(t) * height + y) * width + x) * channels + c];
    }
    float at(int t, int y, int x, int c) const {
        return data[((static_cast<size_t>(t) * height + y) * width + x) * channels + c];
    }

    Image frame(int t) const {
        Image img(height, width, channels);
        const size_t n = static_cast<size_t>(height) * width * channels;
        std::copy(data.begin() + t * n, data.begin() + (t + 1) * n, img.data.begin());
        return img;
    }
};

}  // namespace dsv

#endif
