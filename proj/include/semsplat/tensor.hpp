#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "semsplat/errors.hpp"

namespace semsplat {

/// Dense row-major H x W x C array. Pixel (y, x) channel c lives at
/// ((y * width) + x) * channels + c.
template <typename T>
struct Tensor3 {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<T> data;

    Tensor3() = default;
    Tensor3(int h, int w, int c, T fill = T{})
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, fill) {}

    std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    T& at(int y, int x, int c = 0) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    const T& at(int y, int x, int c = 0) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    std::span<T> pixel(std::size_t index) {
        return {data.data() + index * channels, static_cast<std::size_t>(channels)};
    }
    std::span<const T> pixel(std::size_t index) const {
        return {data.data() + index * channels, static_cast<std::size_t>(channels)};
    }

    template <typename U>
    bool same_shape(const Tensor3<U>& other) const {
        return height == other.height && width == other.width && channels == other.channels;
    }
};

using Image = Tensor3<double>;
using FeatureMap = Tensor3<double>;
/// Single-channel class/instance indices. 255 is the ignore value.
using LabelMap = Tensor3<std::uint8_t>;

inline constexpr std::uint8_t kIgnoreLabel = 255;

template <typename A, typename B>
void require_same_shape(const Tensor3<A>& a, const Tensor3<B>& b, const std::string& what) {
    if (!a.same_shape(b)) {
        fail(ErrorKind::ShapeMismatch,
             what + ": " + std::to_string(a.height) + "x" + std::to_string(a.width) + "x" +
                 std::to_string(a.channels) + " vs " + std::to_string(b.height) + "x" +
                 std::to_string(b.width) + "x" + std::to_string(b.channels));
    }
}

} // namespace semsplat
