#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "cainet/tensor.hpp"

namespace cainet {

class LabelRangeError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Row-major H x W grid of plain values.
template <typename T>
struct Grid {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<T> values;

    Grid() = default;
    Grid(std::size_t h, std::size_t w, T fill = T{}) : height(h), width(w), values(h * w, fill) {}

    T& operator()(std::size_t y, std::size_t x) { return values[y * width + x]; }
    const T& operator()(std::size_t y, std::size_t x) const { return values[y * width + x]; }
    std::size_t size() const { return values.size(); }
    bool operator==(const Grid&) const = default;
};

/// Semantic class per pixel; class 0 is "unlabeled".
using LabelMap = Grid<std::int32_t>;
/// Values in {0, 1}.
using BinaryMap = Grid<std::uint8_t>;
using FloatMap = Grid<float>;

/// 1 x H x W float tensor holding the grid values.
template <typename T>
Tensor to_tensor(const Grid<T>& grid) {
    std::vector<float> v(grid.values.begin(), grid.values.end());
    return Tensor::from({1, grid.height, grid.width}, std::move(v));
}

}  // namespace cainet
