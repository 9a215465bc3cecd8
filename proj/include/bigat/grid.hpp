#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "bigat/errors.hpp"

namespace bigat::nn {

// Pre-rasterized scene feature grid: H x W cells of C channels, anchored in
// meter space. Stands in for raw scene imagery.
struct FeatureGrid {
    int64_t h = 0, w = 0, c = 0;
    double origin_x = 0.0, origin_y = 0.0;
    double cell_size = 1.0;
    std::vector<double> cells; // row-major [h][w][c]

    double at(int64_t y, int64_t x, int64_t ch) const {
        return cells[static_cast<size_t>((y * w + x) * c + ch)];
    }
    double& at(int64_t y, int64_t x, int64_t ch) {
        return cells[static_cast<size_t>((y * w + x) * c + ch)];
    }

    void validate() const;
};

// Plain-text format: header "GRID H W C origin_x origin_y cell_size"
// followed by H*W*C whitespace-separated values in row-major order.
FeatureGrid load_grid(const std::filesystem::path& path);
void save_grid(const FeatureGrid& grid, const std::filesystem::path& path);

} // namespace bigat::nn
