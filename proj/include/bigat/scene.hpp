#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bigat/errors.hpp"
#include "bigat/grid.hpp"

namespace bigat::model {

inline constexpr int64_t kObsSteps = 8;  // observed positions per window
inline constexpr int64_t kFutSteps = 12; // future positions per window
inline constexpr double kTimestep = 0.4; // seconds between positions

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double norm() const;
};

// One pedestrian's track split into observed past and ground-truth future,
// in meters, sampled every 0.4 s.
struct TrajectoryWindow {
    int64_t ped_id = 0;
    std::vector<Vec2> observed; // exactly kObsSteps
    std::vector<Vec2> future;   // exactly kFutSteps

    void validate() const;
    Vec2 last_observed() const { return observed.back(); }
    // Displacement of the final observed step.
    Vec2 last_step() const {
        return observed[static_cast<size_t>(kObsSteps - 1)] -
               observed[static_cast<size_t>(kObsSteps - 2)];
    }
};

// All pedestrians co-visible over one 20-step window, sharing a time origin,
// plus an optional scene feature grid.
struct SceneSample {
    std::string scene_id;
    std::vector<TrajectoryWindow> pedestrians;
    std::optional<nn::FeatureGrid> grid;

    int64_t size() const { return static_cast<int64_t>(pedestrians.size()); }
    void validate() const;
};

// Relative-displacement encoding: first element is (0,0), then consecutive
// differences. The cumulative sum from the first position reconstructs the
// track exactly.
std::vector<Vec2> to_displacements(const std::vector<Vec2>& positions);
std::vector<Vec2> from_displacements(Vec2 start, const std::vector<Vec2>& displacements);

// Displacements of the future segment; the first step is anchored at the
// last observed position so the sequence matches what the decoder emits.
std::vector<Vec2> future_displacements(const TrajectoryWindow& window);
std::vector<Vec2> future_displacements(Vec2 last_observed, const std::vector<Vec2>& future);

} // namespace bigat::model
