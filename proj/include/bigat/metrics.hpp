#pragma once

#include <filesystem>
#include <ostream>
#include <span>

#include "bigat/model.hpp"

namespace bigat::eval {

using model::LatentCode;
using model::ModelConfig;
using model::PredictedScene;
using model::SceneSample;
using model::Vec2;

// Mean Euclidean distance over the predicted timesteps, meters.
double ade(std::span<const Vec2> pred, std::span<const Vec2> truth);
// Euclidean distance at the final predicted timestep.
double fde(std::span<const Vec2> pred, std::span<const Vec2> truth);

struct MetricResult {
    std::string scene;
    int64_t k = 1;
    double ade = 0.0;
    double fde = 0.0;
    int64_t n_pedestrians = 0;
};

// Draws k latents per scene (a deterministic stream per scene index; the
// draws for smaller k are a prefix of those for larger k), picks each
// pedestrian's minimum-ADE sample and reports that sample's FDE. With
// independent_min the ADE and FDE minima are taken independently instead.
std::vector<MetricResult> evaluate_best_of_k(const ModelConfig& cfg, ad::ParameterStore& store,
                                             std::span<const SceneSample> scenes, int64_t k,
                                             uint64_t seed, bool independent_min = false);

// Unweighted mean over per-scene results.
MetricResult macro_average(std::span<const MetricResult> results);

// Ordinary least-squares line fit per pedestrian over the observed steps,
// extrapolated over the prediction horizon.
PredictedScene linear_baseline(const SceneSample& scene);
std::vector<MetricResult> evaluate_linear_baseline(std::span<const SceneSample> scenes);

struct SweepRow {
    int64_t z_index = 0;
    int64_t ped_id = 0;
    int64_t t = 0;
    double x = 0.0;
    double y = 0.0;
};

// Generator outputs for each latent in the grid, flattened to
// (z_index, ped, t, position) rows.
std::vector<SweepRow> latent_sweep(const ModelConfig& cfg, ad::ParameterStore& store,
                                   const SceneSample& scene, std::span<const LatentCode> grid);

// csv: "scene,k,ade,fde,n_pedestrians"
void write_metrics_csv(std::span<const MetricResult> results, std::ostream& os);
// csv: "z_index,ped_id,t,x,y"
void write_sweep_csv(std::span<const SweepRow> rows, std::ostream& os);
// Observed tracks solid, generated tracks dashed, one color per pedestrian.
void write_sweep_svg(const SceneSample& scene, std::span<const SweepRow> rows,
                     const std::filesystem::path& path);

} // namespace bigat::eval
