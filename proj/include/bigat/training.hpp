#pragma once

#include <ostream>
#include <span>
#include <string_view>

#include "bigat/model.hpp"

namespace bigat::train {

using ad::Graph;
using ad::ParamBinder;
using ad::ParameterStore;
using ad::Value;
using model::LatentCode;
using model::ModelConfig;
using model::SceneSample;

struct LossWeights {
    double lambda_z = 0.5;
    double lambda_traj = 10.0;
    double lambda_kl = 0.01;
};

// The five objective terms, their weighted total, and the discriminators'
// own training losses, averaged per pedestrian then per scene.
struct LossReport {
    double gan1 = 0.0;
    double z = 0.0;
    double gan2 = 0.0;
    double traj = 0.0;
    double kl = 0.0;
    double total = 0.0;
    double d_local = 0.0;
    double d_global = 0.0;
};

struct OptimizerConfig {
    double lr_gen = 1e-3;  // generator and latent encoder
    double lr_disc = 1e-3; // both discriminators
    double beta1 = 0.5;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int64_t batch_scenes = 8;
    int64_t variety_k = 1;
    bool use_variety = false;       // add a best-of-k term to the generator objective
    bool lz_updates_encoder = true; // false blocks the noise-reconstruction loss from E
};

// Binary cross-entropy against a constant label, computed from logits via
// softplus for stability, averaged over pedestrians. logits [N,1] -> scalar.
Value bce_with_logits(Graph& g, Value logits, double label);

// Noise-first pass: sample z, generate, score the fakes as real
// (non-saturating), and reconstruct the noise from the generated future.
// lz_params controls whether the latent encoder is trainable inside the
// reconstruction term.
struct NoisePath {
    Value gan1;
    Value z_loss;
    model::GeneratorOut gen;
};
NoisePath loss_path_noise(const ModelConfig& cfg, ParamBinder& params, ParamBinder& lz_params,
                          Graph& g, const SceneSample& scene, const LatentCode& z);

// Trajectory-first pass: encode the ground-truth future, reparameterize,
// regenerate, and penalize trajectory error plus posterior divergence.
struct TrajPath {
    Value gan2;
    Value traj;
    Value kl;
    model::LatentDistV dist;
    model::GeneratorOut gen;
};
TrajPath loss_path_trajectory(const ModelConfig& cfg, ParamBinder& params, Graph& g,
                              const SceneSample& scene, const std::vector<double>& eps);

// Both discriminators' own losses: real futures labelled 1, each provided
// fake labelled 0, real and fake terms averaged pairwise.
struct DiscLosses {
    Value local;
    Value global;
};
DiscLosses discriminator_losses(const ModelConfig& cfg, ParamBinder& params, Graph& g,
                                const SceneSample& scene,
                                std::span<const model::PredictedScene> fakes);

// Value-only wrappers over frozen parameters, for inspection and tests.
LossReport loss_path_noise_report(const ModelConfig& cfg, ParameterStore& store,
                                  const SceneSample& scene, const LatentCode& z);
LossReport loss_path_trajectory_report(const ModelConfig& cfg, ParameterStore& store,
                                       const SceneSample& scene, const std::vector<double>& eps);
std::pair<double, double> discriminator_loss_values(const ModelConfig& cfg,
                                                    ParameterStore& store,
                                                    const SceneSample& scene,
                                                    std::span<const model::PredictedScene> fakes);

// Closed-form KL divergence of N(mu, diag(exp(log_var))) from N(0, I).
double kl_divergence(const model::LatentDistribution& dist);

// Adaptive-moment update over every parameter whose name starts with the
// scope prefix. Scopes beginning with "disc" take lr_disc, everything else
// lr_gen. Requires populated gradients; clears them afterwards.
void adam_step(ParameterStore& store, const OptimizerConfig& opt, std::string_view scope);

// One alternating min-max step over a batch of scenes: discriminator update
// on detached samples, then a joint generator + latent-encoder update on the
// five-term objective. Returns batch-averaged losses.
LossReport train_step(ParameterStore& store, const ModelConfig& cfg,
                      std::span<const SceneSample> batch, const LossWeights& weights,
                      const OptimizerConfig& opt, Rng& rng);

// Minimum mean trajectory L2 error over k independently drawn latents.
double variety_loss(const ModelConfig& cfg, ParameterStore& store, const SceneSample& scene,
                    int64_t k, Rng& rng);

// Mean per-pedestrian L2 error of generated vs ground-truth futures.
double trajectory_error_value(const SceneSample& scene, const model::PredictedScene& pred);

// CSV log line: step,gan1,z,gan2,traj,kl,d_local,d_global,total
void append_log_line(std::ostream& os, int64_t step, const LossReport& report);

} // namespace bigat::train
