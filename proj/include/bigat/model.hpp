#pragma once

#include <string>
#include <vector>

#include "bigat/layers.hpp"
#include "bigat/scene.hpp"

namespace bigat::model {

using ad::Graph;
using ad::ParamBinder;
using ad::ParameterStore;
using ad::Shape;
using ad::Tensor;
using ad::Value;

// Per-scene noise vector, shared by every pedestrian in the scene.
struct LatentCode {
    std::vector<double> z;
};

// Gaussian posterior over the scene latent.
struct LatentDistribution {
    std::vector<double> mu;
    std::vector<double> log_var;
};

// Generator output: predicted future positions per pedestrian, in the same
// order as the source scene, plus the latent that produced them.
struct PredictedScene {
    std::vector<std::vector<Vec2>> futures; // [N][kFutSteps]
    LatentCode provenance;
};

// Network dimensions. The physical context width equals the CNN's final
// channel count.
struct ModelConfig {
    int64_t emb_dim = 16;      // displacement embedding
    int64_t enc_hidden = 32;   // trajectory encoder LSTM
    int64_t gat_out = 32;      // social context width
    int64_t gat_layers = 2;
    int64_t phys_ctx = 16;     // scene context width (CNN output channels)
    int64_t d_z = 8;           // latent dimension
    int64_t dec_hidden = 64;   // decoder LSTM
    int64_t clf_hidden = 16;   // discriminator classifier hidden width
    int64_t att_hidden = 16;   // physical attention scorer hidden width
    int64_t cnn_c1 = 8;        // first conv channels
    int64_t grid_channels = 1; // input grid channels
    double leaky_slope = 0.2;

    int64_t context_dim() const { return enc_hidden + gat_out + phys_ctx + d_z; }
    std::vector<nn::GatLayerSpec> gat_specs() const;
    nn::GridCnnSpec cnn_spec() const;
    nn::MlpSpec emb_spec() const { return {{2, emb_dim}, nn::Act::kNone, nn::Act::kNone}; }
    nn::MlpSpec att_spec() const {
        return {{phys_ctx + enc_hidden, att_hidden, 1}, nn::Act::kTanh, nn::Act::kNone};
    }
    nn::MlpSpec clf_spec(int64_t in) const {
        return {{in, clf_hidden, 1}, nn::Act::kTanh, nn::Act::kNone};
    }
};

// Registers the generator ("gen."), both discriminators ("disc.local.",
// "disc.global.") and the latent encoder ("lat.") in the store.
void register_model(ParameterStore& store, const ModelConfig& cfg, Rng& rng);

// Candidate future as an in-graph displacement sequence, one [N,2] value per
// step; gradients flow through when it comes from the generator.
struct FutureSeq {
    std::vector<Value> steps; // kFutSteps entries
};

// Ground-truth futures lifted as constants.
FutureSeq lift_futures(Graph& g, const SceneSample& scene);
// Sampled futures (positions) lifted as constants; detaches the sampler.
FutureSeq lift_futures(Graph& g, const SceneSample& scene, const PredictedScene& pred);

// Trajectory encoder shared in structure by all four networks: embeds
// relative displacements, then runs them through an LSTM. Returns the final
// hidden state, one row per pedestrian [N, enc_hidden]. With include_future
// the past and future displacement sequences are concatenated first.
Value encode_social(const ModelConfig& cfg, ParamBinder& params, const std::string& net,
                    Graph& g, const SceneSample& scene, bool include_future,
                    const FutureSeq* future = nullptr);

struct GeneratorOut {
    std::vector<Value> disp;  // emitted displacements, [N,2] per step
    std::vector<Value> pos;   // cumulative positions, [N,2] per step
    FutureSeq future() const { return {disp}; }
    PredictedScene materialize(const LatentCode& z) const;
};

// Full generator: social encoding, social attention stack, physical
// attention over CNN cells, concatenated context [V_s, C_s, C_p, z], then an
// LSTM decoder emitting displacements accumulated from the last observed
// position. z_row is [1, d_z].
GeneratorOut generator_forward(const ModelConfig& cfg, ParamBinder& params, Graph& g,
                               const SceneSample& scene, Value z_row);

// Per-pedestrian realism logits (sigmoid turns them into scores).
Value local_discriminator(const ModelConfig& cfg, ParamBinder& params, Graph& g,
                          const SceneSample& scene, const FutureSeq& future);
Value global_discriminator(const ModelConfig& cfg, ParamBinder& params, Graph& g,
                           const SceneSample& scene, const FutureSeq& future);

struct LatentDistV {
    Value mu;      // [1, d_z]
    Value log_var; // [1, d_z]
};

// Future-trajectory posterior: per-pedestrian LSTM encodings through a shared
// trunk and parallel mean / log-variance heads, max-pooled over pedestrians.
LatentDistV latent_encode(const ModelConfig& cfg, ParamBinder& params, Graph& g,
                          const SceneSample& scene, const FutureSeq& future);

// z = mu + exp(log_var / 2) * eps
Value reparameterize(Graph& g, const LatentDistV& dist, const std::vector<double>& eps);
LatentCode reparameterize(const LatentDistribution& dist, const std::vector<double>& eps);

LatentCode draw_latent(const ModelConfig& cfg, Rng& rng);
Value lift_latent(Graph& g, const LatentCode& z);

// Forward-only conveniences over a frozen store.
PredictedScene generate(const ModelConfig& cfg, ParameterStore& store, const SceneSample& scene,
                        const LatentCode& z);
LatentDistribution infer_latent(const ModelConfig& cfg, ParameterStore& store,
                                const SceneSample& scene, const PredictedScene* candidate = nullptr);
std::vector<double> local_scores(const ModelConfig& cfg, ParameterStore& store,
                                 const SceneSample& scene, const PredictedScene* candidate = nullptr);
std::vector<double> global_scores(const ModelConfig& cfg, ParameterStore& store,
                                  const SceneSample& scene, const PredictedScene* candidate = nullptr);

} // namespace bigat::model
