#include "bigat/model.hpp"

#include <cmath>

namespace bigat::model {

using namespace bigat::nn;

double Vec2::norm() const { return std::hypot(x, y); }

void TrajectoryWindow::validate() const {
    if (static_cast<int64_t>(observed.size()) != kObsSteps)
        throw ContractError("window for ped " + std::to_string(ped_id) + " has " +
                            std::to_string(observed.size()) + " observed steps, expected " +
                            std::to_string(kObsSteps));
    if (!future.empty() && static_cast<int64_t>(future.size()) != kFutSteps)
        throw ContractError("window for ped " + std::to_string(ped_id) + " has " +
                            std::to_string(future.size()) + " future steps, expected " +
                            std::to_string(kFutSteps));
    for (const Vec2& p : observed)
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw NumericError("non-finite observed position for ped " + std::to_string(ped_id));
    for (const Vec2& p : future)
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw NumericError("non-finite future position for ped " + std::to_string(ped_id));
}

void SceneSample::validate() const {
    if (pedestrians.empty()) throw ContractError("scene '" + scene_id + "' has no pedestrians");
    for (const TrajectoryWindow& w : pedestrians) w.validate();
    if (grid) grid->validate();
}

std::vector<Vec2> to_displacements(const std::vector<Vec2>& positions) {
    std::vector<Vec2> out(positions.size());
    for (size_t t = 1; t < positions.size(); ++t) out[t] = positions[t] - positions[t - 1];
    return out; // out[0] stays (0,0)
}

std::vector<Vec2> from_displacements(Vec2 start, const std::vector<Vec2>& displacements) {
    std::vector<Vec2> out(displacements.size());
    Vec2 p = start;
    for (size_t t = 0; t < displacements.size(); ++t) {
        p = p + displacements[t];
        out[t] = p;
    }
    return out;
}

std::vector<Vec2> future_displacements(Vec2 last_observed, const std::vector<Vec2>& future) {
    std::vector<Vec2> out(future.size());
    Vec2 prev = last_observed;
    for (size_t t = 0; t < future.size(); ++t) {
        out[t] = future[t] - prev;
        prev = future[t];
    }
    return out;
}

std::vector<Vec2> future_displacements(const TrajectoryWindow& window) {
    return future_displacements(window.last_observed(), window.future);
}

std::vector<nn::GatLayerSpec> ModelConfig::gat_specs() const {
    std::vector<nn::GatLayerSpec> specs;
    for (int64_t l = 0; l < gat_layers; ++l)
        specs.emplace_back(l == 0 ? enc_hidden : gat_out, gat_out, leaky_slope);
    return specs;
}

nn::GridCnnSpec ModelConfig::cnn_spec() const {
    return nn::GridCnnSpec::standard(grid_channels, cnn_c1, phys_ctx);
}

namespace {

void register_encoder(ParameterStore& store, const ModelConfig& cfg, const std::string& net,
                      Rng& rng) {
    register_mlp(store, net + ".emb", cfg.emb_spec(), rng);
    register_lstm(store, net + ".enc", {cfg.emb_dim, cfg.enc_hidden}, rng);
}

void register_scene_context(ParameterStore& store, const ModelConfig& cfg,
                            const std::string& net, Rng& rng) {
    register_grid_cnn(store, net + ".cnn", cfg.cnn_spec(), rng);
    register_mlp(store, net + ".att", cfg.att_spec(), rng);
}

} // namespace

void register_model(ParameterStore& store, const ModelConfig& cfg, Rng& rng) {
    // generator
    register_encoder(store, cfg, "gen", rng);
    register_gat_stack(store, "gen.gat", cfg.gat_specs(), rng);
    register_scene_context(store, cfg, "gen", rng);
    register_mlp(store, "gen.init",
                 {{cfg.context_dim(), cfg.dec_hidden}, nn::Act::kNone, nn::Act::kTanh}, rng);
    register_mlp(store, "gen.demb", cfg.emb_spec(), rng);
    register_lstm(store, "gen.dec", {cfg.emb_dim, cfg.dec_hidden}, rng);
    register_mlp(store, "gen.out", {{cfg.dec_hidden, 2}, nn::Act::kNone, nn::Act::kNone}, rng);

    // local discriminator: trajectory encoder plus classifier head
    register_encoder(store, cfg, "disc.local", rng);
    register_mlp(store, "disc.local.clf", cfg.clf_spec(cfg.enc_hidden), rng);

    // global discriminator: mirrors the generator's context assembly
    register_encoder(store, cfg, "disc.global", rng);
    register_gat_stack(store, "disc.global.gat", cfg.gat_specs(), rng);
    register_scene_context(store, cfg, "disc.global", rng);
    register_mlp(store, "disc.global.clf",
                 cfg.clf_spec(cfg.enc_hidden + cfg.gat_out + cfg.phys_ctx), rng);

    // latent encoder: future-trajectory LSTM, shared trunk, parallel heads
    register_encoder(store, cfg, "lat", rng);
    register_mlp(store, "lat.trunk",
                 {{cfg.enc_hidden, cfg.enc_hidden}, nn::Act::kNone, nn::Act::kTanh}, rng);
    register_mlp(store, "lat.mu", {{cfg.enc_hidden, cfg.d_z}, nn::Act::kNone, nn::Act::kNone},
                 rng);
    register_mlp(store, "lat.sigma", {{cfg.enc_hidden, cfg.d_z}, nn::Act::kNone, nn::Act::kNone},
                 rng);
}

namespace {

// Stacks one displacement step across pedestrians as an [N,2] constant.
Tensor disp_step(const std::vector<std::vector<Vec2>>& per_ped, size_t t) {
    Tensor out{Shape{static_cast<int64_t>(per_ped.size()), 2}};
    for (size_t i = 0; i < per_ped.size(); ++i) {
        out.at(static_cast<int64_t>(i), 0) = per_ped[i][t].x;
        out.at(static_cast<int64_t>(i), 1) = per_ped[i][t].y;
    }
    return out;
}

std::vector<Value> past_steps(Graph& g, const SceneSample& scene) {
    std::vector<std::vector<Vec2>> disp;
    disp.reserve(scene.pedestrians.size());
    for (const TrajectoryWindow& w : scene.pedestrians) disp.push_back(to_displacements(w.observed));
    std::vector<Value> steps;
    steps.reserve(static_cast<size_t>(kObsSteps));
    for (int64_t t = 0; t < kObsSteps; ++t)
        steps.push_back(g.constant(disp_step(disp, static_cast<size_t>(t))));
    return steps;
}

} // namespace

FutureSeq lift_futures(Graph& g, const SceneSample& scene) {
    std::vector<std::vector<Vec2>> disp;
    for (const TrajectoryWindow& w : scene.pedestrians) {
        if (static_cast<int64_t>(w.future.size()) != kFutSteps)
            throw ContractError("scene '" + scene.scene_id + "': ped " +
                                std::to_string(w.ped_id) + " has no future trajectory");
        disp.push_back(future_displacements(w));
    }
    FutureSeq seq;
    for (int64_t t = 0; t < kFutSteps; ++t)
        seq.steps.push_back(g.constant(disp_step(disp, static_cast<size_t>(t))));
    return seq;
}

FutureSeq lift_futures(Graph& g, const SceneSample& scene, const PredictedScene& pred) {
    if (pred.futures.size() != scene.pedestrians.size())
        throw ContractError("candidate futures count " + std::to_string(pred.futures.size()) +
                            " does not match scene size " +
                            std::to_string(scene.pedestrians.size()));
    std::vector<std::vector<Vec2>> disp;
    for (size_t i = 0; i < pred.futures.size(); ++i)
        disp.push_back(
            future_displacements(scene.pedestrians[i].last_observed(), pred.futures[i]));
    FutureSeq seq;
    for (int64_t t = 0; t < kFutSteps; ++t)
        seq.steps.push_back(g.constant(disp_step(disp, static_cast<size_t>(t))));
    return seq;
}

Value encode_social(const ModelConfig& cfg, ParamBinder& params, const std::string& net,
                    Graph& g, const SceneSample& scene, bool include_future,
                    const FutureSeq* future) {
    scene.validate();
    std::vector<Value> steps = past_steps(g, scene);
    if (include_future) {
        FutureSeq truth;
        const FutureSeq* src = future;
        if (!src) {
            truth = lift_futures(g, scene); // throws if ground truth is absent
            src = &truth;
        }
        if (static_cast<int64_t>(src->steps.size()) != kFutSteps)
            throw ContractError("candidate future has " + std::to_string(src->steps.size()) +
                                " steps, expected " + std::to_string(kFutSteps));
        steps.insert(steps.end(), src->steps.begin(), src->steps.end());
    }
    std::vector<Value> embedded;
    embedded.reserve(steps.size());
    for (const Value& s : steps)
        embedded.push_back(mlp_forward(cfg.emb_spec(), params, net + ".emb", s));
    auto [outs, final_state] =
        lstm_forward({cfg.emb_dim, cfg.enc_hidden}, params, net + ".enc", embedded);
    return final_state.h;
}

namespace {

// Flattened scene cells for physical attention; a single zero cell when the
// scene carries no grid, so the context path stays wired either way.
Value scene_cells(const ModelConfig& cfg, ParamBinder& params, const std::string& net, Graph& g,
                  const SceneSample& scene) {
    if (!scene.grid) return g.constant(Tensor{Shape{1, cfg.phys_ctx}});
    return grid_cnn(cfg.cnn_spec(), params, net + ".cnn", nn::grid_to_value(g, *scene.grid));
}

// Per-pedestrian physical context rows stacked to [N, phys_ctx].
Value physical_context(const ModelConfig& cfg, ParamBinder& params, const std::string& net,
                       Graph& g, Value cells, Value vs) {
    int64_t n = vs.shape()[0];
    std::vector<Value> rows;
    rows.reserve(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        Value vs_i = g.slice(vs, {i, 0}, {1, cfg.enc_hidden});
        rows.push_back(physical_attention(cfg.att_spec(), params, net + ".att", cells, vs_i));
    }
    return g.concat(rows, 0);
}

} // namespace

GeneratorOut generator_forward(const ModelConfig& cfg, ParamBinder& params, Graph& g,
                               const SceneSample& scene, Value z_row) {
    if (z_row.shape().rank() != 2 || z_row.shape()[0] != 1 || z_row.shape()[1] != cfg.d_z)
        throw ContractError("latent must be [1," + std::to_string(cfg.d_z) + "], got " +
                            z_row.shape().str());
    int64_t n = scene.size();

    Value vs = encode_social(cfg, params, "gen", g, scene, false);
    auto gat_specs = cfg.gat_specs();
    Value cs = gat_stack(gat_specs, params, "gen.gat", vs);
    Value cells = scene_cells(cfg, params, "gen", g, scene);
    Value cp = physical_context(cfg, params, "gen", g, cells, vs);
    Value zb = g.broadcast(g.reshape(z_row, Shape{cfg.d_z}), Shape{n, cfg.d_z});
    std::vector<Value> ctx_parts{vs, cs, cp, zb};
    Value context = g.concat(ctx_parts, 1);

    nn::LstmSpec dec_spec{cfg.emb_dim, cfg.dec_hidden};
    nn::LstmState state{
        mlp_forward({{cfg.context_dim(), cfg.dec_hidden}, nn::Act::kNone, nn::Act::kTanh},
                    params, "gen.init", context),
        g.constant(Tensor{Shape{n, cfg.dec_hidden}})};

    Tensor prev_disp{Shape{n, 2}};
    Tensor start_pos{Shape{n, 2}};
    for (int64_t i = 0; i < n; ++i) {
        const TrajectoryWindow& w = scene.pedestrians[static_cast<size_t>(i)];
        Vec2 d = w.last_step();
        Vec2 p = w.last_observed();
        prev_disp.at(i, 0) = d.x;
        prev_disp.at(i, 1) = d.y;
        start_pos.at(i, 0) = p.x;
        start_pos.at(i, 1) = p.y;
    }

    GeneratorOut out;
    Value disp = g.constant(prev_disp);
    Value pos = g.constant(start_pos);
    MlpSpec out_spec{{cfg.dec_hidden, 2}, nn::Act::kNone, nn::Act::kNone};
    for (int64_t t = 0; t < kFutSteps; ++t) {
        Value x = mlp_forward(cfg.emb_spec(), params, "gen.demb", disp);
        state = lstm_cell(dec_spec, params, "gen.dec", x, state);
        disp = mlp_forward(out_spec, params, "gen.out", state.h);
        pos = g.add(pos, disp);
        out.disp.push_back(disp);
        out.pos.push_back(pos);
    }
    return out;
}

PredictedScene GeneratorOut::materialize(const LatentCode& z) const {
    PredictedScene scene;
    scene.provenance = z;
    int64_t n = pos.front().shape()[0];
    scene.futures.assign(static_cast<size_t>(n), {});
    for (int64_t i = 0; i < n; ++i) {
        auto& track = scene.futures[static_cast<size_t>(i)];
        track.reserve(pos.size());
        for (const Value& p : pos) track.push_back({p.data().at(i, 0), p.data().at(i, 1)});
    }
    return scene;
}

Value local_discriminator(const ModelConfig& cfg, ParamBinder& params, Graph& g,
                          const SceneSample& scene, const FutureSeq& future) {
    Value v = encode_social(cfg, params, "disc.local", g, scene, true, &future);
    return mlp_forward(cfg.clf_spec(cfg.enc_hidden), params, "disc.local.clf", v);
}

Value global_discriminator(const ModelConfig& cfg, ParamBinder& params, Graph& g,
                           const SceneSample& scene, const FutureSeq& future) {
    Value v = encode_social(cfg, params, "disc.global", g, scene, true, &future);
    auto gat_specs = cfg.gat_specs();
    Value cs = gat_stack(gat_specs, params, "disc.global.gat", v);
    Value cells = scene_cells(cfg, params, "disc.global", g, scene);
    Value cp = physical_context(cfg, params, "disc.global", g, cells, v);
    std::vector<Value> parts{v, cs, cp};
    Value feat = g.concat(parts, 1);
    return mlp_forward(cfg.clf_spec(cfg.enc_hidden + cfg.gat_out + cfg.phys_ctx), params,
                       "disc.global.clf", feat);
}

LatentDistV latent_encode(const ModelConfig& cfg, ParamBinder& params, Graph& g,
                          const SceneSample& scene, const FutureSeq& future) {
    if (scene.pedestrians.empty()) throw ContractError("latent_encode: empty scene");
    if (static_cast<int64_t>(future.steps.size()) != kFutSteps)
        throw ContractError("latent_encode: future has " + std::to_string(future.steps.size()) +
                            " steps, expected " + std::to_string(kFutSteps));
    std::vector<Value> embedded;
    embedded.reserve(future.steps.size());
    for (const Value& s : future.steps)
        embedded.push_back(mlp_forward(cfg.emb_spec(), params, "lat.emb", s));
    auto [outs, final_state] =
        lstm_forward({cfg.emb_dim, cfg.enc_hidden}, params, "lat.enc", embedded);
    Value trunk = mlp_forward({{cfg.enc_hidden, cfg.enc_hidden}, nn::Act::kNone, nn::Act::kTanh},
                              params, "lat.trunk", final_state.h);
    MlpSpec head{{cfg.enc_hidden, cfg.d_z}, nn::Act::kNone, nn::Act::kNone};
    Value mu_rows = mlp_forward(head, params, "lat.mu", trunk);       // [N, d_z]
    Value lv_rows = mlp_forward(head, params, "lat.sigma", trunk);    // [N, d_z]
    return {g.reshape(g.max(mu_rows, 0), Shape{1, cfg.d_z}),
            g.reshape(g.max(lv_rows, 0), Shape{1, cfg.d_z})};
}

Value reparameterize(Graph& g, const LatentDistV& dist, const std::vector<double>& eps) {
    const Shape& s = dist.mu.shape();
    if (static_cast<int64_t>(eps.size()) != s.numel())
        throw ContractError("reparameterize: eps dim " + std::to_string(eps.size()) +
                            " != latent dim " + std::to_string(s.numel()));
    Value e = g.constant(Tensor::from(s, eps));
    return g.add(dist.mu, g.mul(g.exp(g.scale(dist.log_var, 0.5)), e));
}

LatentCode reparameterize(const LatentDistribution& dist, const std::vector<double>& eps) {
    if (eps.size() != dist.mu.size())
        throw ContractError("reparameterize: eps dim " + std::to_string(eps.size()) +
                            " != latent dim " + std::to_string(dist.mu.size()));
    LatentCode code;
    code.z.resize(dist.mu.size());
    for (size_t i = 0; i < dist.mu.size(); ++i)
        code.z[i] = dist.mu[i] + std::exp(0.5 * dist.log_var[i]) * eps[i];
    return code;
}

LatentCode draw_latent(const ModelConfig& cfg, Rng& rng) {
    LatentCode code;
    code.z.resize(static_cast<size_t>(cfg.d_z));
    for (double& v : code.z) v = rng.normal();
    return code;
}

Value lift_latent(Graph& g, const LatentCode& z) {
    return g.constant(Tensor::from(Shape{1, static_cast<int64_t>(z.z.size())}, z.z));
}

PredictedScene generate(const ModelConfig& cfg, ParameterStore& store, const SceneSample& scene,
                        const LatentCode& z) {
    Graph g;
    ParamBinder params(g, store, {});
    GeneratorOut out = generator_forward(cfg, params, g, scene, lift_latent(g, z));
    return out.materialize(z);
}

namespace {

FutureSeq candidate_or_truth(Graph& g, const SceneSample& scene, const PredictedScene* candidate) {
    return candidate ? lift_futures(g, scene, *candidate) : lift_futures(g, scene);
}

std::vector<double> score_vector(Graph& g, Value logits) {
    Value scores = g.sigmoid(logits);
    std::vector<double> out(static_cast<size_t>(scores.numel()));
    for (int64_t i = 0; i < scores.numel(); ++i) out[static_cast<size_t>(i)] = scores.data()[i];
    return out;
}

} // namespace

LatentDistribution infer_latent(const ModelConfig& cfg, ParameterStore& store,
                                const SceneSample& scene, const PredictedScene* candidate) {
    Graph g;
    ParamBinder params(g, store, {});
    FutureSeq seq = candidate_or_truth(g, scene, candidate);
    LatentDistV dist = latent_encode(cfg, params, g, scene, seq);
    LatentDistribution out;
    out.mu.assign(dist.mu.data().data(), dist.mu.data().data() + cfg.d_z);
    out.log_var.assign(dist.log_var.data().data(), dist.log_var.data().data() + cfg.d_z);
    return out;
}

std::vector<double> local_scores(const ModelConfig& cfg, ParameterStore& store,
                                 const SceneSample& scene, const PredictedScene* candidate) {
    Graph g;
    ParamBinder params(g, store, {});
    FutureSeq seq = candidate_or_truth(g, scene, candidate);
    return score_vector(g, local_discriminator(cfg, params, g, scene, seq));
}

std::vector<double> global_scores(const ModelConfig& cfg, ParameterStore& store,
                                  const SceneSample& scene, const PredictedScene* candidate) {
    Graph g;
    ParamBinder params(g, store, {});
    FutureSeq seq = candidate_or_truth(g, scene, candidate);
    return score_vector(g, global_discriminator(cfg, params, g, scene, seq));
}

} // namespace bigat::model
