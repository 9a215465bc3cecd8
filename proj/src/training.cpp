#include "bigat/training.hpp"

#include <cmath>
#include <cstdio>

namespace bigat::train {

using ad::Tensor;
using model::FutureSeq;
using model::GeneratorOut;
using model::kFutSteps;
using model::LatentDistribution;
using model::LatentDistV;
using model::PredictedScene;
using model::TrajectoryWindow;
using model::Vec2;

Value bce_with_logits(Graph& g, Value logits, double label) {
    if (label != 0.0 && label != 1.0) throw ContractError("bce: label must be 0 or 1");
    int64_t n = logits.shape()[0];
    // -log sigmoid(x) = softplus(-x); -log(1 - sigmoid(x)) = softplus(x)
    Value arg = label == 1.0 ? g.scale(logits, -1.0) : logits;
    return g.scale(g.sum(g.softplus(arg)), 1.0 / static_cast<double>(n));
}

namespace {

// Mean over both discriminators of the generator-side BCE with the fakes
// labelled as real.
Value generator_gan_loss(const ModelConfig& cfg, ParamBinder& params, Graph& g,
                         const SceneSample& scene, const FutureSeq& fake) {
    Value local = bce_with_logits(g, model::local_discriminator(cfg, params, g, scene, fake), 1.0);
    Value global =
        bce_with_logits(g, model::global_discriminator(cfg, params, g, scene, fake), 1.0);
    return g.scale(g.add(local, global), 0.5);
}

// Mean per-pedestrian L2 trajectory error as a graph value. Predicted
// positions come in as per-step [N,2] values.
Value trajectory_error(const ModelConfig&, Graph& g, const SceneSample& scene,
                       const GeneratorOut& gen) {
    int64_t n = scene.size();
    std::vector<Value> steps{gen.pos.begin(), gen.pos.end()};
    Value pred = g.concat(steps, 1); // [N, 2*kFutSteps]
    Tensor truth{ad::Shape{n, 2 * kFutSteps}};
    for (int64_t i = 0; i < n; ++i) {
        const TrajectoryWindow& w = scene.pedestrians[static_cast<size_t>(i)];
        if (static_cast<int64_t>(w.future.size()) != kFutSteps)
            throw ContractError("trajectory loss needs ground-truth futures");
        for (int64_t t = 0; t < kFutSteps; ++t) {
            truth.at(i, 2 * t) = w.future[static_cast<size_t>(t)].x;
            truth.at(i, 2 * t + 1) = w.future[static_cast<size_t>(t)].y;
        }
    }
    Value diff = g.sub(pred, g.constant(truth));
    Value per_ped = g.sqrt(g.sum(g.mul(diff, diff), 1)); // [N]
    return g.scale(g.sum(per_ped), 1.0 / static_cast<double>(n));
}

Value kl_value(Graph& g, const LatentDistV& dist) {
    Value mu2 = g.mul(dist.mu, dist.mu);
    Value var = g.exp(dist.log_var);
    Value term = g.add_scalar(g.sub(g.add(mu2, var), dist.log_var), -1.0);
    return g.scale(g.sum(term), 0.5);
}

} // namespace

NoisePath loss_path_noise(const ModelConfig& cfg, ParamBinder& params, ParamBinder& lz_params,
                          Graph& g, const SceneSample& scene, const LatentCode& z) {
    NoisePath path;
    path.gen = model::generator_forward(cfg, params, g, scene, model::lift_latent(g, z));
    FutureSeq fake = path.gen.future();
    path.gan1 = generator_gan_loss(cfg, params, g, scene, fake);
    LatentDistV recon = model::latent_encode(cfg, lz_params, g, scene, fake);
    path.z_loss = g.l1_norm(g.sub(recon.mu, model::lift_latent(g, z)));
    return path;
}

TrajPath loss_path_trajectory(const ModelConfig& cfg, ParamBinder& params, Graph& g,
                              const SceneSample& scene, const std::vector<double>& eps) {
    TrajPath path;
    FutureSeq truth = model::lift_futures(g, scene);
    path.dist = model::latent_encode(cfg, params, g, scene, truth);
    Value z = model::reparameterize(g, path.dist, eps);
    path.gen = model::generator_forward(cfg, params, g, scene, z);
    path.gan2 = generator_gan_loss(cfg, params, g, scene, path.gen.future());
    path.traj = trajectory_error(cfg, g, scene, path.gen);
    path.kl = kl_value(g, path.dist);
    return path;
}

DiscLosses discriminator_losses(const ModelConfig& cfg, ParamBinder& params, Graph& g,
                                const SceneSample& scene,
                                std::span<const PredictedScene> fakes) {
    if (fakes.empty()) throw ContractError("discriminator_losses: no generated samples");
    FutureSeq real = model::lift_futures(g, scene);
    Value real_local = bce_with_logits(g, model::local_discriminator(cfg, params, g, scene, real), 1.0);
    Value real_global =
        bce_with_logits(g, model::global_discriminator(cfg, params, g, scene, real), 1.0);

    Value fake_local, fake_global;
    for (const PredictedScene& pred : fakes) {
        FutureSeq fake = model::lift_futures(g, scene, pred); // constants: sampler detached
        Value fl = bce_with_logits(g, model::local_discriminator(cfg, params, g, scene, fake), 0.0);
        Value fg =
            bce_with_logits(g, model::global_discriminator(cfg, params, g, scene, fake), 0.0);
        fake_local = fake_local.valid() ? g.add(fake_local, fl) : fl;
        fake_global = fake_global.valid() ? g.add(fake_global, fg) : fg;
    }
    double inv = 1.0 / static_cast<double>(fakes.size());
    DiscLosses out;
    out.local = g.scale(g.add(real_local, g.scale(fake_local, inv)), 0.5);
    out.global = g.scale(g.add(real_global, g.scale(fake_global, inv)), 0.5);
    return out;
}

LossReport loss_path_noise_report(const ModelConfig& cfg, ParameterStore& store,
                                  const SceneSample& scene, const LatentCode& z) {
    Graph g;
    ParamBinder params(g, store, {});
    NoisePath path = loss_path_noise(cfg, params, params, g, scene, z);
    LossReport rep;
    rep.gan1 = path.gan1.item();
    rep.z = path.z_loss.item();
    return rep;
}

LossReport loss_path_trajectory_report(const ModelConfig& cfg, ParameterStore& store,
                                       const SceneSample& scene,
                                       const std::vector<double>& eps) {
    Graph g;
    ParamBinder params(g, store, {});
    TrajPath path = loss_path_trajectory(cfg, params, g, scene, eps);
    LossReport rep;
    rep.gan2 = path.gan2.item();
    rep.traj = path.traj.item();
    rep.kl = path.kl.item();
    return rep;
}

std::pair<double, double> discriminator_loss_values(const ModelConfig& cfg,
                                                    ParameterStore& store,
                                                    const SceneSample& scene,
                                                    std::span<const PredictedScene> fakes) {
    Graph g;
    ParamBinder params(g, store, {});
    DiscLosses losses = discriminator_losses(cfg, params, g, scene, fakes);
    return {losses.local.item(), losses.global.item()};
}

double kl_divergence(const LatentDistribution& dist) {
    double acc = 0.0;
    for (size_t d = 0; d < dist.mu.size(); ++d) {
        double var = std::exp(dist.log_var[d]);
        acc += dist.mu[d] * dist.mu[d] + var - dist.log_var[d] - 1.0;
    }
    return 0.5 * acc;
}

void adam_step(ParameterStore& store, const OptimizerConfig& opt, std::string_view scope) {
    double lr = scope.starts_with("disc") ? opt.lr_disc : opt.lr_gen;
    for (const std::string& name : store.names(scope)) {
        const Tensor& g = store.grad(name); // throws when not populated
        Tensor& value = store.value(name);
        auto& mom = store.moments(name);
        mom.step += 1;
        double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(mom.step));
        double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(mom.step));
        for (int64_t i = 0; i < value.numel(); ++i) {
            mom.m1[i] = opt.beta1 * mom.m1[i] + (1.0 - opt.beta1) * g[i];
            mom.m2[i] = opt.beta2 * mom.m2[i] + (1.0 - opt.beta2) * g[i] * g[i];
            double m_hat = mom.m1[i] / c1;
            double v_hat = mom.m2[i] / c2;
            value[i] -= lr * m_hat / (std::sqrt(v_hat) + opt.epsilon);
        }
        store.clear_grad(name);
    }
}

double trajectory_error_value(const SceneSample& scene, const PredictedScene& pred) {
    double acc = 0.0;
    for (size_t i = 0; i < scene.pedestrians.size(); ++i) {
        const auto& truth = scene.pedestrians[i].future;
        const auto& hat = pred.futures[i];
        double sq = 0.0;
        for (size_t t = 0; t < truth.size(); ++t) {
            Vec2 d = hat[t] - truth[t];
            sq += d.x * d.x + d.y * d.y;
        }
        acc += std::sqrt(sq);
    }
    return acc / static_cast<double>(scene.pedestrians.size());
}

double variety_loss(const ModelConfig& cfg, ParameterStore& store, const SceneSample& scene,
                    int64_t k, Rng& rng) {
    if (k < 1) throw ContractError("variety_loss: k must be at least 1");
    double best = std::numeric_limits<double>::infinity();
    for (int64_t s = 0; s < k; ++s) {
        PredictedScene pred = model::generate(cfg, store, scene, model::draw_latent(cfg, rng));
        best = std::min(best, trajectory_error_value(scene, pred));
    }
    return best;
}

namespace {

// In-graph best-of-k trajectory term: the argmin rollout is chosen by value
// and its error value carries the gradient.
Value variety_value(const ModelConfig& cfg, ParamBinder& params, Graph& g,
                    const SceneSample& scene, int64_t k, Rng& rng) {
    Value best;
    double best_err = std::numeric_limits<double>::infinity();
    for (int64_t s = 0; s < k; ++s) {
        LatentCode z = model::draw_latent(cfg, rng);
        GeneratorOut gen = model::generator_forward(cfg, params, g, scene, model::lift_latent(g, z));
        Value err = trajectory_error(cfg, g, scene, gen);
        if (err.item() < best_err) {
            best_err = err.item();
            best = err;
        }
    }
    return best;
}

std::vector<double> draw_eps(const ModelConfig& cfg, Rng& rng) {
    std::vector<double> eps(static_cast<size_t>(cfg.d_z));
    for (double& v : eps) v = rng.normal();
    return eps;
}

} // namespace

LossReport train_step(ParameterStore& store, const ModelConfig& cfg,
                      std::span<const SceneSample> batch, const LossWeights& weights,
                      const OptimizerConfig& opt, Rng& rng) {
    if (batch.empty()) throw ContractError("train_step: empty batch");
    double inv_b = 1.0 / static_cast<double>(batch.size());
    LossReport rep;

    // discriminator update on detached samples from both generation paths
    store.zero_grad("disc.");
    for (const SceneSample& scene : batch) {
        PredictedScene fake1 = model::generate(cfg, store, scene, model::draw_latent(cfg, rng));
        LatentDistribution dist = model::infer_latent(cfg, store, scene);
        PredictedScene fake2 =
            model::generate(cfg, store, scene, model::reparameterize(dist, draw_eps(cfg, rng)));
        std::vector<PredictedScene> fakes{std::move(fake1), std::move(fake2)};

        Graph g;
        ParamBinder params(g, store, {"disc."});
        DiscLosses losses = discriminator_losses(cfg, params, g, scene, fakes);
        Value root = g.scale(g.add(losses.local, losses.global), inv_b);
        g.backward(root);
        params.pull_grads();
        rep.d_local += losses.local.item() * inv_b;
        rep.d_global += losses.global.item() * inv_b;
    }
    adam_step(store, opt, "disc.");

    // joint generator + latent-encoder update on the five-term objective
    store.zero_grad("gen.");
    store.zero_grad("lat.");
    for (const SceneSample& scene : batch) {
        Graph g;
        ParamBinder params(g, store, {"gen.", "lat."});
        ParamBinder frozen_lat(g, store, {"gen."});
        ParamBinder& lz_params = opt.lz_updates_encoder ? params : frozen_lat;

        LatentCode z = model::draw_latent(cfg, rng);
        NoisePath p1 = loss_path_noise(cfg, params, lz_params, g, scene, z);
        TrajPath p2 = loss_path_trajectory(cfg, params, g, scene, draw_eps(cfg, rng));

        Value total = g.add(
            g.add(g.add(p1.gan1, g.scale(p1.z_loss, weights.lambda_z)),
                  g.add(p2.gan2, g.scale(p2.traj, weights.lambda_traj))),
            g.scale(p2.kl, weights.lambda_kl));
        if (opt.use_variety && opt.variety_k > 1)
            total = g.add(total,
                          g.scale(variety_value(cfg, params, g, scene, opt.variety_k, rng),
                                  weights.lambda_traj));
        Value root = g.scale(total, inv_b);
        if (!std::isfinite(root.item()))
            throw NumericError("train_step: non-finite objective on scene '" + scene.scene_id +
                               "'");
        g.backward(root);
        params.pull_grads();

        rep.gan1 += p1.gan1.item() * inv_b;
        rep.z += p1.z_loss.item() * inv_b;
        rep.gan2 += p2.gan2.item() * inv_b;
        rep.traj += p2.traj.item() * inv_b;
        rep.kl += p2.kl.item() * inv_b;
    }
    adam_step(store, opt, "gen.");
    adam_step(store, opt, "lat.");

    rep.total = rep.gan1 + weights.lambda_z * rep.z + rep.gan2 + weights.lambda_traj * rep.traj +
                weights.lambda_kl * rep.kl;
    return rep;
}

void append_log_line(std::ostream& os, int64_t step, const LossReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%lld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g",
                  static_cast<long long>(step), r.gan1, r.z, r.gan2, r.traj, r.kl, r.d_local,
                  r.d_global, r.total);
    os << buf << "\n";
}

} // namespace bigat::train
