#include "bigat/gradsuite.hpp"

#include <cmath>

#include "bigat/gradcheck.hpp"
#include "bigat/training.hpp"

namespace bigat::eval {

using ad::Graph;
using ad::ParamBinder;
using ad::ParameterStore;
using ad::PointFn;
using ad::Shape;
using ad::StoreFn;
using ad::Tensor;
using ad::Value;
using model::ModelConfig;
using model::SceneSample;
using model::TrajectoryWindow;
using model::Vec2;

namespace {

constexpr double kPrimStep = 1e-5, kPrimTol = 1e-5;
constexpr double kNetStep = 1e-4, kNetTol = 1e-4;

Tensor rand_tensor(Shape s, Rng& rng, double lo = -2.0, double hi = 2.0) {
    Tensor t{std::move(s)};
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

ModelConfig reduced_config() {
    ModelConfig cfg;
    cfg.emb_dim = 4;
    cfg.enc_hidden = 6;
    cfg.gat_out = 5;
    cfg.gat_layers = 2;
    cfg.phys_ctx = 3;
    cfg.d_z = 2;
    cfg.dec_hidden = 8;
    cfg.clf_hidden = 4;
    cfg.att_hidden = 4;
    cfg.cnn_c1 = 2;
    return cfg;
}

SceneSample toy_scene(uint64_t seed) {
    Rng rng(seed);
    SceneSample scene;
    scene.scene_id = "gradcheck";
    for (int64_t i = 0; i < 2; ++i) {
        TrajectoryWindow w;
        w.ped_id = i;
        Vec2 p{rng.uniform(-2, 2), rng.uniform(-2, 2)};
        Vec2 step{rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4)};
        for (int64_t t = 0; t < model::kObsSteps; ++t) {
            w.observed.push_back(p);
            p = p + step;
        }
        for (int64_t t = 0; t < model::kFutSteps; ++t) {
            w.future.push_back(p);
            p = p + step;
        }
        scene.pedestrians.push_back(std::move(w));
    }
    return scene;
}

} // namespace

std::vector<GradSuiteEntry> run_gradient_suite(uint64_t seed) {
    std::vector<GradSuiteEntry> entries;
    Rng rng(seed);

    auto point_check = [&](const std::string& name, const PointFn& f, const Tensor& point,
                           double step, double tol) {
        auto res = ad::gradient_check(f, point, step, tol);
        entries.push_back({name, res.max_rel_error, tol, res.pass});
    };

    // ---- primitives ----
    Tensor m23 = rand_tensor(Shape{2, 3}, rng);
    Tensor m32 = rand_tensor(Shape{3, 2}, rng);
    Tensor w23 = rand_tensor(Shape{2, 3}, rng);
    Tensor w26 = rand_tensor(Shape{2, 6}, rng);
    Tensor v6 = rand_tensor(Shape{6}, rng);
    Tensor pos = rand_tensor(Shape{6}, rng, 0.3, 2.0);
    Tensor kinked = rand_tensor(Shape{6}, rng);
    for (int64_t i = 0; i < kinked.numel(); ++i)
        if (std::abs(kinked[i]) < 0.1) kinked[i] += 0.3;

    point_check("primitive/matmul",
                [&](Graph& g, Value x) { return g.l2_norm(g.matmul(x, g.constant(m32))); }, m23,
                kPrimStep, kPrimTol);
    point_check("primitive/add",
                [&](Graph& g, Value x) {
                    return g.sum(g.mul(g.add(x, g.constant(m23)), g.constant(w23)));
                },
                m23, kPrimStep, kPrimTol);
    point_check("primitive/sub",
                [&](Graph& g, Value x) {
                    return g.sum(g.mul(g.sub(g.constant(m23), x), g.constant(w23)));
                },
                m23, kPrimStep, kPrimTol);
    point_check("primitive/elementwise-mul",
                [&](Graph& g, Value x) { return g.l2_norm(g.mul(x, g.constant(m23))); }, m23,
                kPrimStep, kPrimTol);
    point_check("primitive/concat-slice",
                [&](Graph& g, Value x) {
                    std::vector<Value> parts{x, g.constant(m23)};
                    return g.l2_norm(g.slice(g.concat(parts, 0), {1, 1}, {2, 2}));
                },
                m23, kPrimStep, kPrimTol);
    point_check("primitive/sum",
                [&](Graph& g, Value x) { return g.l2_norm(g.sum(x, 1)); }, m23, kPrimStep,
                kPrimTol);
    point_check("primitive/max",
                [&](Graph& g, Value x) { return g.sum(g.max(x, 0)); }, m23, kPrimStep, kPrimTol);
    point_check("primitive/exp",
                [&](Graph& g, Value x) { return g.sum(g.mul(g.exp(x), g.constant(v6))); }, v6,
                kPrimStep, kPrimTol);
    point_check("primitive/log", [&](Graph& g, Value x) { return g.sum(g.log(x)); }, pos,
                kPrimStep, kPrimTol);
    point_check("primitive/tanh", [&](Graph& g, Value x) { return g.l2_norm(g.tanh(x)); }, v6,
                kPrimStep, kPrimTol);
    point_check("primitive/sigmoid",
                [&](Graph& g, Value x) { return g.l2_norm(g.sigmoid(x)); }, v6, kPrimStep,
                kPrimTol);
    point_check("primitive/relu", [&](Graph& g, Value x) { return g.sum(g.relu(x)); }, kinked,
                kPrimStep, kPrimTol);
    point_check("primitive/leaky-relu",
                [&](Graph& g, Value x) { return g.sum(g.leaky_relu(x, 0.2)); }, kinked,
                kPrimStep, kPrimTol);
    point_check("primitive/elu", [&](Graph& g, Value x) { return g.sum(g.elu(x)); }, kinked,
                kPrimStep, kPrimTol);
    point_check("primitive/softplus",
                [&](Graph& g, Value x) { return g.l2_norm(g.softplus(x)); }, v6, kPrimStep,
                kPrimTol);
    point_check("primitive/sqrt", [&](Graph& g, Value x) { return g.sum(g.sqrt(x)); }, pos,
                kPrimStep, kPrimTol);
    point_check("primitive/softmax",
                [&](Graph& g, Value x) {
                    return g.sum(g.mul(g.softmax(x, 1), g.constant(w23)));
                },
                m23, kPrimStep, kPrimTol);
    point_check("primitive/l2-norm", [&](Graph& g, Value x) { return g.l2_norm(x); }, v6,
                kPrimStep, kPrimTol);
    point_check("primitive/l1-norm", [&](Graph& g, Value x) { return g.l1_norm(x); }, kinked,
                kPrimStep, kPrimTol);
    point_check("primitive/broadcast",
                [&](Graph& g, Value x) {
                    return g.sum(g.mul(g.broadcast(x, Shape{2, 6}), g.constant(w26)));
                },
                v6, kPrimStep, kPrimTol);
    point_check("primitive/transpose",
                [&](Graph& g, Value x) { return g.l2_norm(g.matmul(g.transpose(x), g.constant(w26))); },
                m23, kPrimStep, kPrimTol);
    point_check("primitive/scale-addscalar",
                [&](Graph& g, Value x) { return g.l2_norm(g.add_scalar(g.scale(x, -1.7), 0.9)); },
                v6, kPrimStep, kPrimTol);

    // ---- layers and networks on a toy scene ----
    ModelConfig cfg = reduced_config();
    ParameterStore store;
    model::register_model(store, cfg, rng);
    SceneSample scene = toy_scene(seed ^ 0x5eed);
    model::LatentCode z;
    z.z = {rng.normal(), rng.normal()};
    std::vector<double> eps{rng.normal(), rng.normal()};
    train::LossWeights weights;

    auto store_check = [&](const std::string& name, const std::vector<std::string>& scopes,
                           const StoreFn& f) {
        auto res = ad::gradient_check_params(store, scopes, f, kNetStep, kNetTol);
        entries.push_back({name, res.max_rel_error, kNetTol, res.pass});
    };

    store_check("layer/embedding-mlp", {"gen.emb"}, [&](Graph& g, ParamBinder& p) {
        return g.l2_norm(model::encode_social(cfg, p, "gen", g, scene, false));
    });
    store_check("layer/encoder-lstm", {"gen.enc"}, [&](Graph& g, ParamBinder& p) {
        return g.l2_norm(model::encode_social(cfg, p, "gen", g, scene, true));
    });
    store_check("layer/gat-stack", {"gen.gat"}, [&](Graph& g, ParamBinder& p) {
        auto specs = cfg.gat_specs();
        Value vs = model::encode_social(cfg, p, "gen", g, scene, false);
        return g.l2_norm(nn::gat_stack(specs, p, "gen.gat", vs));
    });
    Tensor att_cells = rand_tensor(Shape{5, cfg.phys_ctx}, rng);
    store_check("layer/physical-attention", {"gen.att"}, [&](Graph& g, ParamBinder& p) {
        Value vs = model::encode_social(cfg, p, "gen", g, scene, false);
        return g.l2_norm(nn::physical_attention(cfg.att_spec(), p, "gen.att",
                                                g.constant(att_cells),
                                                g.slice(vs, {0, 0}, {1, cfg.enc_hidden})));
    });
    {
        // grid cnn gets its own scene with a feature grid attached
        Tensor grid_values = rand_tensor(Shape{8, 8, 1}, rng, 0.0, 1.0);
        store_check("layer/grid-cnn", {"gen.cnn"}, [&](Graph& g, ParamBinder& p) {
            return g.l2_norm(nn::grid_cnn(cfg.cnn_spec(), p, "gen.cnn", g.constant(grid_values)));
        });
    }
    store_check("layer/decoder", {"gen.dec", "gen.demb", "gen.out", "gen.init"},
                [&](Graph& g, ParamBinder& p) {
                    auto out = model::generator_forward(cfg, p, g, scene, model::lift_latent(g, z));
                    std::vector<Value> steps{out.pos.begin(), out.pos.end()};
                    return g.l2_norm(g.concat(steps, 1));
                });

    store_check("loss/generator-objective", {"gen.", "lat."}, [&](Graph& g, ParamBinder& p) {
        auto p1 = train::loss_path_noise(cfg, p, p, g, scene, z);
        auto p2 = train::loss_path_trajectory(cfg, p, g, scene, eps);
        return g.add(g.add(g.add(p1.gan1, g.scale(p1.z_loss, weights.lambda_z)),
                           g.add(p2.gan2, g.scale(p2.traj, weights.lambda_traj))),
                     g.scale(p2.kl, weights.lambda_kl));
    });
    {
        Rng fake_rng(seed ^ 0xfa4e);
        model::PredictedScene fake =
            model::generate(cfg, store, scene, model::draw_latent(cfg, fake_rng));
        std::vector<model::PredictedScene> fakes{fake};
        store_check("loss/local-discriminator", {"disc.local."}, [&](Graph& g, ParamBinder& p) {
            return train::discriminator_losses(cfg, p, g, scene, fakes).local;
        });
        store_check("loss/global-discriminator", {"disc.global."}, [&](Graph& g, ParamBinder& p) {
            return train::discriminator_losses(cfg, p, g, scene, fakes).global;
        });
    }

    return entries;
}

bool all_pass(const std::vector<GradSuiteEntry>& entries) {
    for (const auto& e : entries)
        if (!e.pass) return false;
    return true;
}

} // namespace bigat::eval
