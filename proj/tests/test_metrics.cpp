#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "bigat/data.hpp"
#include "bigat/metrics.hpp"
#include "bigat/rng.hpp"

using namespace bigat;
using namespace bigat::eval;
using namespace bigat::model;

namespace {

ModelConfig tiny_config() {
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

std::vector<SceneSample> synth_scenes(int64_t count, uint64_t seed) {
    data::SynthSpec spec;
    spec.kind = data::SynthKind::kConstantVelocity;
    spec.scenes = count;
    spec.min_peds = 1;
    spec.max_peds = 3;
    spec.noise = 0.05;
    spec.seed = seed;
    return data::synth_generate(spec).scenes;
}

} // namespace

TEST_CASE("ade and fde vanish on a perfect prediction") {
    std::vector<Vec2> track{{0, 0}, {1, 1}, {2, 0}};
    CHECK(ade(track, track) == 0.0);
    CHECK(fde(track, track) == 0.0);
}

TEST_CASE("a constant unit offset gives ade and fde of one") {
    std::vector<Vec2> truth, pred;
    for (int t = 0; t < 12; ++t) {
        truth.push_back({static_cast<double>(t), 2.0});
        pred.push_back({static_cast<double>(t) + 1.0, 2.0});
    }
    CHECK(ade(pred, truth) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(fde(pred, truth) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("ade averages the per-step distances") {
    std::vector<Vec2> truth{{0, 0}, {0, 0}};
    std::vector<Vec2> pred{{0, 0}, {1, 1}};
    CHECK(ade(pred, truth) == doctest::Approx(std::sqrt(2.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("fde is the 3-4-5 distance at the final step") {
    std::vector<Vec2> truth{{0, 0}, {0, 0}};
    std::vector<Vec2> pred{{0, 0}, {3, 4}};
    CHECK(fde(pred, truth) == 5.0);
}

TEST_CASE("length mismatches are contract errors") {
    std::vector<Vec2> a{{0, 0}};
    std::vector<Vec2> b{{0, 0}, {1, 1}};
    CHECK_THROWS_AS(ade(a, b), ContractError);
    CHECK_THROWS_AS(fde(a, b), ContractError);
}

TEST_CASE("ade and fde match a brute-force evaluation on random tracks") {
    Rng rng(200);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Vec2> truth, pred;
        for (int t = 0; t < 12; ++t) {
            truth.push_back({rng.uniform(-10, 10), rng.uniform(-10, 10)});
            pred.push_back({rng.uniform(-10, 10), rng.uniform(-10, 10)});
        }
        double acc = 0.0;
        for (int t = 0; t < 12; ++t)
            acc += std::sqrt((pred[static_cast<size_t>(t)].x - truth[static_cast<size_t>(t)].x) *
                                 (pred[static_cast<size_t>(t)].x - truth[static_cast<size_t>(t)].x) +
                             (pred[static_cast<size_t>(t)].y - truth[static_cast<size_t>(t)].y) *
                                 (pred[static_cast<size_t>(t)].y - truth[static_cast<size_t>(t)].y));
        CHECK(std::abs(ade(pred, truth) - acc / 12.0) <= 1e-12);
        CHECK(std::abs(fde(pred, truth) - (pred.back() - truth.back()).norm()) <= 1e-12);
    }
}

TEST_CASE("best-of-one equals plain single-sample metrics") {
    ModelConfig cfg = tiny_config();
    Rng rng(201);
    ad::ParameterStore store;
    register_model(store, cfg, rng);
    auto scenes = synth_scenes(3, 5);
    auto results = evaluate_best_of_k(cfg, store, scenes, 1, 42);
    REQUIRE(results.size() == 3);
    // reproduce the single draw per scene
    Rng base(42);
    for (size_t s = 0; s < scenes.size(); ++s) {
        Rng fork = base.fork(s);
        PredictedScene pred = generate(cfg, store, scenes[s], draw_latent(cfg, fork));
        double a = 0.0;
        for (size_t i = 0; i < pred.futures.size(); ++i)
            a += ade(pred.futures[i], scenes[s].pedestrians[i].future);
        a /= static_cast<double>(pred.futures.size());
        CHECK(results[s].ade == doctest::Approx(a).epsilon(1e-12));
    }
}

TEST_CASE("best-of-k is monotone non-increasing in k under nested draws") {
    ModelConfig cfg = tiny_config();
    Rng rng(202);
    ad::ParameterStore store;
    register_model(store, cfg, rng);
    auto scenes = synth_scenes(4, 6);
    auto r1 = evaluate_best_of_k(cfg, store, scenes, 1, 7);
    auto r5 = evaluate_best_of_k(cfg, store, scenes, 5, 7);
    auto r20 = evaluate_best_of_k(cfg, store, scenes, 20, 7);
    for (size_t s = 0; s < scenes.size(); ++s) {
        CHECK(r5[s].ade <= r1[s].ade);
        CHECK(r20[s].ade <= r5[s].ade);
    }
}

TEST_CASE("best-of-k picks the brute-force minimum-ade sample") {
    ModelConfig cfg = tiny_config();
    Rng rng(203);
    ad::ParameterStore store;
    register_model(store, cfg, rng);
    auto scenes = synth_scenes(1, 8);
    const SceneSample& scene = scenes[0];
    int64_t k = 3;
    auto results = evaluate_best_of_k(cfg, store, scenes, k, 9);

    Rng base(9);
    Rng fork = base.fork(0);
    size_t n = scene.pedestrians.size();
    std::vector<double> best_a(n, 1e300), best_f(n, 0.0);
    for (int64_t s = 0; s < k; ++s) {
        PredictedScene pred = generate(cfg, store, scene, draw_latent(cfg, fork));
        for (size_t i = 0; i < n; ++i) {
            double a = ade(pred.futures[i], scene.pedestrians[i].future);
            if (a < best_a[i]) {
                best_a[i] = a;
                best_f[i] = fde(pred.futures[i], scene.pedestrians[i].future);
            }
        }
    }
    double expect_a = 0.0, expect_f = 0.0;
    for (size_t i = 0; i < n; ++i) {
        expect_a += best_a[i];
        expect_f += best_f[i];
    }
    CHECK(results[0].ade == doctest::Approx(expect_a / static_cast<double>(n)).epsilon(1e-12));
    CHECK(results[0].fde == doctest::Approx(expect_f / static_cast<double>(n)).epsilon(1e-12));
}

TEST_CASE("evaluation of a frozen model is deterministic given seed and k") {
    ModelConfig cfg = tiny_config();
    Rng rng(204);
    ad::ParameterStore store;
    register_model(store, cfg, rng);
    auto scenes = synth_scenes(3, 10);
    auto a = evaluate_best_of_k(cfg, store, scenes, 4, 11);
    auto b = evaluate_best_of_k(cfg, store, scenes, 4, 11);
    for (size_t s = 0; s < scenes.size(); ++s) {
        CHECK(a[s].ade == b[s].ade);
        CHECK(a[s].fde == b[s].fde);
    }
}

TEST_CASE("linear baseline continues a perfectly linear track exactly") {
    SceneSample scene;
    scene.scene_id = "line";
    TrajectoryWindow w;
    w.ped_id = 0;
    for (int64_t t = 0; t < kObsSteps + kFutSteps; ++t) {
        Vec2 p{0.5 * static_cast<double>(t) - 2.0, -0.25 * static_cast<double>(t) + 1.0};
        if (t < kObsSteps)
            w.observed.push_back(p);
        else
            w.future.push_back(p);
    }
    scene.pedestrians.push_back(w);
    PredictedScene pred = linear_baseline(scene);
    for (size_t t = 0; t < kFutSteps; ++t) {
        CHECK(pred.futures[0][t].x == doctest::Approx(w.future[t].x).epsilon(1e-12));
        CHECK(pred.futures[0][t].y == doctest::Approx(w.future[t].y).epsilon(1e-12));
    }
    auto metrics = evaluate_linear_baseline(std::vector<SceneSample>{scene});
    CHECK(metrics[0].ade <= 1e-12);
}

TEST_CASE("linear baseline repeats the position of a stationary pedestrian") {
    SceneSample scene;
    scene.scene_id = "still";
    TrajectoryWindow w;
    w.ped_id = 0;
    for (int64_t t = 0; t < kObsSteps; ++t) w.observed.push_back({3.0, -1.5});
    for (int64_t t = 0; t < kFutSteps; ++t) w.future.push_back({3.0, -1.5});
    scene.pedestrians.push_back(w);
    PredictedScene pred = linear_baseline(scene);
    for (const Vec2& p : pred.futures[0]) {
        CHECK(p.x == doctest::Approx(3.0).epsilon(1e-14));
        CHECK(p.y == doctest::Approx(-1.5).epsilon(1e-14));
    }
}

TEST_CASE("linear baseline solves the normal equations on noisy tracks") {
    Rng rng(205);
    SceneSample scene;
    scene.scene_id = "noisy";
    TrajectoryWindow w;
    w.ped_id = 0;
    double a_x = 1.2, b_x = 0.4, a_y = -0.3, b_y = 0.9;
    std::vector<double> xs, ys;
    for (int64_t t = 0; t < kObsSteps; ++t) {
        double x = a_x + b_x * static_cast<double>(t) + rng.normal(0, 0.1);
        double y = a_y + b_y * static_cast<double>(t) + rng.normal(0, 0.1);
        xs.push_back(x);
        ys.push_back(y);
        w.observed.push_back({x, y});
    }
    for (int64_t t = 0; t < kFutSteps; ++t) w.future.push_back({0, 0});
    scene.pedestrians.push_back(w);
    PredictedScene pred = linear_baseline(scene);

    // closed-form normal equations for y = a + b t
    auto solve = [](const std::vector<double>& v) {
        double n = static_cast<double>(v.size());
        double st = 0, sv = 0, stt = 0, stv = 0;
        for (size_t t = 0; t < v.size(); ++t) {
            st += static_cast<double>(t);
            sv += v[t];
            stt += static_cast<double>(t) * static_cast<double>(t);
            stv += static_cast<double>(t) * v[t];
        }
        double b = (n * stv - st * sv) / (n * stt - st * st);
        double a = (sv - b * st) / n;
        return std::pair{a, b};
    };
    auto [ax, bx] = solve(xs);
    auto [ay, by] = solve(ys);
    for (int64_t t = 0; t < kFutSteps; ++t) {
        double tt = static_cast<double>(kObsSteps + t);
        CHECK(std::abs(pred.futures[0][static_cast<size_t>(t)].x - (ax + bx * tt)) <= 1e-9);
        CHECK(std::abs(pred.futures[0][static_cast<size_t>(t)].y - (ay + by * tt)) <= 1e-9);
    }
}

TEST_CASE("latent sweep emits exactly grid-size x peds x steps rows") {
    ModelConfig cfg = tiny_config();
    Rng rng(206);
    ad::ParameterStore store;
    register_model(store, cfg, rng);
    auto scenes = synth_scenes(1, 12);
    std::vector<LatentCode> grid;
    for (int i = 0; i < 5; ++i) grid.push_back(draw_latent(cfg, rng));
    auto rows = latent_sweep(cfg, store, scenes[0], grid);
    CHECK(rows.size() == 5 * scenes[0].pedestrians.size() * static_cast<size_t>(kFutSteps));
}

TEST_CASE("identical latents sweep to identical trajectories") {
    ModelConfig cfg = tiny_config();
    Rng rng(207);
    ad::ParameterStore store;
    register_model(store, cfg, rng);
    auto scenes = synth_scenes(1, 13);
    LatentCode z = draw_latent(cfg, rng);
    std::vector<LatentCode> grid{z, z};
    auto rows = latent_sweep(cfg, store, scenes[0], grid);
    size_t half = rows.size() / 2;
    for (size_t i = 0; i < half; ++i) {
        CHECK(rows[i].x == rows[half + i].x);
        CHECK(rows[i].y == rows[half + i].y);
    }
}

TEST_CASE("metric csv carries the documented header") {
    std::vector<MetricResult> results{{"eth", 20, 0.5, 1.0, 3}};
    std::ostringstream os;
    write_metrics_csv(results, os);
    CHECK(os.str().starts_with("scene,k,ade,fde,n_pedestrians\n"));
    CHECK(os.str().find("eth,20,0.5") != std::string::npos);
}

TEST_CASE("sweep csv carries the documented header") {
    std::vector<SweepRow> rows{{0, 1, 2, 3.5, -4.5}};
    std::ostringstream os;
    write_sweep_csv(rows, os);
    CHECK(os.str() == "z_index,ped_id,t,x,y\n0,1,2,3.5,-4.5\n");
}

TEST_CASE("sweep svg writes polylines for observed and generated tracks") {
    ModelConfig cfg = tiny_config();
    Rng rng(208);
    ad::ParameterStore store;
    register_model(store, cfg, rng);
    auto scenes = synth_scenes(1, 14);
    std::vector<LatentCode> grid{draw_latent(cfg, rng)};
    auto rows = latent_sweep(cfg, store, scenes[0], grid);
    auto path = std::filesystem::temp_directory_path() / "bigat_sweep_test.svg";
    write_sweep_svg(scenes[0], rows, path);
    std::ifstream is(path);
    std::string body((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    CHECK(body.find("<svg") != std::string::npos);
    CHECK(body.find("stroke-dasharray") != std::string::npos);
    std::filesystem::remove(path);
}
