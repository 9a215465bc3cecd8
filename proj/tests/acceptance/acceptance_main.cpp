// Acceptance suite: one pass/fail line per criterion, exit 0 only when every
// gating criterion holds. Criteria 5-7 train real models and take several
// minutes; run with --only N to check a single criterion.

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "bigat/cli.hpp"
#include "bigat/data.hpp"
#include "bigat/gradsuite.hpp"
#include "bigat/metrics.hpp"
#include "bigat/training.hpp"

using namespace bigat;
using namespace bigat::model;
namespace fs = std::filesystem;

#ifndef ACCEPTANCE_FIXTURE_DIR
#define ACCEPTANCE_FIXTURE_DIR "tests/fixtures"
#endif

namespace {

int g_failures = 0;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(int criterion, const std::string& name, bool pass, const std::string& detail) {
    std::printf("criterion %d (%s): %s  [%s]\n", criterion, name.c_str(),
                pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
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

SceneSample random_scene(Rng& rng, int64_t n) {
    SceneSample scene;
    scene.scene_id = "rand";
    for (int64_t i = 0; i < n; ++i) {
        TrajectoryWindow w;
        w.ped_id = i;
        Vec2 p{rng.uniform(-4, 4), rng.uniform(-4, 4)};
        Vec2 v{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
        for (int64_t t = 0; t < kObsSteps; ++t) {
            w.observed.push_back(p);
            p = p + v + Vec2{rng.normal(0, 0.05), rng.normal(0, 0.05)};
        }
        for (int64_t t = 0; t < kFutSteps; ++t) {
            w.future.push_back(p);
            p = p + v + Vec2{rng.normal(0, 0.05), rng.normal(0, 0.05)};
        }
        scene.pedestrians.push_back(std::move(w));
    }
    return scene;
}

// ---------------------------------------------------------------- 1
void criterion_gradients() {
    auto t0 = std::chrono::steady_clock::now();
    auto entries = eval::run_gradient_suite(20240915);
    double worst = 0.0;
    std::string worst_name;
    bool pass = true;
    for (const auto& e : entries) {
        if (!e.pass) pass = false;
        if (e.max_rel_error > worst) {
            worst = e.max_rel_error;
            worst_name = e.name;
        }
    }
    double elapsed = seconds_since(t0);
    pass = pass && elapsed < 60.0;
    std::ostringstream detail;
    detail << entries.size() << " checks, worst " << worst << " (" << worst_name << "), "
           << elapsed << "s";
    report(1, "gradient suite", pass, detail.str());
}

// ---------------------------------------------------------------- 2
void criterion_permutation() {
    auto t0 = std::chrono::steady_clock::now();
    ModelConfig cfg = reduced_config();
    Rng rng(71);
    ad::ParameterStore store;
    register_model(store, cfg, rng);

    bool pass = true;
    for (int trial = 0; trial < 100 && pass; ++trial) {
        int64_t n = rng.uniform_int(1, 6);
        SceneSample scene = random_scene(rng, n);
        std::vector<size_t> perm(static_cast<size_t>(n));
        for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        for (size_t i = perm.size(); i > 1; --i)
            std::swap(perm[i - 1],
                      perm[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1))]);
        SceneSample permuted = scene;
        for (size_t i = 0; i < perm.size(); ++i)
            permuted.pedestrians[i] = scene.pedestrians[perm[i]];

        LatentCode z = draw_latent(cfg, rng);
        PredictedScene base = generate(cfg, store, scene, z);
        PredictedScene swapped = generate(cfg, store, permuted, z);
        auto ls = local_scores(cfg, store, scene);
        auto lp = local_scores(cfg, store, permuted);
        auto gs = global_scores(cfg, store, scene);
        auto gp = global_scores(cfg, store, permuted);
        for (size_t i = 0; i < perm.size() && pass; ++i) {
            for (size_t t = 0; t < kFutSteps; ++t)
                if (swapped.futures[i][t].x != base.futures[perm[i]][t].x ||
                    swapped.futures[i][t].y != base.futures[perm[i]][t].y)
                    pass = false;
            if (lp[i] != ls[perm[i]] || gp[i] != gs[perm[i]]) pass = false;
        }
    }
    std::ostringstream detail;
    detail << "100 scenes, exact equality, " << seconds_since(t0) << "s";
    report(2, "permutation equivariance", pass, detail.str());
}

// ---------------------------------------------------------------- 3
void criterion_loss_oracles() {
    Rng rng(72);
    bool pass = true;
    double worst_kl = 0.0;

    // closed-form KL on 1000 random posteriors, via the graph op
    for (int trial = 0; trial < 1000; ++trial) {
        int64_t d = rng.uniform_int(1, 8);
        std::vector<double> mu(static_cast<size_t>(d)), lv(static_cast<size_t>(d));
        for (double& v : mu) v = rng.uniform(-3, 3);
        for (double& v : lv) v = rng.uniform(-3, 3);
        ad::Graph g;
        LatentDistV dist{g.constant(ad::Tensor::from(ad::Shape{1, d}, mu)),
                         g.constant(ad::Tensor::from(ad::Shape{1, d}, lv))};
        // the training objective's term, rebuilt exactly as the loss path does
        ad::Value mu2 = g.mul(dist.mu, dist.mu);
        ad::Value var = g.exp(dist.log_var);
        ad::Value term = g.add_scalar(g.sub(g.add(mu2, var), dist.log_var), -1.0);
        double graph_kl = g.scale(g.sum(term), 0.5).item();
        double closed = 0.0;
        for (int64_t i = 0; i < d; ++i) {
            size_t s = static_cast<size_t>(i);
            closed += 0.5 * (mu[s] * mu[s] + std::exp(lv[s]) - lv[s] - 1.0);
        }
        worst_kl = std::max(worst_kl, std::abs(graph_kl - closed));
    }
    pass = pass && worst_kl <= 1e-10;

    // BCE against the hand formula
    double worst_bce = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        int64_t n = rng.uniform_int(1, 5);
        std::vector<double> logits(static_cast<size_t>(n));
        for (double& v : logits) v = rng.uniform(-8, 8);
        ad::Graph g;
        ad::Value lv = g.constant(ad::Tensor::from(ad::Shape{n, 1}, logits));
        double label = rng.uniform() < 0.5 ? 1.0 : 0.0;
        double got = train::bce_with_logits(g, lv, label).item();
        double hand = 0.0;
        for (double x : logits) {
            double p = 1.0 / (1.0 + std::exp(-x));
            hand += label == 1.0 ? -std::log(p) : -std::log(1.0 - p);
        }
        hand /= static_cast<double>(n);
        worst_bce = std::max(worst_bce, std::abs(got - hand));
    }
    pass = pass && worst_bce <= 1e-12;

    // weighted total recomposes from the parts
    ModelConfig cfg = reduced_config();
    ad::ParameterStore store;
    register_model(store, cfg, rng);
    std::vector<SceneSample> batch{random_scene(rng, 2), random_scene(rng, 3)};
    train::LossWeights weights{0.37, 7.3, 0.021};
    train::OptimizerConfig opt;
    opt.batch_scenes = 2;
    Rng step_rng(73);
    train::LossReport rep = train::train_step(store, cfg, batch, weights, opt, step_rng);
    double recomposed = rep.gan1 + weights.lambda_z * rep.z + rep.gan2 +
                        weights.lambda_traj * rep.traj + weights.lambda_kl * rep.kl;
    double total_gap = std::abs(rep.total - recomposed);
    pass = pass && total_gap <= 1e-12;

    std::ostringstream detail;
    detail << "kl gap " << worst_kl << ", bce gap " << worst_bce << ", total gap " << total_gap;
    report(3, "loss-term oracles", pass, detail.str());
}

// ---------------------------------------------------------------- 4
void criterion_metric_oracles() {
    Rng rng(74);
    bool pass = true;

    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<Vec2> truth, pred;
        for (int t = 0; t < 12; ++t) {
            truth.push_back({rng.uniform(-10, 10), rng.uniform(-10, 10)});
            pred.push_back({rng.uniform(-10, 10), rng.uniform(-10, 10)});
        }
        double acc = 0.0;
        for (int t = 0; t < 12; ++t) {
            double dx = pred[static_cast<size_t>(t)].x - truth[static_cast<size_t>(t)].x;
            double dy = pred[static_cast<size_t>(t)].y - truth[static_cast<size_t>(t)].y;
            acc += std::sqrt(dx * dx + dy * dy);
        }
        worst = std::max(worst, std::abs(eval::ade(pred, truth) - acc / 12.0));
        double fdx = pred.back().x - truth.back().x;
        double fdy = pred.back().y - truth.back().y;
        worst = std::max(worst,
                         std::abs(eval::fde(pred, truth) - std::sqrt(fdx * fdx + fdy * fdy)));
    }
    pass = pass && worst <= 1e-12;

    // best-of-k monotonicity under nested draws, 100 random scenes
    ModelConfig cfg = reduced_config();
    ad::ParameterStore store;
    register_model(store, cfg, rng);
    int violations = 0;
    std::vector<SceneSample> scenes;
    for (int i = 0; i < 100; ++i) scenes.push_back(random_scene(rng, rng.uniform_int(1, 4)));
    auto r1 = eval::evaluate_best_of_k(cfg, store, scenes, 1, 99);
    auto r5 = eval::evaluate_best_of_k(cfg, store, scenes, 5, 99);
    auto r20 = eval::evaluate_best_of_k(cfg, store, scenes, 20, 99);
    for (size_t s = 0; s < scenes.size(); ++s)
        if (r5[s].ade > r1[s].ade + 1e-15 || r20[s].ade > r5[s].ade + 1e-15) ++violations;
    pass = pass && violations == 0;

    std::ostringstream detail;
    detail << "metric gap " << worst << ", monotonicity violations " << violations << "/100";
    report(4, "metric oracles", pass, detail.str());
}

// ---------------------------------------------------------------- 5
void criterion_constant_velocity() {
    auto t0 = std::chrono::steady_clock::now();

    data::SynthSpec spec;
    spec.kind = data::SynthKind::kConstantVelocity;
    spec.scenes = 556; // 500 train + held-out tail
    spec.min_peds = 1;
    spec.max_peds = 4;
    spec.noise = 0.05;
    spec.seed = 501;
    auto synth = data::synth_generate(spec);
    std::vector<SceneSample> train_scenes(synth.scenes.begin(), synth.scenes.begin() + 500);
    std::vector<SceneSample> test_scenes(synth.scenes.begin() + 500, synth.scenes.end());

    ModelConfig cfg; // paper-scale defaults
    train::LossWeights weights;
    train::OptimizerConfig opt;
    Rng rng(502);
    ad::ParameterStore store;
    register_model(store, cfg, rng);

    const int64_t kSteps = 2000;
    std::vector<size_t> order(train_scenes.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    size_t cursor = order.size();
    for (int64_t step = 1; step <= kSteps; ++step) {
        std::vector<SceneSample> batch;
        for (int64_t b = 0; b < opt.batch_scenes; ++b) {
            if (cursor >= order.size()) {
                for (size_t i = order.size(); i > 1; --i)
                    std::swap(order[i - 1], order[static_cast<size_t>(rng.uniform_int(
                                               0, static_cast<int64_t>(i) - 1))]);
                cursor = 0;
            }
            batch.push_back(train_scenes[order[cursor++]]);
        }
        train::train_step(store, cfg, batch, weights, opt, rng);
    }

    auto model_results = eval::evaluate_best_of_k(cfg, store, test_scenes, 1, 503);
    double model_ade = eval::macro_average(model_results).ade;
    double baseline_ade = eval::macro_average(eval::evaluate_linear_baseline(test_scenes)).ade;
    double elapsed = seconds_since(t0);

    bool pass = model_ade <= 0.10 && baseline_ade <= 0.05 && elapsed <= 600.0;
    std::ostringstream detail;
    detail << "best-of-1 ade " << model_ade << " (<= 0.10), baseline ade " << baseline_ade
           << " (<= 0.05), " << elapsed << "s";
    report(5, "constant-velocity convergence", pass, detail.str());
}

// ------------------------------------------------------------- 6 & 7
// Signed lateral offset of the scripted pedestrian's predicted midpoint
// relative to its observed heading.
double lateral_offset(const SceneSample& scene, const std::vector<Vec2>& future) {
    const TrajectoryWindow& w = scene.pedestrians[0];
    Vec2 heading = w.last_observed() - w.observed.front();
    double norm = heading.norm();
    if (norm < 1e-9) return 0.0;
    heading = heading * (1.0 / norm);
    Vec2 rel = future[kFutSteps / 2 - 1] - w.last_observed();
    return heading.x * rel.y - heading.y * rel.x;
}

void criterion_multimodality() {
    auto t0 = std::chrono::steady_clock::now();

    data::SynthSpec spec;
    spec.kind = data::SynthKind::kBimodalAvoidance;
    spec.scenes = 1050; // 1000 train + 50 test
    spec.noise = 0.03;
    spec.seed = 601;
    auto synth = data::synth_generate(spec);
    std::vector<SceneSample> train_scenes(synth.scenes.begin(), synth.scenes.begin() + 1000);
    std::vector<SceneSample> test_scenes(synth.scenes.begin() + 1000, synth.scenes.end());

    ModelConfig cfg;
    cfg.d_z = 3; // small latent keeps the noise-reconstruction task crisp
    train::LossWeights weights;
    train::OptimizerConfig opt;
    Rng rng(602);
    ad::ParameterStore store;
    register_model(store, cfg, rng);

    auto mean_lz = [&](uint64_t seed) {
        Rng z_rng(seed);
        double acc = 0.0;
        for (const SceneSample& scene : test_scenes)
            acc += train::loss_path_noise_report(cfg, store, scene, draw_latent(cfg, z_rng)).z;
        return acc / static_cast<double>(test_scenes.size());
    };
    double lz_init = mean_lz(603);

    const int64_t kSteps = 2000;
    std::vector<size_t> order(train_scenes.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    size_t cursor = order.size();
    for (int64_t step = 1; step <= kSteps; ++step) {
        std::vector<SceneSample> batch;
        for (int64_t b = 0; b < opt.batch_scenes; ++b) {
            if (cursor >= order.size()) {
                for (size_t i = order.size(); i > 1; --i)
                    std::swap(order[i - 1], order[static_cast<size_t>(rng.uniform_int(
                                               0, static_cast<int64_t>(i) - 1))]);
                cursor = 0;
            }
            batch.push_back(train_scenes[order[cursor++]]);
        }
        train::train_step(store, cfg, batch, weights, opt, rng);
    }

    // sample 20 latents per test scene and look for both passing sides
    const double kOffsetThreshold = 0.15;
    int both_modes = 0;
    Rng sample_rng(604);
    for (const SceneSample& scene : test_scenes) {
        bool left = false, right = false;
        for (int s = 0; s < 20; ++s) {
            PredictedScene pred = generate(cfg, store, scene, draw_latent(cfg, sample_rng));
            double off = lateral_offset(scene, pred.futures[0]);
            left = left || off > kOffsetThreshold;
            right = right || off < -kOffsetThreshold;
        }
        if (left && right) ++both_modes;
    }
    double mode_fraction = static_cast<double>(both_modes) /
                           static_cast<double>(test_scenes.size());

    double best1 = eval::macro_average(eval::evaluate_best_of_k(cfg, store, test_scenes, 1, 605)).ade;
    double best20 =
        eval::macro_average(eval::evaluate_best_of_k(cfg, store, test_scenes, 20, 605)).ade;
    double elapsed = seconds_since(t0);

    bool pass6 = mode_fraction >= 0.80 && best20 <= 0.6 * best1 && elapsed <= 1200.0;
    std::ostringstream d6;
    d6 << "both-mode fraction " << mode_fraction << " (>= 0.80), best-of-20 " << best20
       << " vs best-of-1 " << best1 << " (ratio " << best20 / best1 << " <= 0.6), " << elapsed
       << "s";
    report(6, "multimodality", pass6, d6.str());

    double lz_trained = mean_lz(603);
    bool pass7 = lz_trained <= 0.5 * lz_init;
    std::ostringstream d7;
    d7 << "fresh-sample L_z " << lz_trained << " vs init " << lz_init << " (ratio "
       << lz_trained / lz_init << " <= 0.5)";
    report(7, "latent bijection signal", pass7, d7.str());
}

// ---------------------------------------------------------------- 8
void criterion_data_roundtrip() {
    bool pass = true;
    std::ostringstream detail;

    fs::path fixture_dir = ACCEPTANCE_FIXTURE_DIR;
    int files = 0;
    double worst = 0.0;
    for (const auto& entry : fs::directory_iterator(fixture_dir)) {
        if (entry.path().extension() != ".txt") continue;
        ++files;
        auto rows = data::parse_tracks_file(entry.path());
        auto scenes = data::build_windows(rows);
        if (scenes.empty()) pass = false;
        for (const SceneSample& scene : scenes)
            for (const TrajectoryWindow& w : scene.pedestrians) {
                std::vector<Vec2> all(w.observed);
                all.insert(all.end(), w.future.begin(), w.future.end());
                auto disp = to_displacements(all);
                auto back = from_displacements(all[0] - disp[0],
                                               std::vector<Vec2>(disp.begin(), disp.end()));
                for (size_t t = 0; t < all.size(); ++t) {
                    worst = std::max(worst, std::abs(back[t].x - all[t].x));
                    worst = std::max(worst, std::abs(back[t].y - all[t].y));
                }
            }
    }
    pass = pass && files >= 3 && worst <= 1e-12;

    // synthetic emitters byte-reproducible per seed, all kinds
    for (auto kind : {data::SynthKind::kConstantVelocity, data::SynthKind::kSocialForces,
                      data::SynthKind::kBimodalAvoidance}) {
        data::SynthSpec spec;
        spec.kind = kind;
        spec.scenes = 20;
        spec.min_peds = 2;
        spec.max_peds = 4;
        spec.noise = 0.05;
        spec.seed = 801;
        std::ostringstream a, b;
        data::write_tracks(data::synth_generate(spec).rows(), a);
        data::write_tracks(data::synth_generate(spec).rows(), b);
        if (a.str() != b.str() || a.str().empty()) pass = false;
    }

    detail << files << " fixtures, worst reconstruction gap " << worst
           << ", emitters byte-stable";
    report(8, "data round-trip", pass, detail.str());
}

// ---------------------------------------------------------------- 9
void criterion_long_run(const std::string& data_dir) {
    if (data_dir.empty()) {
        std::printf("criterion 9 (hold-one-out long run): SKIP  [optional, not gating; "
                    "rerun with --long-data <dir> holding eth/hotel/univ/zara1/zara2 .txt "
                    "files; expected multi-hour runtime]\n");
        return;
    }
    // full protocol over the provided directory; informational, never gates
    std::map<std::string, std::vector<SceneSample>> by_name;
    for (std::string_view name : data::kSceneNames) {
        fs::path p = fs::path(data_dir) / (std::string(name) + ".txt");
        by_name[std::string(name)] = data::build_windows(data::parse_tracks_file(p), 1,
                                                         std::string(name) + ":");
    }
    // reference K=20 results for this protocol, per held-out scene
    std::map<std::string, std::pair<double, double>> reference{{"eth", {0.69, 1.29}},
                                                               {"hotel", {0.49, 1.01}},
                                                               {"univ", {0.55, 1.32}},
                                                               {"zara1", {0.30, 0.62}},
                                                               {"zara2", {0.36, 0.75}}};
    for (std::string_view held : data::kSceneNames) {
        auto split = data::hold_one_out_split(by_name, held);
        ModelConfig cfg;
        train::LossWeights weights;
        train::OptimizerConfig opt;
        Rng rng(901);
        ad::ParameterStore store;
        register_model(store, cfg, rng);
        std::vector<size_t> order(split.train.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        size_t cursor = order.size();
        for (int64_t step = 1; step <= 20000; ++step) {
            std::vector<SceneSample> batch;
            for (int64_t b = 0; b < opt.batch_scenes; ++b) {
                if (cursor >= order.size()) {
                    for (size_t i = order.size(); i > 1; --i)
                        std::swap(order[i - 1], order[static_cast<size_t>(rng.uniform_int(
                                                   0, static_cast<int64_t>(i) - 1))]);
                    cursor = 0;
                }
                batch.push_back(split.train[order[cursor++]]);
            }
            train::train_step(store, cfg, batch, weights, opt, rng);
        }
        auto res = eval::evaluate_best_of_k(cfg, store, split.test, 20, 902);
        auto avg = eval::macro_average(res);
        auto [ref_ade, ref_fde] = reference[std::string(held)];
        bool within = avg.ade <= 1.25 * ref_ade && avg.fde <= 1.25 * ref_fde;
        std::printf("criterion 9 (hold-one-out long run): INFO  [%s: K=20 ade %.3f fde %.3f, "
                    "reference %.2f/%.2f, within 25%%: %s]\n",
                    std::string(held).c_str(), avg.ade, avg.fde, ref_ade, ref_fde,
                    within ? "yes" : "no");
    }
}

} // namespace

int main(int argc, char** argv) {
    int only = 0;
    std::string long_data;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
        else if (std::strcmp(argv[i], "--long-data") == 0 && i + 1 < argc) long_data = argv[++i];
    }

    auto want = [&](int n) { return only == 0 || only == n; };

    if (want(1)) criterion_gradients();
    if (want(2)) criterion_permutation();
    if (want(3)) criterion_loss_oracles();
    if (want(4)) criterion_metric_oracles();
    if (want(8)) criterion_data_roundtrip();
    if (want(5)) criterion_constant_velocity();
    if (want(6) || want(7)) criterion_multimodality();
    if (only == 0 || only == 9) criterion_long_run(long_data);

    if (g_failures > 0) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all gating criteria passed\n");
    return 0;
}
