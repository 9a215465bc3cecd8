#include "bigat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "bigat/rng.hpp"

namespace bigat::eval {

double ade(std::span<const Vec2> pred, std::span<const Vec2> truth) {
    if (pred.size() != truth.size() || pred.empty())
        throw ContractError("ade: got " + std::to_string(pred.size()) + " predicted vs " +
                            std::to_string(truth.size()) + " true positions");
    double acc = 0.0;
    for (size_t t = 0; t < pred.size(); ++t) acc += (pred[t] - truth[t]).norm();
    return acc / static_cast<double>(pred.size());
}

double fde(std::span<const Vec2> pred, std::span<const Vec2> truth) {
    if (pred.size() != truth.size() || pred.empty())
        throw ContractError("fde: got " + std::to_string(pred.size()) + " predicted vs " +
                            std::to_string(truth.size()) + " true positions");
    return (pred.back() - truth.back()).norm();
}

std::vector<MetricResult> evaluate_best_of_k(const ModelConfig& cfg, ad::ParameterStore& store,
                                             std::span<const SceneSample> scenes, int64_t k,
                                             uint64_t seed, bool independent_min) {
    if (k < 1) throw ContractError("evaluate_best_of_k: k must be at least 1");
    std::vector<MetricResult> results;
    Rng base(seed);
    for (size_t s = 0; s < scenes.size(); ++s) {
        const SceneSample& scene = scenes[s];
        size_t n = scene.pedestrians.size();
        std::vector<double> best_ade(n, std::numeric_limits<double>::infinity());
        std::vector<double> best_fde(n, std::numeric_limits<double>::infinity());
        std::vector<double> fde_of_best(n, 0.0);

        Rng rng = base.fork(s); // nested draws: k samples extend, never reshuffle
        for (int64_t sample = 0; sample < k; ++sample) {
            PredictedScene pred = model::generate(cfg, store, scene, model::draw_latent(cfg, rng));
            for (size_t i = 0; i < n; ++i) {
                double a = ade(pred.futures[i], scene.pedestrians[i].future);
                double f = fde(pred.futures[i], scene.pedestrians[i].future);
                if (a < best_ade[i]) {
                    best_ade[i] = a;
                    fde_of_best[i] = f;
                }
                best_fde[i] = std::min(best_fde[i], f);
            }
        }
        MetricResult r;
        r.scene = scene.scene_id;
        r.k = k;
        r.n_pedestrians = static_cast<int64_t>(n);
        for (size_t i = 0; i < n; ++i) {
            r.ade += best_ade[i];
            r.fde += independent_min ? best_fde[i] : fde_of_best[i];
        }
        r.ade /= static_cast<double>(n);
        r.fde /= static_cast<double>(n);
        results.push_back(std::move(r));
    }
    return results;
}

MetricResult macro_average(std::span<const MetricResult> results) {
    MetricResult avg;
    avg.scene = "avg";
    if (results.empty()) return avg;
    for (const MetricResult& r : results) {
        avg.ade += r.ade;
        avg.fde += r.fde;
        avg.n_pedestrians += r.n_pedestrians;
    }
    avg.k = results.front().k;
    avg.ade /= static_cast<double>(results.size());
    avg.fde /= static_cast<double>(results.size());
    return avg;
}

PredictedScene linear_baseline(const SceneSample& scene) {
    scene.validate();
    PredictedScene pred;
    for (const model::TrajectoryWindow& w : scene.pedestrians) {
        // least squares over t = 0..kObsSteps-1 per coordinate
        double n = static_cast<double>(model::kObsSteps);
        double t_mean = (n - 1.0) / 2.0;
        double sxx = 0.0;
        for (int64_t t = 0; t < model::kObsSteps; ++t) {
            double dt = static_cast<double>(t) - t_mean;
            sxx += dt * dt;
        }
        double mean_x = 0.0, mean_y = 0.0, sxy_x = 0.0, sxy_y = 0.0;
        for (int64_t t = 0; t < model::kObsSteps; ++t) {
            mean_x += w.observed[static_cast<size_t>(t)].x;
            mean_y += w.observed[static_cast<size_t>(t)].y;
        }
        mean_x /= n;
        mean_y /= n;
        for (int64_t t = 0; t < model::kObsSteps; ++t) {
            double dt = static_cast<double>(t) - t_mean;
            sxy_x += dt * (w.observed[static_cast<size_t>(t)].x - mean_x);
            sxy_y += dt * (w.observed[static_cast<size_t>(t)].y - mean_y);
        }
        double slope_x = sxy_x / sxx, slope_y = sxy_y / sxx;
        std::vector<Vec2> fut;
        for (int64_t t = model::kObsSteps; t < model::kObsSteps + model::kFutSteps; ++t) {
            double dt = static_cast<double>(t) - t_mean;
            fut.push_back({mean_x + slope_x * dt, mean_y + slope_y * dt});
        }
        pred.futures.push_back(std::move(fut));
    }
    return pred;
}

std::vector<MetricResult> evaluate_linear_baseline(std::span<const SceneSample> scenes) {
    std::vector<MetricResult> results;
    for (const SceneSample& scene : scenes) {
        PredictedScene pred = linear_baseline(scene);
        MetricResult r;
        r.scene = scene.scene_id;
        r.k = 1;
        r.n_pedestrians = scene.size();
        for (size_t i = 0; i < pred.futures.size(); ++i) {
            r.ade += ade(pred.futures[i], scene.pedestrians[i].future);
            r.fde += fde(pred.futures[i], scene.pedestrians[i].future);
        }
        r.ade /= static_cast<double>(pred.futures.size());
        r.fde /= static_cast<double>(pred.futures.size());
        results.push_back(std::move(r));
    }
    return results;
}

std::vector<SweepRow> latent_sweep(const ModelConfig& cfg, ad::ParameterStore& store,
                                   const SceneSample& scene, std::span<const LatentCode> grid) {
    std::vector<SweepRow> rows;
    for (size_t zi = 0; zi < grid.size(); ++zi) {
        PredictedScene pred = model::generate(cfg, store, scene, grid[zi]);
        for (size_t i = 0; i < pred.futures.size(); ++i)
            for (size_t t = 0; t < pred.futures[i].size(); ++t)
                rows.push_back({static_cast<int64_t>(zi), scene.pedestrians[i].ped_id,
                                static_cast<int64_t>(t), pred.futures[i][t].x,
                                pred.futures[i][t].y});
    }
    return rows;
}

void write_metrics_csv(std::span<const MetricResult> results, std::ostream& os) {
    os << "scene,k,ade,fde,n_pedestrians\n";
    char buf[192];
    for (const MetricResult& r : results) {
        std::snprintf(buf, sizeof buf, "%s,%lld,%.6f,%.6f,%lld\n", r.scene.c_str(),
                      static_cast<long long>(r.k), r.ade, r.fde,
                      static_cast<long long>(r.n_pedestrians));
        os << buf;
    }
}

void write_sweep_csv(std::span<const SweepRow> rows, std::ostream& os) {
    os << "z_index,ped_id,t,x,y\n";
    char buf[160];
    for (const SweepRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%lld,%lld,%lld,%.9g,%.9g\n",
                      static_cast<long long>(r.z_index), static_cast<long long>(r.ped_id),
                      static_cast<long long>(r.t), r.x, r.y);
        os << buf;
    }
}

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

void polyline(std::ostream& os, const std::vector<Vec2>& pts, const char* color, bool dashed,
              double scale, Vec2 lo) {
    os << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"";
    if (dashed) os << " stroke-dasharray=\"6,4\" opacity=\"0.7\"";
    os << " points=\"";
    for (const Vec2& p : pts)
        os << (p.x - lo.x) * scale + 20.0 << "," << (p.y - lo.y) * scale + 20.0 << " ";
    os << "\"/>\n";
}

} // namespace

void write_sweep_svg(const SceneSample& scene, std::span<const SweepRow> rows,
                     const std::filesystem::path& path) {
    Vec2 lo{1e300, 1e300}, hi{-1e300, -1e300};
    auto grow = [&](Vec2 p) {
        lo.x = std::min(lo.x, p.x);
        lo.y = std::min(lo.y, p.y);
        hi.x = std::max(hi.x, p.x);
        hi.y = std::max(hi.y, p.y);
    };
    for (const auto& w : scene.pedestrians)
        for (const Vec2& p : w.observed) grow(p);
    for (const SweepRow& r : rows) grow({r.x, r.y});
    double span = std::max({hi.x - lo.x, hi.y - lo.y, 1e-6});
    double scale = 560.0 / span;

    std::ofstream os(path);
    if (!os) throw ParseError("cannot write svg '" + path.string() + "'");
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"600\">\n";
    os << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (size_t i = 0; i < scene.pedestrians.size(); ++i)
        polyline(os, scene.pedestrians[i].observed, kPalette[i % 8], false, scale, lo);
    // one dashed track per (z, ped)
    std::map<std::pair<int64_t, int64_t>, std::vector<Vec2>> generated;
    for (const SweepRow& r : rows) generated[{r.z_index, r.ped_id}].push_back({r.x, r.y});
    for (const auto& [key, pts] : generated) {
        size_t ped_index = 0;
        for (size_t i = 0; i < scene.pedestrians.size(); ++i)
            if (scene.pedestrians[i].ped_id == key.second) ped_index = i;
        polyline(os, pts, kPalette[ped_index % 8], true, scale, lo);
    }
    os << "</svg>\n";
}

} // namespace bigat::eval
