#include "bigat/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "bigat/config.hpp"
#include "bigat/data.hpp"
#include "bigat/gradsuite.hpp"
#include "bigat/metrics.hpp"
#include "bigat/training.hpp"

namespace bigat::cli {

namespace fs = std::filesystem;
using model::LatentCode;
using model::SceneSample;

namespace {

struct DataOptions {
    std::string data_dir;
    std::string manifest_path;
    std::string synth_kind;
    int64_t synth_scenes = 200;
    int64_t min_peds = 1;
    int64_t max_peds = 4;
    double noise = 0.02;
};

struct LoadedData {
    std::vector<SceneSample> train;
    std::vector<SceneSample> test;
};

void add_data_flags(CLI::App* cmd, DataOptions& opts) {
    cmd->add_option("--data", opts.data_dir, "directory of track files (*.txt)");
    cmd->add_option("--manifest", opts.manifest_path,
                    "split manifest with train:/test: file lists");
    cmd->add_option("--synth", opts.synth_kind,
                    "synthetic generator kind: constant-velocity, social-forces, "
                    "bimodal-avoidance");
    cmd->add_option("--scenes", opts.synth_scenes, "synthetic scene count");
    cmd->add_option("--min-peds", opts.min_peds, "synthetic minimum pedestrians per scene");
    cmd->add_option("--max-peds", opts.max_peds, "synthetic maximum pedestrians per scene");
    cmd->add_option("--noise", opts.noise, "synthetic noise scale, meters");
}

std::vector<SceneSample> windows_from_file(const fs::path& path) {
    auto rows = data::parse_tracks_file(path);
    auto scenes = data::build_windows(rows, 1, path.stem().string() + ":");
    fs::path grid_path = path;
    grid_path.replace_extension(".grid");
    if (fs::exists(grid_path)) {
        nn::FeatureGrid grid = nn::load_grid(grid_path);
        for (SceneSample& s : scenes) s.grid = grid;
    }
    return scenes;
}

LoadedData load_data(const RunConfig& cfg, const DataOptions& opts) {
    LoadedData out;
    if (!opts.synth_kind.empty()) {
        data::SynthSpec spec;
        spec.kind = data::synth_kind_from_string(opts.synth_kind);
        spec.scenes = opts.synth_scenes;
        spec.min_peds = opts.min_peds;
        spec.max_peds = opts.max_peds;
        spec.noise = opts.noise;
        spec.seed = cfg.seed;
        auto result = data::synth_generate(spec);
        size_t n_test = std::max<size_t>(1, result.scenes.size() / 10);
        size_t n_train = result.scenes.size() > n_test ? result.scenes.size() - n_test : 0;
        out.train.assign(result.scenes.begin(),
                         result.scenes.begin() + static_cast<int64_t>(n_train));
        out.test.assign(result.scenes.begin() + static_cast<int64_t>(n_train),
                        result.scenes.end());
        return out;
    }
    if (!opts.manifest_path.empty()) {
        data::Manifest manifest = data::load_manifest(opts.manifest_path);
        for (const fs::path& p : manifest.train) {
            auto scenes = windows_from_file(p);
            out.train.insert(out.train.end(), scenes.begin(), scenes.end());
        }
        for (const fs::path& p : manifest.test) {
            auto scenes = windows_from_file(p);
            out.test.insert(out.test.end(), scenes.begin(), scenes.end());
        }
        return out;
    }
    if (opts.data_dir.empty())
        throw ConfigError("no data source: pass --data, --manifest or --synth");
    std::map<std::string, std::vector<SceneSample>> by_name;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(opts.data_dir))
        if (entry.path().extension() == ".txt") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty())
        throw ParseError("no .txt track files under '" + opts.data_dir + "'");
    for (const fs::path& p : files) by_name[p.stem().string()] = windows_from_file(p);

    bool canonical = true;
    for (std::string_view name : data::kSceneNames)
        if (!by_name.count(std::string(name))) canonical = false;
    if (canonical) {
        data::DatasetSplit split = data::hold_one_out_split(by_name, cfg.hold_out);
        out.train = std::move(split.train);
        out.test = std::move(split.test);
    } else {
        for (auto& [name, scenes] : by_name)
            out.train.insert(out.train.end(), scenes.begin(), scenes.end());
    }
    return out;
}

template <typename T>
void fisher_yates(std::vector<T>& v, Rng& rng) {
    for (size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1))]);
}

void print_metrics(const std::vector<eval::MetricResult>& results) {
    std::vector<eval::MetricResult> with_avg(results.begin(), results.end());
    with_avg.push_back(eval::macro_average(results));
    eval::write_metrics_csv(with_avg, std::cout);
}

ad::ParameterStore load_checkpoint_with_config(const std::string& checkpoint, RunConfig& cfg,
                                               bool config_given) {
    if (!config_given) {
        fs::path sidecar = checkpoint + ".config";
        if (fs::exists(sidecar)) cfg.apply_file(sidecar);
    }
    ad::ParameterStore store;
    store.load(checkpoint);
    return store;
}

int run_train(RunConfig cfg, const DataOptions& data_opts, const std::string& out_path,
              const std::string& log_path) {
    LoadedData data = load_data(cfg, data_opts);
    if (data.train.empty()) throw ConfigError("no training scenes loaded");
    std::cerr << "training on " << data.train.size() << " scenes (" << data.test.size()
              << " held out), " << cfg.steps << " steps\n";

    Rng rng(cfg.seed);
    ad::ParameterStore store;
    model::register_model(store, cfg.model, rng);

    std::ofstream log(log_path);
    if (!log) throw ParseError("cannot write log '" + log_path + "'");

    std::vector<size_t> order(data.train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    size_t cursor = order.size(); // force shuffle on first batch

    for (int64_t step = 1; step <= cfg.steps; ++step) {
        std::vector<SceneSample> batch;
        for (int64_t b = 0; b < cfg.opt.batch_scenes; ++b) {
            if (cursor >= order.size()) {
                fisher_yates(order, rng);
                cursor = 0;
            }
            batch.push_back(data.train[order[cursor++]]);
        }
        train::LossReport rep = train_step(store, cfg.model, batch, cfg.weights, cfg.opt, rng);
        train::append_log_line(log, step, rep);
        if (step == 1 || step % 100 == 0)
            std::cerr << "step " << step << " total " << rep.total << " traj " << rep.traj
                      << "\n";
        if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0)
            store.save(out_path + "." + std::to_string(step));
    }
    store.save(out_path);
    std::ofstream cfg_out(out_path + ".config");
    cfg_out << cfg.to_text();
    std::cerr << "checkpoint written to " << out_path << "\n";

    if (!data.test.empty()) {
        auto results = eval::evaluate_best_of_k(cfg.model, store, data.test, cfg.k_eval, cfg.seed);
        print_metrics(results);
    }
    return 0;
}

int run_evaluate(RunConfig cfg, const DataOptions& data_opts, const std::string& checkpoint,
                 bool config_given, int64_t k_override) {
    ad::ParameterStore store = load_checkpoint_with_config(checkpoint, cfg, config_given);
    if (k_override > 0) cfg.k_eval = k_override;
    LoadedData data = load_data(cfg, data_opts);
    const auto& scenes = data.test.empty() ? data.train : data.test;
    auto results = eval::evaluate_best_of_k(cfg.model, store, scenes, cfg.k_eval, cfg.seed);
    print_metrics(results);
    return 0;
}

int run_sample_or_sweep(RunConfig cfg, const DataOptions& data_opts,
                        const std::string& checkpoint, bool config_given, int64_t scene_index,
                        int64_t samples, const std::string& out_path,
                        const std::string& svg_path) {
    ad::ParameterStore store = load_checkpoint_with_config(checkpoint, cfg, config_given);
    LoadedData data = load_data(cfg, data_opts);
    const auto& scenes = data.test.empty() ? data.train : data.test;
    if (scene_index < 0 || scene_index >= static_cast<int64_t>(scenes.size()))
        throw ConfigError("scene index " + std::to_string(scene_index) + " out of range (" +
                          std::to_string(scenes.size()) + " scenes)");
    const SceneSample& scene = scenes[static_cast<size_t>(scene_index)];

    Rng rng(cfg.seed);
    std::vector<LatentCode> grid;
    for (int64_t i = 0; i < samples; ++i) grid.push_back(model::draw_latent(cfg.model, rng));
    auto rows = eval::latent_sweep(cfg.model, store, scene, grid);

    if (out_path.empty() || out_path == "-") {
        eval::write_sweep_csv(rows, std::cout);
    } else {
        std::ofstream os(out_path);
        if (!os) throw ParseError("cannot write '" + out_path + "'");
        eval::write_sweep_csv(rows, os);
    }
    if (!svg_path.empty()) eval::write_sweep_svg(scene, rows, svg_path);
    return 0;
}

int run_synth(const DataOptions& opts, uint64_t seed, const std::string& out_path) {
    data::SynthSpec spec;
    spec.kind = data::synth_kind_from_string(opts.synth_kind);
    spec.scenes = opts.synth_scenes;
    spec.min_peds = opts.min_peds;
    spec.max_peds = opts.max_peds;
    spec.noise = opts.noise;
    spec.seed = seed;
    auto result = data::synth_generate(spec);
    data::write_tracks_file(result.rows(), out_path);
    if (!result.mode_labels.empty()) {
        std::ofstream os(out_path + ".modes");
        for (int m : result.mode_labels) os << m << "\n";
    }
    std::cerr << "wrote " << result.scenes.size() << " scenes to " << out_path << "\n";
    return 0;
}

int run_gradcheck(uint64_t seed) {
    auto entries = eval::run_gradient_suite(seed);
    bool ok = true;
    for (const auto& e : entries) {
        std::printf("%-32s %10.3e (tol %.0e)  %s\n", e.name.c_str(), e.max_rel_error,
                    e.tolerance, e.pass ? "ok" : "FAIL");
        ok = ok && e.pass;
    }
    if (!ok) {
        std::cerr << "gradient checks failed\n";
        return 3;
    }
    return 0;
}

int run_baseline(RunConfig cfg, const DataOptions& data_opts) {
    LoadedData data = load_data(cfg, data_opts);
    const auto& scenes = data.test.empty() ? data.train : data.test;
    print_metrics(eval::evaluate_linear_baseline(scenes));
    return 0;
}

} // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"multimodal pedestrian trajectory forecaster"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string config_path;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "run config file (key = value lines)");
    app.add_option("--set", overrides, "config override key=value")->take_all();

    DataOptions data_opts;
    std::string out_path = "model.ckpt";
    std::string log_path = "train_log.csv";
    std::string checkpoint;
    std::string csv_out;
    std::string svg_out;
    int64_t k_override = 0;
    int64_t scene_index = 0;
    int64_t samples = 5;
    uint64_t seed_flag = 0;
    bool seed_given = false;
    int64_t steps_flag = 0;

    CLI::App* train = app.add_subcommand("train", "train a model");
    train->fallthrough();
    add_data_flags(train, data_opts);
    train->add_option("--out", out_path, "checkpoint output path");
    train->add_option("--log", log_path, "training log csv path");
    train->add_option("--steps", steps_flag, "training steps");
    train->add_option("--seed", seed_flag, "seed override")->each([&](const std::string&) {
        seed_given = true;
    });

    CLI::App* evaluate = app.add_subcommand("evaluate", "best-of-k metrics for a checkpoint");
    evaluate->fallthrough();
    add_data_flags(evaluate, data_opts);
    evaluate->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    evaluate->add_option("--k", k_override, "samples per scene");
    evaluate->add_option("--seed", seed_flag, "seed override")->each([&](const std::string&) {
        seed_given = true;
    });

    CLI::App* sample = app.add_subcommand("sample", "write sampled trajectories for one scene");
    sample->fallthrough();
    add_data_flags(sample, data_opts);
    sample->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    sample->add_option("--scene-index", scene_index, "scene to sample");
    sample->add_option("--samples", samples, "number of latent draws");
    sample->add_option("--out", csv_out, "trajectory csv path (default stdout)");
    sample->add_option("--seed", seed_flag, "seed override")->each([&](const std::string&) {
        seed_given = true;
    });

    CLI::App* sweep = app.add_subcommand("sweep", "latent sweep export (csv and optional svg)");
    sweep->fallthrough();
    add_data_flags(sweep, data_opts);
    sweep->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    sweep->add_option("--scene-index", scene_index, "scene to sweep");
    sweep->add_option("--samples", samples, "number of latent draws");
    sweep->add_option("--out", csv_out, "trajectory csv path (default stdout)");
    sweep->add_option("--svg", svg_out, "overlay svg path");
    sweep->add_option("--seed", seed_flag, "seed override")->each([&](const std::string&) {
        seed_given = true;
    });

    CLI::App* synth = app.add_subcommand("synth", "emit a synthetic dataset as a track file");
    synth->fallthrough();
    synth->add_option("--kind", data_opts.synth_kind, "generator kind")->required();
    synth->add_option("--scenes", data_opts.synth_scenes, "scene count");
    synth->add_option("--min-peds", data_opts.min_peds, "minimum pedestrians");
    synth->add_option("--max-peds", data_opts.max_peds, "maximum pedestrians");
    synth->add_option("--noise", data_opts.noise, "noise scale, meters");
    synth->add_option("--seed", seed_flag, "generator seed")->each([&](const std::string&) {
        seed_given = true;
    });
    synth->add_option("--out", out_path, "output track file")->required();

    CLI::App* gradcheck =
        app.add_subcommand("gradcheck", "finite-difference validation of the whole stack");
    gradcheck->fallthrough();
    gradcheck->add_option("--seed", seed_flag, "suite seed")->each([&](const std::string&) {
        seed_given = true;
    });

    CLI::App* baseline = app.add_subcommand("baseline", "least-squares linear extrapolation");
    baseline->fallthrough();
    add_data_flags(baseline, data_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, std::cout, std::cerr);
        return code == 0 ? 0 : 1;
    }

    try {
        if (!config_path.empty()) cfg.apply_file(config_path);
        for (const std::string& kv : overrides) {
            size_t eq = kv.find('=');
            if (eq == std::string::npos)
                throw ConfigError("--set expects key=value, got '" + kv + "'");
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (seed_given) cfg.seed = seed_flag;
        if (steps_flag > 0) cfg.steps = steps_flag;

        if (train->parsed()) return run_train(cfg, data_opts, out_path, log_path);
        if (evaluate->parsed())
            return run_evaluate(cfg, data_opts, checkpoint, !config_path.empty(), k_override);
        if (sample->parsed() || sweep->parsed())
            return run_sample_or_sweep(cfg, data_opts, checkpoint, !config_path.empty(),
                                       scene_index, samples, csv_out, svg_out);
        if (synth->parsed()) return run_synth(data_opts, cfg.seed, out_path);
        if (gradcheck->parsed()) return run_gradcheck(seed_given ? seed_flag : 1);
        if (baseline->parsed()) return run_baseline(cfg, data_opts);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        std::cerr << app.help() << "\n";
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}

} // namespace bigat::cli
