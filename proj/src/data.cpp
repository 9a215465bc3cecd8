#include "bigat/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "bigat/rng.hpp"

namespace bigat::data {

namespace {

bool parse_double(std::string_view token, double& out) {
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
    return ec == std::errc{} && ptr == token.data() + token.size() && std::isfinite(out);
}

bool parse_integral(std::string_view token, int64_t& out) {
    double v = 0.0;
    if (!parse_double(token, v)) return false;
    if (v != std::floor(v) || std::abs(v) > 9.0e15) return false;
    out = static_cast<int64_t>(v);
    return true;
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

} // namespace

std::vector<RawTrackRow> parse_tracks(std::istream& is, const std::string& source) {
    std::vector<RawTrackRow> rows;
    std::string line;
    int64_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        auto tokens = split_ws(line);
        if (tokens.empty()) continue;
        if (tokens.size() != 4)
            throw ParseError(source + ":" + std::to_string(line_no) + ": expected 4 fields, got " +
                             std::to_string(tokens.size()));
        RawTrackRow row;
        if (!parse_integral(tokens[0], row.frame) || !parse_integral(tokens[1], row.ped) ||
            !parse_double(tokens[2], row.x) || !parse_double(tokens[3], row.y))
            throw ParseError(source + ":" + std::to_string(line_no) + ": non-numeric field in '" +
                             line + "'");
        rows.push_back(row);
    }
    std::sort(rows.begin(), rows.end(), [](const RawTrackRow& a, const RawTrackRow& b) {
        return a.frame != b.frame ? a.frame < b.frame : a.ped < b.ped;
    });
    for (size_t i = 1; i < rows.size(); ++i)
        if (rows[i].frame == rows[i - 1].frame && rows[i].ped == rows[i - 1].ped)
            throw ParseError(source + ": duplicate (frame, ped) pair " +
                             std::to_string(rows[i].frame) + "," + std::to_string(rows[i].ped));
    return rows;
}

std::vector<RawTrackRow> parse_tracks_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open track file '" + path.string() + "'");
    return parse_tracks(is, path.filename().string());
}

void write_tracks(std::span<const RawTrackRow> rows, std::ostream& os) {
    char buf[128];
    for (const RawTrackRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%lld\t%lld\t%.17g\t%.17g\n",
                      static_cast<long long>(r.frame), static_cast<long long>(r.ped), r.x, r.y);
        os << buf;
    }
}

void write_tracks_file(std::span<const RawTrackRow> rows, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw ParseError("cannot write track file '" + path.string() + "'");
    write_tracks(rows, os);
    if (!os) throw ParseError("track write failed for '" + path.string() + "'");
}

std::vector<SceneSample> build_windows(std::span<const RawTrackRow> rows, int64_t stride,
                                       const std::string& scene_prefix) {
    if (stride < 1) throw ContractError("build_windows: stride must be at least 1");
    std::vector<SceneSample> scenes;
    if (rows.empty()) return scenes;

    std::vector<int64_t> frames;
    for (const RawTrackRow& r : rows) frames.push_back(r.frame);
    std::sort(frames.begin(), frames.end());
    frames.erase(std::unique(frames.begin(), frames.end()), frames.end());

    int64_t step = 0;
    for (size_t i = 1; i < frames.size(); ++i) {
        int64_t d = frames[i] - frames[i - 1];
        step = step == 0 ? d : std::min(step, d);
    }
    if (step == 0) step = 1; // single frame: no window will complete anyway

    // (ped, frame) -> position
    std::unordered_map<int64_t, std::unordered_map<int64_t, Vec2>> tracks;
    std::vector<int64_t> ped_order;
    for (const RawTrackRow& r : rows) {
        auto [it, inserted] = tracks.try_emplace(r.ped);
        if (inserted) ped_order.push_back(r.ped);
        it->second.emplace(r.frame, Vec2{r.x, r.y});
    }
    std::sort(ped_order.begin(), ped_order.end());

    const int64_t total = model::kObsSteps + model::kFutSteps;
    for (size_t start = 0; start < frames.size(); start += static_cast<size_t>(stride)) {
        int64_t f0 = frames[start];
        SceneSample scene;
        scene.scene_id = scene_prefix + std::to_string(f0);
        for (int64_t ped : ped_order) {
            const auto& track = tracks[ped];
            TrajectoryWindow w;
            w.ped_id = ped;
            bool complete = true;
            for (int64_t k = 0; k < total && complete; ++k) {
                auto it = track.find(f0 + k * step);
                if (it == track.end()) {
                    complete = false;
                    break;
                }
                if (k < model::kObsSteps)
                    w.observed.push_back(it->second);
                else
                    w.future.push_back(it->second);
            }
            if (complete) scene.pedestrians.push_back(std::move(w));
        }
        if (!scene.pedestrians.empty()) {
            scene.validate();
            scenes.push_back(std::move(scene));
        }
    }
    return scenes;
}

SynthKind synth_kind_from_string(std::string_view name) {
    if (name == "constant-velocity") return SynthKind::kConstantVelocity;
    if (name == "social-forces") return SynthKind::kSocialForces;
    if (name == "bimodal-avoidance") return SynthKind::kBimodalAvoidance;
    throw ConfigError("unknown synthetic generator kind '" + std::string(name) + "'");
}

const char* to_string(SynthKind kind) {
    switch (kind) {
        case SynthKind::kConstantVelocity: return "constant-velocity";
        case SynthKind::kSocialForces: return "social-forces";
        case SynthKind::kBimodalAvoidance: return "bimodal-avoidance";
    }
    return "?";
}

namespace {

constexpr int64_t kTotalSteps = model::kObsSteps + model::kFutSteps;

TrajectoryWindow window_from_positions(int64_t ped_id, const std::vector<Vec2>& positions) {
    TrajectoryWindow w;
    w.ped_id = ped_id;
    w.observed.assign(positions.begin(), positions.begin() + model::kObsSteps);
    w.future.assign(positions.begin() + model::kObsSteps, positions.end());
    return w;
}

std::vector<std::vector<Vec2>> constant_velocity_scene(const SynthSpec& spec, Rng& rng,
                                                       int64_t n_peds) {
    std::vector<std::vector<Vec2>> tracks;
    for (int64_t i = 0; i < n_peds; ++i) {
        Vec2 start{rng.uniform(-6.0, 6.0), rng.uniform(-6.0, 6.0)};
        double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
        double speed = rng.uniform(0.9, 1.5);
        Vec2 vel{speed * std::cos(heading), speed * std::sin(heading)};
        // the noise scale perturbs the velocity; tracks stay exactly linear
        vel.x += rng.normal(0.0, spec.noise);
        vel.y += rng.normal(0.0, spec.noise);
        std::vector<Vec2> track;
        for (int64_t t = 0; t < kTotalSteps; ++t)
            track.push_back(start + vel * (model::kTimestep * static_cast<double>(t)));
        tracks.push_back(std::move(track));
    }
    return tracks;
}

std::vector<std::vector<Vec2>> social_forces_scene(const SynthSpec& spec, Rng& rng,
                                                   int64_t n_peds) {
    constexpr double kDesiredSpeed = 1.3;
    constexpr double kRelaxation = 0.5;   // seconds
    constexpr double kRepulsionA = 1.5;   // m/s^2
    constexpr double kRepulsionB = 0.4;   // meters
    constexpr double kBodyRadius = 0.3;   // meters
    constexpr double kMaxSpeed = 2.0;

    // antipodal start/goal pairs around a circle, scattered by the noise scale
    double circle = 5.0;
    std::vector<Vec2> pos(static_cast<size_t>(n_peds)), goal(static_cast<size_t>(n_peds)),
        vel(static_cast<size_t>(n_peds));
    for (int64_t i = 0; i < n_peds; ++i) {
        double angle = 2.0 * std::numbers::pi * static_cast<double>(i) /
                           static_cast<double>(n_peds) +
                       rng.uniform(-0.1, 0.1);
        pos[static_cast<size_t>(i)] = {circle * std::cos(angle) + rng.normal(0.0, spec.noise),
                                       circle * std::sin(angle) + rng.normal(0.0, spec.noise)};
        goal[static_cast<size_t>(i)] = {-circle * std::cos(angle) + rng.normal(0.0, spec.noise),
                                        -circle * std::sin(angle) + rng.normal(0.0, spec.noise)};
        Vec2 dir = goal[static_cast<size_t>(i)] - pos[static_cast<size_t>(i)];
        double d = dir.norm();
        vel[static_cast<size_t>(i)] = d > 0 ? dir * (kDesiredSpeed / d) : Vec2{};
    }

    std::vector<std::vector<Vec2>> tracks(static_cast<size_t>(n_peds));
    for (int64_t t = 0; t < kTotalSteps; ++t) {
        for (int64_t i = 0; i < n_peds; ++i) tracks[static_cast<size_t>(i)].push_back(pos[static_cast<size_t>(i)]);
        std::vector<Vec2> force(static_cast<size_t>(n_peds));
        for (int64_t i = 0; i < n_peds; ++i) {
            Vec2 to_goal = goal[static_cast<size_t>(i)] - pos[static_cast<size_t>(i)];
            double d = to_goal.norm();
            Vec2 desired = d > 1e-9 ? to_goal * (kDesiredSpeed / d) : Vec2{};
            force[static_cast<size_t>(i)] =
                (desired - vel[static_cast<size_t>(i)]) * (1.0 / kRelaxation);
            for (int64_t j = 0; j < n_peds; ++j) {
                if (j == i) continue;
                Vec2 away = pos[static_cast<size_t>(i)] - pos[static_cast<size_t>(j)];
                double dist = away.norm();
                if (dist < 1e-9) continue;
                double mag = kRepulsionA * std::exp((2.0 * kBodyRadius - dist) / kRepulsionB);
                force[static_cast<size_t>(i)] =
                    force[static_cast<size_t>(i)] + away * (mag / dist);
            }
        }
        for (int64_t i = 0; i < n_peds; ++i) {
            Vec2& v = vel[static_cast<size_t>(i)];
            v = v + force[static_cast<size_t>(i)] * model::kTimestep;
            double speed = v.norm();
            if (speed > kMaxSpeed) v = v * (kMaxSpeed / speed);
            pos[static_cast<size_t>(i)] = pos[static_cast<size_t>(i)] + v * model::kTimestep;
        }
    }
    return tracks;
}

// Two pedestrians approach head-on along the x axis. The scripted one (id 0)
// swings to the left or right over the future segment while the other keeps
// walking straight; per-point jitter at the noise scale.
std::vector<std::vector<Vec2>> bimodal_scene(const SynthSpec& spec, Rng& rng, int mode) {
    constexpr double kSpeed = 1.2;
    constexpr double kLateral = 0.6;
    double dir = mode == 0 ? 1.0 : -1.0; // left pass = +y
    std::vector<std::vector<Vec2>> tracks(2);
    for (int64_t t = 0; t < kTotalSteps; ++t) {
        double tt = model::kTimestep * static_cast<double>(t);
        double bump = 0.0;
        if (t >= model::kObsSteps) {
            double k = static_cast<double>(t - model::kObsSteps + 1);
            bump = dir * kLateral *
                   std::sin(std::numbers::pi * k / static_cast<double>(model::kFutSteps));
        }
        tracks[0].push_back({-4.8 + kSpeed * tt + rng.normal(0.0, spec.noise),
                             bump + rng.normal(0.0, spec.noise)});
        tracks[1].push_back({4.8 - kSpeed * tt + rng.normal(0.0, spec.noise),
                             rng.normal(0.0, spec.noise)});
    }
    return tracks;
}

} // namespace

SynthResult synth_generate(const SynthSpec& spec) {
    if (spec.scenes < 1) throw ContractError("synth: scene count must be at least 1");
    if (spec.min_peds < 1 || spec.max_peds < spec.min_peds)
        throw ContractError("synth: invalid pedestrian count range");
    if (spec.noise < 0.0) throw ContractError("synth: noise must be nonnegative");

    Rng rng(spec.seed);
    SynthResult result;
    for (int64_t s = 0; s < spec.scenes; ++s) {
        std::vector<std::vector<Vec2>> tracks;
        switch (spec.kind) {
            case SynthKind::kConstantVelocity:
                tracks = constant_velocity_scene(spec, rng,
                                                 rng.uniform_int(spec.min_peds, spec.max_peds));
                break;
            case SynthKind::kSocialForces:
                tracks = social_forces_scene(
                    spec, rng, rng.uniform_int(std::max<int64_t>(2, spec.min_peds),
                                               std::max<int64_t>(2, spec.max_peds)));
                break;
            case SynthKind::kBimodalAvoidance: {
                int mode = rng.uniform() < 0.5 ? 0 : 1;
                result.mode_labels.push_back(mode);
                tracks = bimodal_scene(spec, rng, mode);
                break;
            }
        }
        SceneSample scene;
        scene.scene_id = std::string(to_string(spec.kind)) + ":" + std::to_string(s);
        for (size_t i = 0; i < tracks.size(); ++i)
            scene.pedestrians.push_back(
                window_from_positions(static_cast<int64_t>(i), tracks[i]));
        scene.validate();
        result.scenes.push_back(std::move(scene));
    }
    return result;
}

std::vector<RawTrackRow> SynthResult::rows() const {
    std::vector<RawTrackRow> out;
    constexpr int64_t kFrameStride = 100; // gap between scenes keeps windows disjoint
    constexpr int64_t kPedStride = 100;
    for (size_t s = 0; s < scenes.size(); ++s) {
        const SceneSample& scene = scenes[s];
        for (const TrajectoryWindow& w : scene.pedestrians) {
            int64_t ped = static_cast<int64_t>(s) * kPedStride + w.ped_id;
            for (int64_t t = 0; t < kTotalSteps; ++t) {
                Vec2 p = t < model::kObsSteps
                             ? w.observed[static_cast<size_t>(t)]
                             : w.future[static_cast<size_t>(t - model::kObsSteps)];
                out.push_back({static_cast<int64_t>(s) * kFrameStride + t, ped, p.x, p.y});
            }
        }
    }
    return out;
}

DatasetSplit hold_one_out_split(const std::map<std::string, std::vector<SceneSample>>& by_name,
                                std::string_view held_out) {
    bool known = false;
    for (std::string_view name : kSceneNames)
        if (name == held_out) known = true;
    if (!known)
        throw ConfigError("unknown held-out scene '" + std::string(held_out) +
                          "'; expected one of eth, hotel, univ, zara1, zara2");
    DatasetSplit split;
    split.held_out = std::string(held_out);
    for (const auto& [name, scenes] : by_name) {
        auto& side = name == held_out ? split.test : split.train;
        side.insert(side.end(), scenes.begin(), scenes.end());
    }
    return split;
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open manifest '" + path.string() + "'");
    Manifest manifest;
    std::vector<std::filesystem::path>* side = nullptr;
    std::string line;
    int64_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        // trim
        size_t b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        size_t e = line.find_last_not_of(" \t\r");
        std::string token = line.substr(b, e - b + 1);
        if (token == "train:") {
            side = &manifest.train;
        } else if (token == "test:") {
            side = &manifest.test;
        } else if (side) {
            side->push_back(token);
        } else {
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": path before a train:/test: header");
        }
    }
    return manifest;
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw ParseError("cannot write manifest '" + path.string() + "'");
    os << "train:\n";
    for (const auto& p : manifest.train) os << p.string() << "\n";
    os << "test:\n";
    for (const auto& p : manifest.test) os << p.string() << "\n";
}

} // namespace bigat::data
