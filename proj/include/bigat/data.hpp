#pragma once

#include <array>
#include <filesystem>
#include <istream>
#include <map>
#include <span>
#include <string_view>

#include "bigat/scene.hpp"

namespace bigat::data {

using model::SceneSample;
using model::TrajectoryWindow;
using model::Vec2;

// One annotation row of a track file. Rows are whitespace-separated
// "frame ped x y"; coordinates are meters, rows pre-downsampled to one per
// 0.4 s.
struct RawTrackRow {
    int64_t frame = 0;
    int64_t ped = 0;
    double x = 0.0;
    double y = 0.0;
};

// Parses and sorts by (frame, ped). Malformed lines raise ParseError naming
// the 1-based line number; an empty stream yields an empty list.
std::vector<RawTrackRow> parse_tracks(std::istream& is, const std::string& source = "<stream>");
std::vector<RawTrackRow> parse_tracks_file(const std::filesystem::path& path);

void write_tracks(std::span<const RawTrackRow> rows, std::ostream& os);
void write_tracks_file(std::span<const RawTrackRow> rows, const std::filesystem::path& path);

// Slides a 20-frame window over the file's frame progression; a pedestrian
// joins a scene only when present in all 20 frames, scenes keep at least one
// pedestrian. Positions stay in meters.
std::vector<SceneSample> build_windows(std::span<const RawTrackRow> rows, int64_t stride = 1,
                                       const std::string& scene_prefix = "");

enum class SynthKind { kConstantVelocity, kSocialForces, kBimodalAvoidance };

SynthKind synth_kind_from_string(std::string_view name);
const char* to_string(SynthKind kind);

struct SynthSpec {
    SynthKind kind = SynthKind::kConstantVelocity;
    int64_t scenes = 1;
    int64_t min_peds = 1;
    int64_t max_peds = 4;
    double noise = 0.0;
    uint64_t seed = 0;
};

struct SynthResult {
    std::vector<SceneSample> scenes;
    // bimodal kind only: 0 = passes left (+y), 1 = passes right (-y)
    std::vector<int> mode_labels;

    std::vector<RawTrackRow> rows() const; // flattened, ready for file emission
};

// Deterministic per seed. Constant-velocity tracks are exactly linear with
// the noise scale perturbing each pedestrian's velocity; social-forces
// integrates goal attraction with pairwise repulsion at 0.4 s; bimodal
// scenes script a pedestrian past an oncoming one to the left or right with
// equal probability, with per-point position jitter at the noise scale.
SynthResult synth_generate(const SynthSpec& spec);

inline constexpr std::array<std::string_view, 5> kSceneNames{"eth", "hotel", "univ", "zara1",
                                                             "zara2"};

struct DatasetSplit {
    std::vector<SceneSample> train;
    std::vector<SceneSample> test;
    std::string held_out;
};

// Training pool is every named set except the held-out one.
DatasetSplit hold_one_out_split(const std::map<std::string, std::vector<SceneSample>>& by_name,
                                std::string_view held_out);

// Flat manifest: paths listed one per line under "train:" / "test:" headers.
struct Manifest {
    std::vector<std::filesystem::path> train;
    std::vector<std::filesystem::path> test;
};

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

} // namespace bigat::data
