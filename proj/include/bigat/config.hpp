#pragma once

#include <filesystem>
#include <string>

#include "bigat/training.hpp"

namespace bigat::cli {

// Flat key = value run configuration. Unknown keys are rejected; every key
// has a default so a config file only lists overrides. CLI flags are applied
// on top through set().
struct RunConfig {
    model::ModelConfig model;
    train::LossWeights weights;
    train::OptimizerConfig opt;
    uint64_t seed = 1;
    int64_t steps = 1000;
    int64_t k_eval = 20;
    int64_t checkpoint_every = 0; // 0: final checkpoint only
    std::string hold_out = "eth";
    std::string data_dir;

    // Applies one key; throws ConfigError for unknown keys or bad values.
    void set(const std::string& key, const std::string& value);

    // Reads a flat "key = value" file ('#' starts a comment).
    void apply_file(const std::filesystem::path& path);

    std::string to_text() const;
};

} // namespace bigat::cli
