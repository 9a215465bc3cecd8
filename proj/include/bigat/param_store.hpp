#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bigat/graph.hpp"

namespace bigat::ad {

// Named trainable tensors with per-entry optimizer moment slots. Entries
// persist across computation graphs; a fresh graph binds them as leaves via
// ParamBinder for each forward/backward episode.
class ParameterStore {
public:
    struct Moments {
        Tensor m1, m2;
        int64_t step = 0;
    };

    void add(const std::string& name, Tensor init);
    bool contains(const std::string& name) const { return entries_.count(name) > 0; }

    Tensor& value(const std::string& name);
    const Tensor& value(const std::string& name) const;

    // Gradient slots. zero_grad allocates zeroed slots for a whole scope;
    // accumulate adds into an existing or fresh slot.
    void zero_grad(std::string_view prefix);
    void accumulate_grad(const std::string& name, const Tensor& g);
    bool has_grad(const std::string& name) const;
    const Tensor& grad(const std::string& name) const;
    void clear_grad(const std::string& name);

    Moments& moments(const std::string& name);

    // Names under a prefix, lexicographically sorted.
    std::vector<std::string> names(std::string_view prefix = "") const;
    size_t size() const { return entries_.size(); }

    int64_t total_parameters() const;

    // Flat binary checkpoint: magic "BIGAT1", then per parameter in
    // lexicographic name order: u32 name length, name bytes, u32 rank,
    // u32 dims, raw little-endian f64 payload.
    void save(const std::filesystem::path& path) const;
    void load(const std::filesystem::path& path);

private:
    struct Entry {
        Tensor value;
        Tensor grad; // empty = not populated
        Moments moments;
    };

    Entry& at(const std::string& name);
    const Entry& at(const std::string& name) const;

    std::map<std::string, Entry> entries_;
};

// Per-graph lease of store parameters as leaves. Parameters whose names start
// with one of the trainable prefixes become requires-grad leaves; everything
// else binds as a constant (gradient-blocked), which is how detachment across
// the generator/discriminator boundary is implemented.
class ParamBinder {
public:
    ParamBinder(Graph& g, ParameterStore& store, std::vector<std::string> trainable_prefixes);

    Value operator()(const std::string& name);

    // Accumulates every trainable leaf's gradient back into the store.
    void pull_grads();

    Graph& graph() const { return *g_; }
    ParameterStore& store() const { return *store_; }

private:
    bool trainable(const std::string& name) const;

    Graph* g_;
    ParameterStore* store_;
    std::vector<std::string> prefixes_;
    std::unordered_map<std::string, Value> bound_;
};

} // namespace bigat::ad
