#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bigat/grid.hpp"
#include "bigat/param_store.hpp"
#include "bigat/rng.hpp"

namespace bigat::nn {

using ad::Graph;
using ad::ParamBinder;
using ad::ParameterStore;
using ad::Shape;
using ad::Tensor;
using ad::Value;

enum class Act { kNone, kRelu, kTanh };

// Fully connected stack. widths = [in, ..., out]; `hidden` applies between
// layers, `final` after the last one.
struct MlpSpec {
    std::vector<int64_t> widths;
    Act hidden = Act::kRelu;
    Act final = Act::kNone;

    MlpSpec() = default;
    MlpSpec(std::vector<int64_t> w, Act h = Act::kRelu, Act f = Act::kNone)
        : widths(std::move(w)), hidden(h), final(f) {}
};

void register_mlp(ParameterStore& store, const std::string& prefix, const MlpSpec& spec,
                  Rng& rng);
// input [N, widths.front()] -> [N, widths.back()]
Value mlp_forward(const MlpSpec& spec, ParamBinder& params, const std::string& prefix,
                  Value input);

struct LstmSpec {
    int64_t input_dim = 0;
    int64_t hidden_dim = 0;
};

// In-graph recurrent state, batch-first: h and c are [N, hidden].
struct LstmState {
    Value h, c;
};

void register_lstm(ParameterStore& store, const std::string& prefix, const LstmSpec& spec,
                   Rng& rng);
LstmState lstm_zero_state(Graph& g, const LstmSpec& spec, int64_t batch);
// One step; x is [N, input_dim]. Gate order inside the packed weights: i f g o.
LstmState lstm_cell(const LstmSpec& spec, ParamBinder& params, const std::string& prefix,
                    Value x, const LstmState& state);
// Full unroll; returns one hidden output per timestep plus the final state.
std::pair<std::vector<Value>, LstmState> lstm_forward(const LstmSpec& spec, ParamBinder& params,
                                                      const std::string& prefix,
                                                      std::span<const Value> inputs,
                                                      std::optional<LstmState> init = {});

// Single-head graph attention over a fully connected pedestrian graph
// (self-edges included, no mask). Weight matrix is [out_dim, in_dim]; the
// attention vector has length 2*out_dim.
struct GatLayerSpec {
    int64_t in_dim = 0;
    int64_t out_dim = 0;
    double leaky_slope = 0.2;

    GatLayerSpec() = default;
    GatLayerSpec(int64_t in, int64_t out, double slope = 0.2)
        : in_dim(in), out_dim(out), leaky_slope(slope) {}
};

void register_gat_layer(ParameterStore& store, const std::string& prefix,
                        const GatLayerSpec& spec, Rng& rng);
// features [N, in_dim] -> [N, out_dim]; attention rows sum to 1.
Value gat_layer(const GatLayerSpec& spec, ParamBinder& params, const std::string& prefix,
                Value features);

void register_gat_stack(ParameterStore& store, const std::string& prefix,
                        std::span<const GatLayerSpec> layers, Rng& rng);
// Layers applied sequentially with ELU between them, nothing after the last.
Value gat_stack(std::span<const GatLayerSpec> layers, ParamBinder& params,
                const std::string& prefix, Value features);

// Soft attention over flattened grid cells for one pedestrian: scores each
// cell from [cell features, pedestrian encoding], softmax over cells, then a
// convex combination of cell features. cells [K, C], encoding [1, D] -> [1, C].
Value physical_attention(const MlpSpec& score_mlp, ParamBinder& params,
                         const std::string& prefix, Value cells, Value encoding);

struct Conv2dSpec {
    int64_t in_ch = 0;
    int64_t out_ch = 0;
    int64_t kernel = 3;
    int64_t stride = 2;
};

struct GridCnnSpec {
    std::vector<Conv2dSpec> convs;

    static GridCnnSpec standard(int64_t in_ch, int64_t c1, int64_t c2) {
        GridCnnSpec s;
        s.convs = {{in_ch, c1, 3, 2}, {c1, c2, 3, 2}};
        return s;
    }
    int64_t out_channels() const { return convs.back().out_ch; }
};

void register_grid_cnn(ParameterStore& store, const std::string& prefix,
                       const GridCnnSpec& spec, Rng& rng);
// grid value [H, W, C] -> flattened cell features [K, out_channels], relu
// after every convolution.
Value grid_cnn(const GridCnnSpec& spec, ParamBinder& params, const std::string& prefix,
               Value grid);
Value grid_to_value(Graph& g, const FeatureGrid& grid);

// Xavier-uniform initialized matrix, the default for all layer weights.
Tensor xavier_init(Shape shape, Rng& rng);

} // namespace bigat::nn
