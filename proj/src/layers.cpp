#include "bigat/layers.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace bigat::nn {

Tensor xavier_init(Shape shape, Rng& rng) {
    int64_t fan_in = shape.rank() >= 1 ? shape[0] : 1;
    int64_t fan_out = shape.rank() >= 2 ? shape[1] : 1;
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor t{std::move(shape)};
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-bound, bound);
    return t;
}

namespace {

Value apply_act(Graph& g, Value v, Act act) {
    switch (act) {
        case Act::kNone: return v;
        case Act::kRelu: return g.relu(v);
        case Act::kTanh: return g.tanh(v);
    }
    return v;
}

void check_mlp(const MlpSpec& spec) {
    if (spec.widths.size() < 2) throw ContractError("mlp: need at least input and output widths");
    for (int64_t w : spec.widths)
        if (w <= 0) throw ContractError("mlp: widths must be positive");
}

std::string idx_name(const std::string& prefix, const char* base, size_t i) {
    return prefix + "." + base + std::to_string(i);
}

} // namespace

void register_mlp(ParameterStore& store, const std::string& prefix, const MlpSpec& spec,
                  Rng& rng) {
    check_mlp(spec);
    for (size_t i = 0; i + 1 < spec.widths.size(); ++i) {
        store.add(idx_name(prefix, "w", i),
                  xavier_init(Shape{spec.widths[i], spec.widths[i + 1]}, rng));
        store.add(idx_name(prefix, "b", i), Tensor{Shape{spec.widths[i + 1]}});
    }
}

Value mlp_forward(const MlpSpec& spec, ParamBinder& params, const std::string& prefix,
                  Value input) {
    check_mlp(spec);
    Graph& g = params.graph();
    if (input.shape().rank() != 2 || input.shape()[1] != spec.widths.front())
        throw DimensionError("mlp '" + prefix + "': input " + input.shape().str() +
                             " does not match first width " + std::to_string(spec.widths.front()));
    Value h = input;
    size_t layers = spec.widths.size() - 1;
    for (size_t i = 0; i < layers; ++i) {
        Value w = params(idx_name(prefix, "w", i));
        Value b = params(idx_name(prefix, "b", i));
        h = g.add(g.matmul(h, w), g.broadcast(b, Shape{h.shape()[0], spec.widths[i + 1]}));
        h = apply_act(g, h, i + 1 < layers ? spec.hidden : spec.final);
    }
    return h;
}

void register_lstm(ParameterStore& store, const std::string& prefix, const LstmSpec& spec,
                   Rng& rng) {
    if (spec.input_dim <= 0 || spec.hidden_dim <= 0)
        throw ContractError("lstm: dims must be positive");
    store.add(prefix + ".wx", xavier_init(Shape{spec.input_dim, 4 * spec.hidden_dim}, rng));
    store.add(prefix + ".wh", xavier_init(Shape{spec.hidden_dim, 4 * spec.hidden_dim}, rng));
    store.add(prefix + ".b", Tensor{Shape{4 * spec.hidden_dim}});
}

LstmState lstm_zero_state(Graph& g, const LstmSpec& spec, int64_t batch) {
    return {g.constant(Tensor{Shape{batch, spec.hidden_dim}}),
            g.constant(Tensor{Shape{batch, spec.hidden_dim}})};
}

LstmState lstm_cell(const LstmSpec& spec, ParamBinder& params, const std::string& prefix,
                    Value x, const LstmState& state) {
    Graph& g = params.graph();
    int64_t n = x.shape()[0];
    int64_t hd = spec.hidden_dim;
    Value gates = g.add(g.add(g.matmul(x, params(prefix + ".wx")),
                              g.matmul(state.h, params(prefix + ".wh"))),
                        g.broadcast(params(prefix + ".b"), Shape{n, 4 * hd}));
    Value gi = g.sigmoid(g.slice(gates, {0, 0 * hd}, {n, hd}));
    Value gf = g.sigmoid(g.slice(gates, {0, 1 * hd}, {n, hd}));
    Value gg = g.tanh(g.slice(gates, {0, 2 * hd}, {n, hd}));
    Value go = g.sigmoid(g.slice(gates, {0, 3 * hd}, {n, hd}));
    Value c = g.add(g.mul(gf, state.c), g.mul(gi, gg));
    Value h = g.mul(go, g.tanh(c));
    return {h, c};
}

std::pair<std::vector<Value>, LstmState> lstm_forward(const LstmSpec& spec, ParamBinder& params,
                                                      const std::string& prefix,
                                                      std::span<const Value> inputs,
                                                      std::optional<LstmState> init) {
    if (inputs.empty()) throw ContractError("lstm '" + prefix + "': empty input sequence");
    Graph& g = params.graph();
    LstmState state = init ? *init : lstm_zero_state(g, spec, inputs[0].shape()[0]);
    std::vector<Value> outputs;
    outputs.reserve(inputs.size());
    for (const Value& x : inputs) {
        state = lstm_cell(spec, params, prefix, x, state);
        outputs.push_back(state.h);
    }
    return {std::move(outputs), state};
}

void register_gat_layer(ParameterStore& store, const std::string& prefix,
                        const GatLayerSpec& spec, Rng& rng) {
    if (spec.in_dim <= 0 || spec.out_dim <= 0)
        throw ContractError("gat: dims must be positive");
    if (spec.leaky_slope <= 0.0 || spec.leaky_slope >= 1.0)
        throw ContractError("gat: leaky slope must lie in (0,1)");
    store.add(prefix + ".w", xavier_init(Shape{spec.out_dim, spec.in_dim}, rng));
    store.add(prefix + ".a", xavier_init(Shape{2 * spec.out_dim}, rng));
}

Value gat_layer(const GatLayerSpec& spec, ParamBinder& params, const std::string& prefix,
                Value features) {
    Graph& g = params.graph();
    if (features.shape().rank() != 2 || features.shape()[1] != spec.in_dim)
        throw DimensionError("gat '" + prefix + "': features " + features.shape().str() +
                             " do not match in_dim " + std::to_string(spec.in_dim));
    int64_t n = features.shape()[0];
    int64_t od = spec.out_dim;

    Value wv = g.matmul(features, g.transpose(params(prefix + ".w"))); // [N, out]
    Value a = params(prefix + ".a");
    Value a_src = g.reshape(g.slice(a, {0}, {od}), Shape{od, 1});
    Value a_dst = g.reshape(g.slice(a, {od}, {od}), Shape{od, 1});
    Value s_src = g.matmul(wv, a_src); // [N, 1], contribution of the row pedestrian
    Value s_dst = g.matmul(wv, a_dst); // [N, 1], contribution of the attended pedestrian

    // pairwise scores e[i][j] = leaky(s_src[i] + s_dst[j]); outer sum built
    // with rank-1 matmuls so each entry is a single exact addition
    Value ones_row = g.constant(Tensor::full(Shape{1, n}, 1.0));
    Value ones_col = g.constant(Tensor::full(Shape{n, 1}, 1.0));
    Value e = g.leaky_relu(
        g.add(g.matmul(s_src, ones_row), g.matmul(ones_col, g.transpose(s_dst))),
        spec.leaky_slope);
    Value alpha = g.softmax(e, 1);
    // sorted accumulation keeps the row sums exact under any permutation of
    // the pedestrian ordering
    return g.matmul(alpha, wv, true);
}

void register_gat_stack(ParameterStore& store, const std::string& prefix,
                        std::span<const GatLayerSpec> layers, Rng& rng) {
    if (layers.empty()) throw ContractError("gat stack: need at least one layer");
    for (size_t i = 0; i < layers.size(); ++i)
        register_gat_layer(store, idx_name(prefix, "l", i), layers[i], rng);
}

Value gat_stack(std::span<const GatLayerSpec> layers, ParamBinder& params,
                const std::string& prefix, Value features) {
    if (layers.empty()) throw ContractError("gat stack: need at least one layer");
    Graph& g = params.graph();
    for (size_t i = 0; i + 1 < layers.size(); ++i)
        if (layers[i].out_dim != layers[i + 1].in_dim)
            throw DimensionError("gat stack: layer " + std::to_string(i) + " out_dim " +
                                 std::to_string(layers[i].out_dim) + " != next in_dim " +
                                 std::to_string(layers[i + 1].in_dim));
    Value h = features;
    for (size_t i = 0; i < layers.size(); ++i) {
        h = gat_layer(layers[i], params, idx_name(prefix, "l", i), h);
        if (i + 1 < layers.size()) h = g.elu(h);
    }
    return h;
}

Value physical_attention(const MlpSpec& score_mlp, ParamBinder& params,
                         const std::string& prefix, Value cells, Value encoding) {
    Graph& g = params.graph();
    if (cells.shape().rank() != 2 || encoding.shape().rank() != 2 || encoding.shape()[0] != 1)
        throw DimensionError("physical attention: cells " + cells.shape().str() +
                             ", encoding " + encoding.shape().str());
    int64_t k = cells.shape()[0];
    Value rep = g.matmul(g.constant(Tensor::full(Shape{k, 1}, 1.0)), encoding); // [K, D]
    std::vector<Value> parts{cells, rep};
    Value scores = mlp_forward(score_mlp, params, prefix, g.concat(parts, 1)); // [K, 1]
    Value weights = g.softmax(g.reshape(scores, Shape{1, k}), 1);
    return g.matmul(weights, cells); // [1, C]
}

void register_grid_cnn(ParameterStore& store, const std::string& prefix,
                       const GridCnnSpec& spec, Rng& rng) {
    for (size_t i = 0; i < spec.convs.size(); ++i) {
        const Conv2dSpec& c = spec.convs[i];
        store.add(idx_name(prefix, "k", i),
                  xavier_init(Shape{c.kernel * c.kernel * c.in_ch, c.out_ch}, rng));
        store.add(idx_name(prefix, "b", i), Tensor{Shape{c.out_ch}});
    }
}

namespace {

// Valid convolution via patch gather + matmul; input [H, W, C] as a value.
Value conv2d(Graph& g, ParamBinder& params, const std::string& kname, const std::string& bname,
             const Conv2dSpec& spec, Value input) {
    const Shape& s = input.shape();
    int64_t h = s[0], w = s[1], c = s[2];
    if (c != spec.in_ch)
        throw DimensionError("conv: input channels " + std::to_string(c) + " != " +
                             std::to_string(spec.in_ch));
    if (h < spec.kernel || w < spec.kernel)
        throw DimensionError("conv: grid " + s.str() + " smaller than the " +
                             std::to_string(spec.kernel) + "x" + std::to_string(spec.kernel) +
                             " receptive field");
    int64_t oh = (h - spec.kernel) / spec.stride + 1;
    int64_t ow = (w - spec.kernel) / spec.stride + 1;
    std::vector<Value> rows;
    rows.reserve(static_cast<size_t>(oh * ow));
    for (int64_t oy = 0; oy < oh; ++oy)
        for (int64_t ox = 0; ox < ow; ++ox) {
            Value patch = g.slice(input, {oy * spec.stride, ox * spec.stride, 0},
                                  {spec.kernel, spec.kernel, c});
            rows.push_back(g.reshape(patch, Shape{1, spec.kernel * spec.kernel * c}));
        }
    Value cols = g.concat(rows, 0);                               // [oh*ow, k*k*c]
    Value out = g.matmul(cols, params(kname));                    // [oh*ow, out_ch]
    out = g.add(out, g.broadcast(params(bname), out.shape()));
    out = g.relu(out);
    return g.reshape(out, Shape{oh, ow, spec.out_ch});
}

} // namespace

Value grid_cnn(const GridCnnSpec& spec, ParamBinder& params, const std::string& prefix,
               Value grid) {
    if (spec.convs.empty()) throw ContractError("grid cnn: no conv layers");
    Graph& g = params.graph();
    Value h = grid;
    for (size_t i = 0; i < spec.convs.size(); ++i)
        h = conv2d(g, params, idx_name(prefix, "k", i), idx_name(prefix, "b", i), spec.convs[i],
                   h);
    const Shape& s = h.shape();
    return g.reshape(h, Shape{s[0] * s[1], s[2]}); // [K, C']
}

Value grid_to_value(Graph& g, const FeatureGrid& grid) {
    grid.validate();
    return g.constant(Tensor::from(Shape{grid.h, grid.w, grid.c}, grid.cells));
}

void FeatureGrid::validate() const {
    if (h <= 0 || w <= 0 || c <= 0)
        throw DimensionError("feature grid with non-positive dims");
    if (cell_size <= 0.0) throw DimensionError("feature grid with non-positive cell size");
    if (static_cast<int64_t>(cells.size()) != h * w * c)
        throw DimensionError("feature grid cell count mismatch");
}

FeatureGrid load_grid(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open grid file '" + path.string() + "'");
    std::string tag;
    FeatureGrid grid;
    is >> tag >> grid.h >> grid.w >> grid.c >> grid.origin_x >> grid.origin_y >> grid.cell_size;
    if (!is || tag != "GRID")
        throw ParseError("'" + path.string() + "': malformed grid header");
    if (grid.h <= 0 || grid.w <= 0 || grid.c <= 0 || grid.cell_size <= 0.0)
        throw ParseError("'" + path.string() + "': invalid grid dimensions");
    grid.cells.resize(static_cast<size_t>(grid.h * grid.w * grid.c));
    for (double& v : grid.cells) {
        is >> v;
        if (!is) throw ParseError("'" + path.string() + "': truncated grid payload");
    }
    return grid;
}

void save_grid(const FeatureGrid& grid, const std::filesystem::path& path) {
    grid.validate();
    std::ofstream os(path);
    if (!os) throw ParseError("cannot write grid file '" + path.string() + "'");
    char buf[96];
    os << "GRID " << grid.h << " " << grid.w << " " << grid.c;
    std::snprintf(buf, sizeof buf, " %.17g %.17g %.17g", grid.origin_x, grid.origin_y,
                  grid.cell_size);
    os << buf << "\n";
    for (size_t i = 0; i < grid.cells.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", grid.cells[i]);
        os << buf << ((i + 1) % static_cast<size_t>(grid.c * grid.w) == 0 ? "\n" : " ");
    }
    if (!os) throw ParseError("grid write failed for '" + path.string() + "'");
}

} // namespace bigat::nn
