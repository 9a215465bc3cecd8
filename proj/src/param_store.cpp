#include "bigat/param_store.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace bigat::ad {

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

void ParameterStore::add(const std::string& name, Tensor init) {
    if (name.empty()) throw ContractError("parameter with empty name");
    auto [it, inserted] = entries_.try_emplace(name);
    if (!inserted) throw ContractError("duplicate parameter '" + name + "'");
    it->second.value = std::move(init);
}

ParameterStore::Entry& ParameterStore::at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ContractError("unknown parameter '" + name + "'");
    return it->second;
}

const ParameterStore::Entry& ParameterStore::at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ContractError("unknown parameter '" + name + "'");
    return it->second;
}

Tensor& ParameterStore::value(const std::string& name) { return at(name).value; }
const Tensor& ParameterStore::value(const std::string& name) const { return at(name).value; }

void ParameterStore::zero_grad(std::string_view prefix) {
    for (auto& [name, e] : entries_)
        if (name.starts_with(prefix)) e.grad = Tensor{e.value.shape()};
}

void ParameterStore::accumulate_grad(const std::string& name, const Tensor& g) {
    Entry& e = at(name);
    if (!(g.shape() == e.value.shape()))
        throw DimensionError("gradient shape " + g.shape().str() + " for parameter '" + name +
                             "' of shape " + e.value.shape().str());
    if (e.grad.empty()) e.grad = Tensor{e.value.shape()};
    for (int64_t i = 0; i < g.numel(); ++i) e.grad[i] += g[i];
}

bool ParameterStore::has_grad(const std::string& name) const { return !at(name).grad.empty(); }

const Tensor& ParameterStore::grad(const std::string& name) const {
    const Entry& e = at(name);
    if (e.grad.empty()) throw ContractError("parameter '" + name + "' has no gradient");
    return e.grad;
}

void ParameterStore::clear_grad(const std::string& name) { at(name).grad = Tensor{}; }

ParameterStore::Moments& ParameterStore::moments(const std::string& name) {
    Entry& e = at(name);
    if (e.moments.m1.empty()) {
        e.moments.m1 = Tensor{e.value.shape()};
        e.moments.m2 = Tensor{e.value.shape()};
    }
    return e.moments;
}

std::vector<std::string> ParameterStore::names(std::string_view prefix) const {
    std::vector<std::string> out;
    for (const auto& [name, e] : entries_)
        if (name.starts_with(prefix)) out.push_back(name);
    return out; // std::map iteration is already lexicographic
}

int64_t ParameterStore::total_parameters() const {
    int64_t n = 0;
    for (const auto& [name, e] : entries_) n += e.value.numel();
    return n;
}

namespace {

constexpr char kMagic[6] = {'B', 'I', 'G', 'A', 'T', '1'};

void write_u32(std::ostream& os, uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

uint32_t read_u32(std::istream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw ParseError("checkpoint: truncated integer field");
    return v;
}

} // namespace

void ParameterStore::save(const std::filesystem::path& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ParseError("cannot write checkpoint '" + path.string() + "'");
    os.write(kMagic, sizeof kMagic);
    for (const auto& [name, e] : entries_) {
        write_u32(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(os, static_cast<uint32_t>(e.value.rank()));
        for (int64_t d : e.value.shape().dims()) write_u32(os, static_cast<uint32_t>(d));
        os.write(reinterpret_cast<const char*>(e.value.data()),
                 static_cast<std::streamsize>(e.value.numel() * sizeof(double)));
    }
    if (!os) throw ParseError("checkpoint write failed for '" + path.string() + "'");
}

void ParameterStore::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("cannot open checkpoint '" + path.string() + "'");
    char magic[6];
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw ParseError("'" + path.string() + "' is not a BIGAT1 checkpoint");
    std::map<std::string, Entry> loaded;
    while (true) {
        is.peek();
        if (is.eof()) break;
        uint32_t name_len = read_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        uint32_t rank = read_u32(is);
        std::vector<int64_t> dims(rank);
        for (uint32_t i = 0; i < rank; ++i) dims[i] = read_u32(is);
        Tensor t{Shape{dims}};
        is.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.numel() * sizeof(double)));
        if (!is) throw ParseError("checkpoint: truncated payload for '" + name + "'");
        Entry e;
        e.value = std::move(t);
        if (!loaded.emplace(std::move(name), std::move(e)).second)
            throw ParseError("checkpoint: duplicate parameter name");
    }
    entries_ = std::move(loaded);
}

ParamBinder::ParamBinder(Graph& g, ParameterStore& store,
                         std::vector<std::string> trainable_prefixes)
    : g_(&g), store_(&store), prefixes_(std::move(trainable_prefixes)) {}

bool ParamBinder::trainable(const std::string& name) const {
    for (const std::string& p : prefixes_)
        if (name.starts_with(p)) return true;
    return false;
}

Value ParamBinder::operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    Value v = g_->leaf(store_->value(name), trainable(name));
    bound_.emplace(name, v);
    return v;
}

void ParamBinder::pull_grads() {
    for (const auto& [name, v] : bound_) {
        if (!v.requires_grad()) continue;
        const Tensor& g = v.grad();
        if (g.empty()) continue; // no flow reached this leaf; zero contribution
        store_->accumulate_grad(name, g);
    }
}

} // namespace bigat::ad
