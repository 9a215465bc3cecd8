#include "bigat/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace bigat::cli {

namespace {

int64_t to_int(const std::string& key, const std::string& value) {
    int64_t out = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size())
        throw ConfigError("key '" + key + "': expected integer, got '" + value + "'");
    return out;
}

uint64_t to_uint(const std::string& key, const std::string& value) {
    uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size())
        throw ConfigError("key '" + key + "': expected unsigned integer, got '" + value + "'");
    return out;
}

double to_double(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        double out = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected number, got '" + value + "'");
    }
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("key '" + key + "': expected true/false, got '" + value + "'");
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    if (key == "emb_dim") model.emb_dim = to_int(key, value);
    else if (key == "enc_hidden") model.enc_hidden = to_int(key, value);
    else if (key == "gat_out") model.gat_out = to_int(key, value);
    else if (key == "gat_layers") model.gat_layers = to_int(key, value);
    else if (key == "phys_ctx") model.phys_ctx = to_int(key, value);
    else if (key == "d_z") model.d_z = to_int(key, value);
    else if (key == "dec_hidden") model.dec_hidden = to_int(key, value);
    else if (key == "clf_hidden") model.clf_hidden = to_int(key, value);
    else if (key == "att_hidden") model.att_hidden = to_int(key, value);
    else if (key == "cnn_c1") model.cnn_c1 = to_int(key, value);
    else if (key == "grid_channels") model.grid_channels = to_int(key, value);
    else if (key == "leaky_slope") model.leaky_slope = to_double(key, value);
    else if (key == "lambda_z") weights.lambda_z = to_double(key, value);
    else if (key == "lambda_traj") weights.lambda_traj = to_double(key, value);
    else if (key == "lambda_kl") weights.lambda_kl = to_double(key, value);
    else if (key == "lr_gen") opt.lr_gen = to_double(key, value);
    else if (key == "lr_disc") opt.lr_disc = to_double(key, value);
    else if (key == "beta1") opt.beta1 = to_double(key, value);
    else if (key == "beta2") opt.beta2 = to_double(key, value);
    else if (key == "adam_eps") opt.epsilon = to_double(key, value);
    else if (key == "batch_scenes") opt.batch_scenes = to_int(key, value);
    else if (key == "variety_k") opt.variety_k = to_int(key, value);
    else if (key == "use_variety") opt.use_variety = to_bool(key, value);
    else if (key == "lz_updates_encoder") opt.lz_updates_encoder = to_bool(key, value);
    else if (key == "seed") seed = to_uint(key, value);
    else if (key == "steps") steps = to_int(key, value);
    else if (key == "k_eval") k_eval = to_int(key, value);
    else if (key == "checkpoint_every") checkpoint_every = to_int(key, value);
    else if (key == "hold_out") hold_out = value;
    else if (key == "data_dir") data_dir = value;
    else throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::apply_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config '" + path.string() + "'");
    std::string line;
    int64_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::string t = trim(line);
        if (t.empty()) continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                              ": expected 'key = value'");
        set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
}

std::string RunConfig::to_text() const {
    std::ostringstream os;
    os << "emb_dim = " << model.emb_dim << "\n";
    os << "enc_hidden = " << model.enc_hidden << "\n";
    os << "gat_out = " << model.gat_out << "\n";
    os << "gat_layers = " << model.gat_layers << "\n";
    os << "phys_ctx = " << model.phys_ctx << "\n";
    os << "d_z = " << model.d_z << "\n";
    os << "dec_hidden = " << model.dec_hidden << "\n";
    os << "clf_hidden = " << model.clf_hidden << "\n";
    os << "att_hidden = " << model.att_hidden << "\n";
    os << "cnn_c1 = " << model.cnn_c1 << "\n";
    os << "grid_channels = " << model.grid_channels << "\n";
    os << "leaky_slope = " << model.leaky_slope << "\n";
    os << "lambda_z = " << weights.lambda_z << "\n";
    os << "lambda_traj = " << weights.lambda_traj << "\n";
    os << "lambda_kl = " << weights.lambda_kl << "\n";
    os << "lr_gen = " << opt.lr_gen << "\n";
    os << "lr_disc = " << opt.lr_disc << "\n";
    os << "beta1 = " << opt.beta1 << "\n";
    os << "beta2 = " << opt.beta2 << "\n";
    os << "adam_eps = " << opt.epsilon << "\n";
    os << "batch_scenes = " << opt.batch_scenes << "\n";
    os << "variety_k = " << opt.variety_k << "\n";
    os << "use_variety = " << (opt.use_variety ? "true" : "false") << "\n";
    os << "lz_updates_encoder = " << (opt.lz_updates_encoder ? "true" : "false") << "\n";
    os << "seed = " << seed << "\n";
    os << "steps = " << steps << "\n";
    os << "k_eval = " << k_eval << "\n";
    os << "checkpoint_every = " << checkpoint_every << "\n";
    os << "hold_out = " << hold_out << "\n";
    os << "data_dir = " << data_dir << "\n";
    return os.str();
}

} // namespace bigat::cli
