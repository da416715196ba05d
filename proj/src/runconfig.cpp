#include "ganmod/runconfig.hpp"

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

namespace ganmod {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void bad(const std::string& origin, int line, const std::string& what) {
    throw ConfigError(origin + ":" + std::to_string(line) + ": " + what);
}

double parse_double(const std::string& v, const std::string& origin, int line) {
    size_t used = 0;
    double d;
    try {
        d = std::stod(v, &used);
    } catch (const std::exception&) {
        bad(origin, line, "expected a number, got '" + v + "'");
    }
    if (used != v.size()) bad(origin, line, "trailing characters in number '" + v + "'");
    return d;
}

int64_t parse_int(const std::string& v, const std::string& origin, int line) {
    size_t used = 0;
    int64_t n;
    try {
        n = std::stoll(v, &used);
    } catch (const std::exception&) {
        bad(origin, line, "expected an integer, got '" + v + "'");
    }
    if (used != v.size()) bad(origin, line, "trailing characters in integer '" + v + "'");
    return n;
}

uint64_t parse_u64(const std::string& v, const std::string& origin, int line) {
    size_t used = 0;
    uint64_t n;
    try {
        n = std::stoull(v, &used);
    } catch (const std::exception&) {
        bad(origin, line, "expected an unsigned integer, got '" + v + "'");
    }
    if (used != v.size()) bad(origin, line, "trailing characters in integer '" + v + "'");
    return n;
}

bool parse_bool(const std::string& v, const std::string& origin, int line) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    bad(origin, line, "expected true/false, got '" + v + "'");
}

std::vector<std::string> split(const std::string& v, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : v) {
        if (ch == sep) {
            parts.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    parts.push_back(trim(cur));
    return parts;
}

// "64x64@4,64x64@8,..." — kernel comes from its own key
std::vector<LayerConfig> parse_layers(const std::string& v, const std::string& origin, int line) {
    std::vector<LayerConfig> layers;
    for (const std::string& part : split(v, ',')) {
        size_t x = part.find('x');
        size_t at = part.find('@');
        if (x == std::string::npos || at == std::string::npos || at < x)
            bad(origin, line, "layer '" + part + "' is not CINxCOUT@RES");
        LayerConfig l;
        l.c_in = static_cast<int>(parse_int(trim(part.substr(0, x)), origin, line));
        l.c_out = static_cast<int>(parse_int(trim(part.substr(x + 1, at - x - 1)), origin, line));
        l.resolution = static_cast<int>(parse_int(trim(part.substr(at + 1)), origin, line));
        layers.push_back(l);
    }
    return layers;
}

} // namespace

RunConfig parse_run_config_text(const std::string& text, const std::string& origin) {
    RunConfig rc;
    int kernel = 3;
    bool layers_set = false;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos) bad(origin, line_no, "expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty()) bad(origin, line_no, "empty key");
        if (val.empty()) bad(origin, line_no, "empty value for '" + key + "'");
        if (!seen.insert(key).second) bad(origin, line_no, "duplicate key '" + key + "'");

        TrainingConfig& t = rc.train;
        SynthesisConfig& s = rc.syn;
        if (key == "seed") {
            t.seed = parse_u64(val, origin, line_no);
            rc.seed_set = true;
        } else if (key == "d_z") {
            s.d_z = static_cast<int>(parse_int(val, origin, line_no));
        } else if (key == "d_w") {
            s.d_w = static_cast<int>(parse_int(val, origin, line_no));
        } else if (key == "mapping_layers") {
            s.mapping_layers = static_cast<int>(parse_int(val, origin, line_no));
        } else if (key == "mapping_slope") {
            s.mapping_slope = parse_double(val, origin, line_no);
        } else if (key == "demod_eps") {
            s.demod_eps = parse_double(val, origin, line_no);
        } else if (key == "layers") {
            s.layers = parse_layers(val, origin, line_no);
            layers_set = true;
        } else if (key == "kernel") {
            kernel = static_cast<int>(parse_int(val, origin, line_no));
        } else if (key == "lr") {
            t.lr = parse_double(val, origin, line_no);
        } else if (key == "beta1") {
            t.beta1 = parse_double(val, origin, line_no);
        } else if (key == "beta2") {
            t.beta2 = parse_double(val, origin, line_no);
        } else if (key == "adam_eps") {
            t.adam_eps = parse_double(val, origin, line_no);
        } else if (key == "batch") {
            t.batch = static_cast<int>(parse_int(val, origin, line_no));
        } else if (key == "steps") {
            t.steps = parse_int(val, origin, line_no);
        } else if (key == "weight_contra") {
            t.weights.contra = parse_double(val, origin, line_no);
        } else if (key == "weight_mtg") {
            t.weights.mtg = parse_double(val, origin, line_no);
        } else if (key == "weight_id") {
            t.weights.id = parse_double(val, origin, line_no);
        } else if (key == "tau") {
            t.tau = parse_double(val, origin, line_no);
        } else if (key == "d_v") {
            t.d_v = static_cast<int>(parse_int(val, origin, line_no));
        } else if (key == "mlp_attenuation") {
            t.mlp_attenuation = parse_double(val, origin, line_no);
        } else if (key == "head_attenuation") {
            t.head_attenuation = parse_double(val, origin, line_no);
        } else if (key == "fine_cutoff") {
            t.fine_cutoff = static_cast<int>(parse_int(val, origin, line_no));
        } else if (key == "flip_prob") {
            t.augment.flip_prob = parse_double(val, origin, line_no);
        } else if (key == "brightness_lo") {
            t.augment.brightness_lo = parse_double(val, origin, line_no);
        } else if (key == "brightness_hi") {
            t.augment.brightness_hi = parse_double(val, origin, line_no);
        } else if (key == "shift_lo") {
            t.augment.shift_lo = parse_double(val, origin, line_no);
        } else if (key == "shift_hi") {
            t.augment.shift_hi = parse_double(val, origin, line_no);
        } else if (key == "saturation_lo") {
            t.augment.saturation_lo = parse_double(val, origin, line_no);
        } else if (key == "saturation_hi") {
            t.augment.saturation_hi = parse_double(val, origin, line_no);
        } else if (key == "augment_positives") {
            t.augment_positives = parse_bool(val, origin, line_no);
        } else if (key == "domain_weights") {
            t.domain_weights.clear();
            for (const std::string& part : split(val, ','))
                t.domain_weights.push_back(parse_double(part, origin, line_no));
        } else if (key == "encoder_seed") {
            t.encoder_seed = parse_u64(val, origin, line_no);
        } else if (key == "id_encoder_seed") {
            t.id_encoder_seed = parse_u64(val, origin, line_no);
        } else if (key == "d_e") {
            t.d_e = static_cast<int>(parse_int(val, origin, line_no));
        } else if (key == "pretrain_steps") {
            t.pretrain_steps = parse_int(val, origin, line_no);
        } else if (key == "pretrain_lr") {
            t.pretrain_lr = parse_double(val, origin, line_no);
        } else if (key == "invert_lr") {
            t.invert_lr = parse_double(val, origin, line_no);
        } else if (key == "invert_steps") {
            t.invert_steps = static_cast<int>(parse_int(val, origin, line_no));
        } else if (key == "invert_stop_sim") {
            t.invert_stop_sim = parse_double(val, origin, line_no);
        } else if (key == "sample_every") {
            t.sample_every = parse_int(val, origin, line_no);
        } else if (key == "checkpoint_every") {
            t.checkpoint_every = parse_int(val, origin, line_no);
        } else {
            bad(origin, line_no, "unknown config key '" + key + "'");
        }
    }
    if (!rc.seed_set) throw ConfigError(origin + ": 'seed' is mandatory (wall-clock seeding is not supported)");
    if (layers_set || kernel != 3)
        for (LayerConfig& l : rc.syn.layers) l.kernel = kernel;
    rc.syn.validate();
    rc.train.validate(static_cast<int>(rc.syn.layers.size()));
    return rc;
}

RunConfig parse_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_run_config_text(ss.str(), path);
}

} // namespace ganmod
