#include "ganmod/checkpoint.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <utility>

namespace ganmod {

namespace {

using Json = nlohmann::ordered_json;

constexpr char kMagic[4] = {'G', 'M', 'C', 'K'};
constexpr uint32_t kVersion = 1;

Json layers_json(const std::vector<LayerConfig>& layers) {
    Json arr = Json::array();
    for (const LayerConfig& l : layers)
        arr.push_back({{"c_in", l.c_in}, {"c_out", l.c_out}, {"kernel", l.kernel}, {"resolution", l.resolution}});
    return arr;
}

std::vector<LayerConfig> layers_from_json(const Json& arr) {
    std::vector<LayerConfig> layers;
    for (const Json& j : arr)
        layers.push_back({j.at("c_in").get<int>(), j.at("c_out").get<int>(), j.at("kernel").get<int>(),
                          j.at("resolution").get<int>()});
    return layers;
}

Json syn_json(const SynthesisConfig& s) {
    return {{"d_z", s.d_z},
            {"d_w", s.d_w},
            {"mapping_layers", s.mapping_layers},
            {"mapping_slope", s.mapping_slope},
            {"demod_eps", s.demod_eps},
            {"layers", layers_json(s.layers)}};
}

SynthesisConfig syn_from_json(const Json& j) {
    SynthesisConfig s;
    s.d_z = j.at("d_z").get<int>();
    s.d_w = j.at("d_w").get<int>();
    s.mapping_layers = j.at("mapping_layers").get<int>();
    s.mapping_slope = j.at("mapping_slope").get<double>();
    s.demod_eps = j.at("demod_eps").get<double>();
    s.layers = layers_from_json(j.at("layers"));
    return s;
}

Json train_json(const TrainingConfig& t) {
    return {{"lr", t.lr},
            {"beta1", t.beta1},
            {"beta2", t.beta2},
            {"adam_eps", t.adam_eps},
            {"batch", t.batch},
            {"steps", t.steps},
            {"weight_contra", t.weights.contra},
            {"weight_mtg", t.weights.mtg},
            {"weight_id", t.weights.id},
            {"tau", t.tau},
            {"seed", t.seed},
            {"d_v", t.d_v},
            {"mlp_attenuation", t.mlp_attenuation},
            {"head_attenuation", t.head_attenuation},
            {"fine_cutoff", t.fine_cutoff},
            {"flip_prob", t.augment.flip_prob},
            {"brightness_lo", t.augment.brightness_lo},
            {"brightness_hi", t.augment.brightness_hi},
            {"shift_lo", t.augment.shift_lo},
            {"shift_hi", t.augment.shift_hi},
            {"saturation_lo", t.augment.saturation_lo},
            {"saturation_hi", t.augment.saturation_hi},
            {"augment_positives", t.augment_positives},
            {"domain_weights", t.domain_weights},
            {"encoder_seed", t.encoder_seed},
            {"id_encoder_seed", t.id_encoder_seed},
            {"d_e", t.d_e},
            {"pretrain_steps", t.pretrain_steps},
            {"pretrain_lr", t.pretrain_lr},
            {"invert_lr", t.invert_lr},
            {"invert_steps", t.invert_steps},
            {"invert_stop_sim", t.invert_stop_sim},
            {"sample_every", t.sample_every},
            {"checkpoint_every", t.checkpoint_every}};
}

TrainingConfig train_from_json(const Json& j) {
    TrainingConfig t;
    t.lr = j.at("lr").get<double>();
    t.beta1 = j.at("beta1").get<double>();
    t.beta2 = j.at("beta2").get<double>();
    t.adam_eps = j.at("adam_eps").get<double>();
    t.batch = j.at("batch").get<int>();
    t.steps = j.at("steps").get<int64_t>();
    t.weights.contra = j.at("weight_contra").get<double>();
    t.weights.mtg = j.at("weight_mtg").get<double>();
    t.weights.id = j.at("weight_id").get<double>();
    t.tau = j.at("tau").get<double>();
    t.seed = j.at("seed").get<uint64_t>();
    t.d_v = j.at("d_v").get<int>();
    t.mlp_attenuation = j.at("mlp_attenuation").get<double>();
    t.head_attenuation = j.at("head_attenuation").get<double>();
    t.fine_cutoff = j.at("fine_cutoff").get<int>();
    t.augment.flip_prob = j.at("flip_prob").get<double>();
    t.augment.brightness_lo = j.at("brightness_lo").get<double>();
    t.augment.brightness_hi = j.at("brightness_hi").get<double>();
    t.augment.shift_lo = j.at("shift_lo").get<double>();
    t.augment.shift_hi = j.at("shift_hi").get<double>();
    t.augment.saturation_lo = j.at("saturation_lo").get<double>();
    t.augment.saturation_hi = j.at("saturation_hi").get<double>();
    t.augment_positives = j.at("augment_positives").get<bool>();
    t.domain_weights = j.at("domain_weights").get<std::vector<double>>();
    t.encoder_seed = j.at("encoder_seed").get<uint64_t>();
    t.id_encoder_seed = j.at("id_encoder_seed").get<uint64_t>();
    t.d_e = j.at("d_e").get<int>();
    t.pretrain_steps = j.at("pretrain_steps").get<int64_t>();
    t.pretrain_lr = j.at("pretrain_lr").get<double>();
    t.invert_lr = j.at("invert_lr").get<double>();
    t.invert_steps = j.at("invert_steps").get<int>();
    t.invert_stop_sim = j.at("invert_stop_sim").get<double>();
    t.sample_every = j.at("sample_every").get<int64_t>();
    t.checkpoint_every = j.at("checkpoint_every").get<int64_t>();
    return t;
}

struct ArrayRef {
    std::string name;
    const Tensor* tensor;
};

// canonical array order; save writes it, load requires it
std::vector<ArrayRef> array_list(CheckpointBundle& b) {
    std::vector<ArrayRef> arrays;
    for (const NamedTensor& p : b.gen.named_params()) arrays.push_back({"gen." + p.name, p.tensor});
    if (b.has_hyper) {
        std::vector<NamedTensor> hp = b.hyper.named_params();
        for (const NamedTensor& p : hp) arrays.push_back({"hyper." + p.name, p.tensor});
        if (b.has_moments) {
            if (b.adam_m.size() != hp.size() || b.adam_v.size() != hp.size())
                throw IoError("optimizer moment count does not match the hyper-network");
            for (size_t i = 0; i < hp.size(); ++i) {
                arrays.push_back({"adam.m." + hp[i].name, &b.adam_m[i]});
                arrays.push_back({"adam.v." + hp[i].name, &b.adam_v[i]});
            }
        }
    }
    for (size_t d = 0; d < b.registry.domains.size(); ++d) {
        const Domain& dom = b.registry.domains[d];
        if (dom.w_c.numel() > 0) arrays.push_back({"registry." + std::to_string(d) + ".wc", &dom.w_c});
        for (size_t i = 0; i < dom.images.size(); ++i)
            arrays.push_back(
                {"registry." + std::to_string(d) + ".image." + std::to_string(i), &dom.images[i]});
    }
    return arrays;
}

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, double v) {
    float f = static_cast<float>(v);
    uint32_t bits;
    std::memcpy(&bits, &f, sizeof bits);
    put_u32(out, bits);
}

class Reader {
public:
    Reader(std::string bytes, std::string path) : bytes_(std::move(bytes)), path_(std::move(path)) {}

    void need(size_t n, const std::string& what) {
        if (pos_ + n > bytes_.size())
            throw IoError(path_ + ": truncated while reading " + what + " (need " + std::to_string(n) +
                          " bytes, have " + std::to_string(bytes_.size() - pos_) + ")");
    }
    uint32_t u32(const std::string& what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(bytes_[pos_++])) << (8 * i);
        return v;
    }
    uint64_t u64(const std::string& what) {
        need(8, what);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(bytes_[pos_++])) << (8 * i);
        return v;
    }
    std::string raw(size_t n, const std::string& what) {
        need(n, what);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    void read_f32_array(Tensor& t, const std::string& name) {
        need(4 * static_cast<size_t>(t.numel()), "array " + name);
        for (int64_t i = 0; i < t.numel(); ++i) {
            uint32_t bits = u32("array " + name);
            float f;
            std::memcpy(&f, &bits, sizeof f);
            t[i] = static_cast<double>(f);
        }
    }
    size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::string bytes_;
    std::string path_;
    size_t pos_ = 0;
};

std::vector<int> shape_from_json(const Json& arr) {
    std::vector<int> s;
    for (const Json& v : arr) s.push_back(v.get<int>());
    return s;
}

} // namespace

void save_checkpoint(const CheckpointBundle& bundle, const std::string& path) {
    CheckpointBundle& b = const_cast<CheckpointBundle&>(bundle); // named_params needs mutable access
    if (b.has_hyper && b.phase != "adapted") throw IoError("a checkpoint with a hyper-network must be phase \"adapted\"");
    if (!b.has_hyper && b.phase != "source") throw IoError("a checkpoint without a hyper-network must be phase \"source\"");

    std::vector<ArrayRef> arrays = array_list(b);
    Json manifest;
    manifest["format"] = "GMCK";
    manifest["version"] = kVersion;
    manifest["phase"] = b.phase;
    manifest["step"] = b.step;
    manifest["synthesis"] = syn_json(b.syn);
    manifest["training"] = train_json(b.train);
    manifest["encoder"] = {{"kind", "toy-conv"},
                           {"resolution", b.syn.output_resolution()},
                           {"d_e", b.train.d_e},
                           {"seed", b.train.encoder_seed},
                           {"id_seed", b.train.id_encoder_seed}};
    if (b.has_hyper) {
        const HypernetConfig& h = b.hyper.config();
        manifest["hyper"] = {{"n_domains", h.n_domains},
                             {"d_v", h.d_v},
                             {"mlp_slope", h.mlp_slope},
                             {"mlp_attenuation", h.mlp_attenuation},
                             {"head_attenuation", h.head_attenuation}};
    } else {
        manifest["hyper"] = nullptr;
    }
    Json domains = Json::array();
    for (const Domain& d : b.registry.domains)
        domains.push_back({{"id", d.id},
                           {"contains_faces", d.contains_faces},
                           {"image_paths", d.image_paths},
                           {"images", d.images.size()},
                           {"has_wc", d.w_c.numel() > 0}});
    manifest["registry"] = {{"resolution", b.registry.resolution}, {"domains", domains}};
    manifest["adam"] = {{"present", b.has_moments}, {"t", b.adam_t}};

    Json arr_meta = Json::array();
    uint64_t offset = 0;
    for (const ArrayRef& a : arrays) {
        arr_meta.push_back({{"name", a.name},
                            {"shape", a.tensor->shape()},
                            {"offset", offset},
                            {"count", a.tensor->numel()}});
        offset += 4 * static_cast<uint64_t>(a.tensor->numel());
    }
    manifest["arrays"] = arr_meta;

    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    std::string json_bytes = manifest.dump();
    put_u64(out, json_bytes.size());
    out += json_bytes;
    for (const ArrayRef& a : arrays)
        for (int64_t i = 0; i < a.tensor->numel(); ++i) put_f32(out, (*a.tensor)[i]);

    std::filesystem::path target(path);
    if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
    std::filesystem::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
        f.write(out.data(), static_cast<std::streamsize>(out.size()));
        f.flush();
        if (!f) throw IoError("failed writing " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, target, ec);
    if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

CheckpointBundle load_checkpoint(const std::string& path) {
    std::string bytes;
    {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot open " + path);
        std::ostringstream ss;
        ss << f.rdbuf();
        bytes = ss.str();
    }
    Reader r(std::move(bytes), path);
    std::string magic = r.raw(4, "magic");
    if (std::memcmp(magic.data(), kMagic, 4) != 0) throw IoError(path + ": not a checkpoint archive");
    uint32_t version = r.u32("version");
    if (version != kVersion)
        throw IoError(path + ": unsupported checkpoint version " + std::to_string(version));
    uint64_t json_len = r.u64("manifest length");
    Json manifest;
    try {
        manifest = Json::parse(r.raw(static_cast<size_t>(json_len), "manifest"));
    } catch (const Json::parse_error& e) {
        throw IoError(path + ": bad manifest: " + e.what());
    }

    CheckpointBundle b;
    try {
        b.phase = manifest.at("phase").get<std::string>();
        b.step = manifest.at("step").get<int64_t>();
        b.syn = syn_from_json(manifest.at("synthesis"));
        b.train = train_from_json(manifest.at("training"));
        b.syn.validate();
        b.gen = Generator(b.syn);
        if (!manifest.at("hyper").is_null()) {
            HypernetConfig h;
            h.n_domains = manifest["hyper"].at("n_domains").get<int>();
            h.d_v = manifest["hyper"].at("d_v").get<int>();
            h.mlp_slope = manifest["hyper"].at("mlp_slope").get<double>();
            h.mlp_attenuation = manifest["hyper"].at("mlp_attenuation").get<double>();
            h.head_attenuation = manifest["hyper"].at("head_attenuation").get<double>();
            h.layers = b.syn.layers;
            b.hyper = Hypernet(h);
            b.has_hyper = true;
        }
        const Json& reg = manifest.at("registry");
        b.registry.resolution = reg.at("resolution").get<int>();
        int n_domains = 0;
        for (const Json& dj : reg.at("domains")) {
            Domain d;
            d.id = dj.at("id").get<std::string>();
            d.contains_faces = dj.at("contains_faces").get<bool>();
            d.image_paths = dj.at("image_paths").get<std::vector<std::string>>();
            size_t n_images = dj.at("images").get<size_t>();
            int R = b.registry.resolution;
            for (size_t i = 0; i < n_images; ++i) d.images.push_back(Tensor({3, R, R}));
            if (dj.at("has_wc").get<bool>()) d.w_c = Tensor({b.syn.d_w});
            b.registry.domains.push_back(std::move(d));
            ++n_domains;
        }
        if (b.has_hyper && b.hyper.config().n_domains != n_domains)
            throw IoError(path + ": hyper-network domain count " +
                          std::to_string(b.hyper.config().n_domains) + " does not match registry size " +
                          std::to_string(n_domains));
        b.has_moments = manifest.at("adam").at("present").get<bool>();
        b.adam_t = manifest.at("adam").at("t").get<int64_t>();
        if (b.has_moments) {
            if (!b.has_hyper) throw IoError(path + ": optimizer moments without a hyper-network");
            for (const NamedTensor& p : b.hyper.named_params()) {
                b.adam_m.push_back(Tensor(p.tensor->shape()));
                b.adam_v.push_back(Tensor(p.tensor->shape()));
            }
        }
    } catch (const Json::exception& e) {
        throw IoError(path + ": bad manifest: " + e.what());
    }

    std::vector<ArrayRef> arrays = array_list(b);
    const Json& arr_meta = manifest.at("arrays");
    if (arr_meta.size() != arrays.size())
        throw IoError(path + ": manifest lists " + std::to_string(arr_meta.size()) + " arrays, expected " +
                      std::to_string(arrays.size()));
    uint64_t offset = 0;
    for (size_t i = 0; i < arrays.size(); ++i) {
        const Json& meta = arr_meta[i];
        std::string name = meta.at("name").get<std::string>();
        if (name != arrays[i].name)
            throw IoError(path + ": array " + std::to_string(i) + " is \"" + name + "\", expected \"" +
                          arrays[i].name + "\"");
        std::vector<int> shape = shape_from_json(meta.at("shape"));
        Tensor* t = const_cast<Tensor*>(arrays[i].tensor);
        if (shape != t->shape())
            throw IoError(path + ": array " + name + " has shape " + shape_str(shape) + ", expected " +
                          shape_str(t->shape()));
        if (meta.at("count").get<int64_t>() != t->numel())
            throw IoError(path + ": array " + name + " count " +
                          std::to_string(meta.at("count").get<int64_t>()) + " does not match its shape " +
                          shape_str(shape));
        if (meta.at("offset").get<uint64_t>() != offset)
            throw IoError(path + ": array " + name + " has a bad offset");
        offset += 4 * static_cast<uint64_t>(t->numel());
        r.read_f32_array(*t, name);
    }
    if (r.remaining() != 0)
        throw IoError(path + ": " + std::to_string(r.remaining()) + " trailing bytes after the last array");
    return b;
}

AdaptedModel make_adapted_model(CheckpointBundle b) {
    if (!b.has_hyper) throw IoError("checkpoint holds no hyper-network; train before synthesizing adapted images");
    if (!b.registry.prepared()) throw IoError("checkpoint registry is missing cached latents");
    AdaptedModel m;
    m.syn = std::move(b.syn);
    m.train = std::move(b.train);
    m.gen = std::move(b.gen);
    m.hyper = std::move(b.hyper);
    m.registry = std::move(b.registry);
    m.step = b.step;
    return m;
}

} // namespace ganmod
